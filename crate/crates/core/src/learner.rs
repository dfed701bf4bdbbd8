//! One-dimensional no-regret learners over `n` actions.
//!
//! Both modes consume losses in `[0, 1]`. Full-information mode is Hedge
//! (exponential weights). Bandit mode is EXP3.P with the loss-based
//! importance-weighted estimate, an optimistic confidence bonus on every
//! action and uniform exploration mixing. Weights are kept as logarithms and
//! re-centred when they drift, which plays the role of renormalisation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid_input, Error, Result};

const LOSS_SLACK: f64 = 1e-9;
const RECENTER_AT: f64 = 500.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Feedback {
    Full,
    Bandit,
}

/// A point of the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionDistribution(Vec<f64>);

impl ActionDistribution {
    /// Validates nonnegativity and normalisation (within `1e-9`), then
    /// rescales to sum exactly to one.
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(invalid_input!("distribution over zero actions"));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid_input!("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid_input!("probabilities sum to {total}, not 1"));
        }
        Ok(Self(probabilities.into_iter().map(|p| p / total).collect()))
    }

    pub fn point_mass(n: usize, action: usize) -> Self {
        let mut v = vec![0.0; n];
        v[action] = 1.0;
        Self(v)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub(crate) fn from_normalized(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Inverse-CDF sample for `u ∈ [0, 1)`. Never returns a zero-probability
    /// action.
    pub fn sample(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerState {
    n: usize,
    mode: Feedback,
    log_weights: Vec<f64>,
    learning_rate: f64,
    step_count: usize,
    horizon: usize,
    exploration_mix: f64,
    confidence_width: f64,
}

impl LearnerState {
    /// Hedge with `η = √(8 ln n / T)`.
    pub fn new_full(n: usize, horizon: usize) -> Result<Self> {
        check_sizes(n, horizon)?;
        let ln_n = libm::log(n as f64);
        Ok(Self {
            n,
            mode: Feedback::Full,
            log_weights: vec![0.0; n],
            learning_rate: libm::sqrt(8.0 * ln_n / horizon as f64),
            step_count: 0,
            horizon,
            exploration_mix: 0.0,
            confidence_width: 0.0,
        })
    }

    /// EXP3.P with `β = √(ln(n/δ)/(nT))`, `η = 0.95·√(ln n/(nT))` and
    /// `γ = 1.05·√(n ln n/T)` (capped at 1/2).
    pub fn new_bandit(n: usize, horizon: usize, failure_prob: f64) -> Result<Self> {
        check_sizes(n, horizon)?;
        if !(failure_prob > 0.0 && failure_prob < 1.0) {
            return Err(invalid_input!("failure probability must lie in (0, 1), got {failure_prob}"));
        }
        let (nf, tf) = (n as f64, horizon as f64);
        let ln_n = libm::log(nf);
        let (eta, gamma, beta) = if n == 1 {
            (0.0, 0.0, 0.0)
        } else {
            (
                0.95 * libm::sqrt(ln_n / (nf * tf)),
                (1.05 * libm::sqrt(nf * ln_n / tf)).min(0.5),
                libm::sqrt(libm::log(nf / failure_prob) / (nf * tf)).min(1.0),
            )
        };
        Ok(Self {
            n,
            mode: Feedback::Bandit,
            log_weights: vec![0.0; n],
            learning_rate: eta,
            step_count: 0,
            horizon,
            exploration_mix: gamma,
            confidence_width: beta,
        })
    }

    pub fn new(mode: Feedback, n: usize, horizon: usize, failure_prob: f64) -> Result<Self> {
        match mode {
            Feedback::Full => Self::new_full(n, horizon),
            Feedback::Bandit => Self::new_bandit(n, horizon, failure_prob),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Feedback {
        self.mode
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn exploration_mix(&self) -> f64 {
        self.exploration_mix
    }

    pub fn confidence_width(&self) -> f64 {
        self.confidence_width
    }

    /// Weights scaled so that the largest is 1.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.max_log_weight();
        self.log_weights.iter().map(|&l| libm::exp(l - m)).collect()
    }

    pub fn set_learning_rate(&mut self, eta: f64) -> Result<()> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(invalid_input!("learning rate must be finite and nonnegative, got {eta}"));
        }
        self.learning_rate = eta;
        Ok(())
    }

    /// Replaces the weights with the given positive values.
    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.n {
            return Err(invalid_input!("expected {} weights, got {}", self.n, weights.len()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid_input!("weights must be finite and positive"));
        }
        self.log_weights = weights.iter().map(|&w| libm::log(w)).collect();
        Ok(())
    }

    fn max_log_weight(&self) -> f64 {
        self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The play for the next step: normalised weights, mixed with the uniform
    /// distribution in bandit mode.
    pub fn next_distribution(&self) -> ActionDistribution {
        let m = self.max_log_weight();
        let mut probs: Vec<f64> = self.log_weights.iter().map(|&l| libm::exp(l - m)).collect();
        let total: f64 = probs.iter().sum();
        let gamma = self.exploration_mix;
        let floor = gamma / self.n as f64;
        for p in probs.iter_mut() {
            *p = (1.0 - gamma) * (*p / total) + floor;
        }
        ActionDistribution::from_normalized(probs)
    }

    fn begin_step(&mut self) -> Result<()> {
        if self.step_count >= self.horizon {
            return Err(invalid_input!("learner horizon of {} steps exceeded", self.horizon));
        }
        self.step_count += 1;
        Ok(())
    }

    fn recenter(&mut self) {
        let m = self.max_log_weight();
        if m.abs() > RECENTER_AT {
            for l in self.log_weights.iter_mut() {
                *l -= m;
            }
        }
    }

    /// Full-information update `w_i ← w_i · exp(−η ℓ_i)`.
    pub fn update_full(&mut self, losses: &[f64]) -> Result<()> {
        if self.mode != Feedback::Full {
            return Err(Error::Unsupported("full-information update on a bandit learner"));
        }
        if losses.len() != self.n {
            return Err(invalid_input!("expected {} losses, got {}", self.n, losses.len()));
        }
        for (i, &l) in losses.iter().enumerate() {
            check_loss(i, l)?;
        }
        self.begin_step()?;
        let eta = self.learning_rate;
        for (w, &l) in self.log_weights.iter_mut().zip(losses) {
            *w -= eta * l.clamp(0.0, 1.0);
        }
        self.recenter();
        Ok(())
    }

    /// Bandit update with the importance-weighted loss of the played action
    /// and the confidence bonus `β / p_i` on every action.
    pub fn update_bandit(&mut self, played: usize, observed_loss: f64, played_prob: f64) -> Result<()> {
        if self.mode != Feedback::Bandit {
            return Err(Error::Unsupported("bandit update on a full-information learner"));
        }
        if played >= self.n {
            return Err(invalid_input!("played action {played} out of range for {} actions", self.n));
        }
        if !(played_prob > 0.0 && played_prob <= 1.0 + 1e-12) {
            return Err(invalid_input!("played probability must lie in (0, 1], got {played_prob}"));
        }
        check_loss(played, observed_loss)?;
        let dist = self.next_distribution();
        let expected = dist.probabilities()[played];
        if (expected - played_prob).abs() > 1e-9 {
            return Err(invalid_input!(
                "played probability {played_prob} disagrees with the learner's {expected}"
            ));
        }
        self.begin_step()?;
        let (eta, beta) = (self.learning_rate, self.confidence_width);
        let loss = observed_loss.clamp(0.0, 1.0);
        for (i, (w, &p)) in self.log_weights.iter_mut().zip(dist.probabilities()).enumerate() {
            let hit = if i == played { loss } else { 0.0 };
            *w -= eta * (hit - beta) / p;
        }
        self.recenter();
        Ok(())
    }

    /// Theoretical regret bound used in acceptance inequalities:
    /// `√(T ln n / 2) + ln n / η` for Hedge, `5.15·√(nT ln(n/δ))` for EXP3.P.
    pub fn regret_bound(&self, failure_prob: f64) -> f64 {
        let (nf, tf) = (self.n as f64, self.horizon as f64);
        if self.n == 1 {
            return 0.0;
        }
        let ln_n = libm::log(nf);
        match self.mode {
            Feedback::Full => libm::sqrt(tf * ln_n / 2.0) + ln_n / self.learning_rate,
            Feedback::Bandit => 5.15 * libm::sqrt(nf * tf * libm::log(nf / failure_prob)),
        }
    }
}

fn check_sizes(n: usize, horizon: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid_input!("a learner needs at least one action"));
    }
    if horizon == 0 {
        return Err(invalid_input!("horizon must be positive"));
    }
    Ok(())
}

fn check_loss(i: usize, l: f64) -> Result<()> {
    if !(-LOSS_SLACK..=1.0 + LOSS_SLACK).contains(&l) {
        return Err(invalid_input!("loss {l} for action {i} lies outside [0, 1]"));
    }
    Ok(())
}
