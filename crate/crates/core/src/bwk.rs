//! Bandits with knapsacks under an `ℓ_p` budget. The learner maximises the
//! Lagrangian reward `R_i = r_i − λ·⟨C e_i, ∇Ψ(Λ)⟩` until the load norm
//! passes the budget, after which only the null action is played.
//!
//! The adversarial variant smooths `‖·‖_p` directly. The stochastic variant
//! adds a dummy resource (coordinate 0) consuming `B/T` per step and smooths
//! the composite `‖·‖_{p,r}` norm, which forces the budget to run out by `T`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::environment::{CostMatrix, Environment};
use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::learner::{ActionDistribution, Feedback, LearnerState};
use crate::olvc::dot;
use crate::potential::{norm_of, ones_norm, smoothing_width, Exponent, NormParams, PrNormParams};
use crate::rng::{self, Stream};
use crate::trace::{Objective, RunTrace, StepRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BwkVariant {
    Adversarial,
    Stochastic,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BwkConfig {
    pub p: Exponent,
    pub d: usize,
    /// Action count, null action included.
    pub n: usize,
    pub horizon: usize,
    pub budget: f64,
    pub variant: BwkVariant,
    /// Known benchmark value; `None` means it has to be guessed.
    #[cfg_attr(feature = "serde", serde(default))]
    pub opt: Option<f64>,
    pub null_action: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_feedback"))]
    pub feedback: Feedback,
    #[cfg_attr(feature = "serde", serde(default = "default_failure_prob"))]
    pub failure_prob: f64,
    /// Forces the multiplier instead of deriving it from `opt`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub lambda: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub diagnostics: bool,
}

#[cfg(feature = "serde")]
fn default_feedback() -> Feedback {
    Feedback::Full
}

#[cfg(feature = "serde")]
fn default_failure_prob() -> f64 {
    0.05
}

/// Quantities derived from a configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BwkParams {
    pub lambda: f64,
    pub epsilon: f64,
    /// Outer exponent of the composite norm (stochastic only).
    pub r_outer: Option<f64>,
    /// Benchmark down-scaling `5p(‖1‖_p − 1)/‖1‖_p` (adversarial only).
    pub alpha: Option<f64>,
    /// Bound `λκ + 1` on every `|R_i|`; losses are `(M − R_i)/(2M)`.
    pub reward_bound: f64,
}

impl BwkConfig {
    pub fn new(p: Exponent, d: usize, n: usize, horizon: usize, budget: f64, variant: BwkVariant, null_action: usize) -> Self {
        Self {
            p,
            d,
            n,
            horizon,
            budget,
            variant,
            opt: None,
            null_action,
            feedback: Feedback::Full,
            failure_prob: 0.05,
            lambda: None,
            diagnostics: false,
        }
    }

    pub fn with_opt(mut self, opt: f64) -> Self {
        self.opt = Some(opt);
        self
    }

    pub fn ones_norm(&self) -> f64 {
        ones_norm(self.p, self.d)
    }

    /// The smallest budget the adversarial guarantee allows,
    /// `2p(‖1‖_p − 1)` (with `2 ln d` for `p = ∞`).
    pub fn minimum_adversarial_budget(p: Exponent, d: usize) -> f64 {
        2.0 * smoothing_width(p, d)
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(invalid_config!("need d ≥ 1 and n ≥ 1"));
        }
        if self.horizon == 0 {
            return Err(invalid_config!("horizon must be positive"));
        }
        if self.null_action >= self.n {
            return Err(invalid_config!("null action {} out of range for {} actions", self.null_action, self.n));
        }
        if !(self.budget > 0.0) {
            return Err(invalid_config!("budget must be positive, got {}", self.budget));
        }
        if let Some(opt) = self.opt {
            if !(opt.is_finite() && opt >= 0.0) {
                return Err(invalid_config!("OPT must be finite and nonnegative, got {opt}"));
            }
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(invalid_config!("λ must be finite and nonnegative, got {l}"));
            }
        }
        Ok(())
    }

    /// Derives `λ`, `ε`, `r` and the loss scale for a benchmark value `opt`.
    pub fn params_for(&self, opt: f64) -> Result<BwkParams> {
        self.validate()?;
        let (b, ones) = (self.budget, self.ones_norm());
        match self.variant {
            BwkVariant::Adversarial => {
                let width = smoothing_width(self.p, self.d);
                if b < 2.0 * width {
                    return Err(invalid_config!(
                        "budget {b} is below 2p(‖1‖_p − 1) = {}",
                        2.0 * width
                    ));
                }
                let lambda = self.lambda.unwrap_or(opt / (2.0 * b));
                let eps = 2.0 * width / b;
                Ok(BwkParams {
                    lambda,
                    epsilon: if eps > 0.0 { eps } else { 1.0 },
                    r_outer: None,
                    alpha: Some(5.0 * width / ones),
                    reward_bound: lambda * ones + 1.0,
                })
            }
            BwkVariant::Stochastic => {
                let p = match self.p {
                    Exponent::Finite(p) => p,
                    Exponent::Infinity => {
                        return Err(Error::Unsupported("the stochastic variant needs a finite p"))
                    }
                };
                let r = libm::round(libm::cbrt(b / ones)).max(1.0);
                let eps = libm::sqrt((p + r) * ones / b).min(1.0);
                let lambda = self.lambda.unwrap_or(opt / b);
                let per_step = b / self.horizon as f64;
                let kappa = libm::pow(libm::pow(per_step, r) + libm::pow(ones, r), 1.0 / r);
                Ok(BwkParams {
                    lambda,
                    epsilon: eps,
                    r_outer: Some(r),
                    alpha: None,
                    reward_bound: lambda * kappa + 1.0,
                })
            }
        }
    }

    /// Parameters for the configured OPT.
    pub fn params(&self) -> Result<BwkParams> {
        let opt = match (self.opt, self.lambda) {
            (Some(opt), _) => opt,
            (None, Some(_)) => 0.0,
            (None, None) => return Err(invalid_config!("OPT is unknown; use the guessing wrapper")),
        };
        self.params_for(opt)
    }
}

#[derive(Clone, Debug)]
enum Potential {
    Plain(NormParams),
    Composite(PrNormParams),
}

impl Potential {
    fn gradient(&self, load: &[f64]) -> Result<Vec<f64>> {
        match self {
            Potential::Plain(n) => n.psi_gradient(load),
            Potential::Composite(n) => n.psi_gradient(load),
        }
    }

    fn psi(&self, load: &[f64]) -> f64 {
        match self {
            Potential::Plain(n) => n.psi_unchecked(load),
            Potential::Composite(n) => n.psi_unchecked(load),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BwkState {
    config: BwkConfig,
    params: BwkParams,
    potential: Potential,
    /// Real load, `d` coordinates.
    load: Vec<f64>,
    learner: LearnerState,
    total_reward: f64,
    stopped: bool,
    stop_time: Option<usize>,
    step: usize,
    rng: Stream,
}

impl BwkState {
    pub fn new(config: &BwkConfig, params: BwkParams, seed: u64) -> Result<Self> {
        let potential = match config.variant {
            BwkVariant::Adversarial => Potential::Plain(NormParams::new(config.p, config.d, params.epsilon)?),
            BwkVariant::Stochastic => {
                let r = Exponent::finite(params.r_outer.unwrap_or(1.0))?;
                Potential::Composite(PrNormParams::new(config.p, r, config.d, params.epsilon)?)
            }
        };
        Ok(Self {
            config: config.clone(),
            params,
            potential,
            load: vec![0.0; config.d],
            learner: LearnerState::new(config.feedback, config.n, config.horizon, config.failure_prob)?,
            total_reward: 0.0,
            stopped: false,
            stop_time: None,
            step: 0,
            rng: rng::stream(seed, rng::label::ALGORITHM),
        })
    }

    pub fn params(&self) -> &BwkParams {
        &self.params
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    pub fn stop_time(&self) -> Option<usize> {
        self.stop_time
    }

    pub fn learner(&self) -> &LearnerState {
        &self.learner
    }

    /// Dummy resource consumed after `t` steps, `t·B/T`.
    pub fn dummy_load(&self, t: usize) -> f64 {
        t as f64 * self.config.budget / self.config.horizon as f64
    }

    /// Load in the potential's coordinates after `t` steps.
    fn potential_load(&self, t: usize) -> Vec<f64> {
        match self.config.variant {
            BwkVariant::Adversarial => self.load.clone(),
            BwkVariant::Stochastic => {
                let mut v = Vec::with_capacity(self.config.d + 1);
                v.push(self.dummy_load(t));
                v.extend_from_slice(&self.load);
                v
            }
        }
    }

    /// The norm compared against the budget: `‖Λ‖_p`, or `‖(Λ_0, Λ)‖_{p,∞}`
    /// for the stochastic variant.
    pub fn budget_norm(&self) -> f64 {
        let real = norm_of(self.config.p, &self.load);
        match self.config.variant {
            BwkVariant::Adversarial => real,
            BwkVariant::Stochastic => real.max(self.dummy_load(self.step)),
        }
    }

    fn over_budget(&self) -> bool {
        let norm = self.budget_norm();
        match self.config.variant {
            BwkVariant::Adversarial => norm > self.config.budget,
            BwkVariant::Stochastic => norm >= self.config.budget || self.step >= self.config.horizon,
        }
    }

    /// `R_i = r_i − λ⟨C e_i, ∇Ψ⟩` at the current load, or zeros once the
    /// budget has been crossed.
    pub fn lagrangian_rewards(&self, costs: &CostMatrix) -> Result<Vec<f64>> {
        Ok(self.lagrangian_with_gradient(costs)?.0)
    }

    fn lagrangian_with_gradient(&self, costs: &CostMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        check_step(&self.config, costs)?;
        let g = self.potential.gradient(&self.potential_load(self.step))?;
        if self.stopped {
            return Ok((vec![0.0; self.config.n], g));
        }
        let lambda = self.params.lambda;
        let rewards = (0..self.config.n)
            .map(|i| costs.reward(i) - lambda * self.column_term(&g, costs.column(i)))
            .collect();
        Ok((rewards, g))
    }

    /// `⟨(B/T, c), g⟩` or `⟨c, g⟩`.
    fn column_term(&self, g: &[f64], column: &[f64]) -> f64 {
        match self.config.variant {
            BwkVariant::Adversarial => dot(column, g),
            BwkVariant::Stochastic => self.dummy_load(1) * g[0] + dot(column, &g[1..]),
        }
    }

    /// Plays one step.
    pub fn step(&mut self, costs: &CostMatrix) -> Result<(ActionDistribution, StepRecord)> {
        if self.step >= self.config.horizon {
            return Err(invalid_input!("step beyond horizon {}", self.config.horizon));
        }
        let (surrogate, g) = self.lagrangian_with_gradient(costs)?;
        let before = self.potential_load(self.step);
        let psi_before = self.potential.psi(&before);
        let null = self.config.null_action;

        let (play, action) = if self.stopped {
            (ActionDistribution::point_mass(self.config.n, null), None)
        } else {
            let play = self.learner.next_distribution();
            match self.config.feedback {
                Feedback::Full => (play, None),
                Feedback::Bandit => {
                    let i = play.sample(self.rng.gen::<f64>());
                    (play, Some(i))
                }
            }
        };
        let (incurred, reward) = match action {
            Some(i) => (costs.column(i).to_vec(), costs.reward(i)),
            None => (costs.product(play.probabilities()), costs.reward_of(play.probabilities())),
        };
        let linear_term = self.column_term(&g, &incurred);

        if !self.stopped {
            let m = self.params.reward_bound;
            let to_loss = |r: f64| ((m - r) / (2.0 * m)).clamp(0.0, 1.0);
            match action {
                None => {
                    let losses: Vec<f64> = surrogate.iter().map(|&r| to_loss(r)).collect();
                    self.learner.update_full(&losses)?;
                }
                Some(i) => {
                    let p = play.probabilities()[i];
                    self.learner.update_bandit(i, to_loss(surrogate[i]), p)?;
                }
            }
            self.total_reward += reward;
        }
        for (l, c) in self.load.iter_mut().zip(&incurred) {
            *l += c;
        }
        self.step += 1;
        let psi_after = self.potential.psi(&self.potential_load(self.step));
        let accrued = if self.stopped { 0.0 } else { reward };
        if !self.stopped && self.over_budget() {
            self.stopped = true;
            self.stop_time = Some(self.step);
        }

        let record = StepRecord {
            t: self.step,
            play: play.probabilities().to_vec(),
            action,
            incurred,
            reward: accrued,
            surrogate,
            linear_term,
            psi_before,
            psi_after,
            epsilon: self.params.epsilon,
            phase: 0,
            gradient: self.config.diagnostics.then_some(g),
            costs: self.config.diagnostics.then(|| costs.clone()),
        };
        Ok((play, record))
    }
}

fn check_step(config: &BwkConfig, costs: &CostMatrix) -> Result<()> {
    if costs.d() != config.d || costs.n() != config.n {
        return Err(invalid_input!(
            "cost matrix is {}×{}, expected {}×{}",
            costs.d(),
            costs.n(),
            config.d,
            config.n
        ));
    }
    if costs.rewards().is_none() {
        return Err(invalid_input!("knapsack steps need a reward row"));
    }
    let null = config.null_action;
    if costs.reward(null) != 0.0 || costs.column(null).iter().any(|&c| c != 0.0) {
        return Err(invalid_input!("null action {null} has nonzero cost or reward"));
    }
    Ok(())
}

/// The Lagrangian rewards of one step at the state's current load.
pub fn lagrangian_rewards(state: &BwkState, costs: &CostMatrix) -> Result<Vec<f64>> {
    state.lagrangian_rewards(costs)
}

pub fn bwk_step(state: &mut BwkState, costs: &CostMatrix) -> Result<(ActionDistribution, StepRecord)> {
    state.step(costs)
}

fn check_env<E: Environment + ?Sized>(config: &BwkConfig, env: &E) -> Result<()> {
    if env.dimensions() != config.d || env.actions() != config.n {
        return Err(invalid_config!(
            "environment is {}×{}, configuration expects {}×{}",
            env.dimensions(),
            env.actions(),
            config.d,
            config.n
        ));
    }
    Ok(())
}

fn run_with<E: Environment + ?Sized>(
    config: &BwkConfig,
    params: BwkParams,
    env: &mut E,
    seed: u64,
    phase: usize,
) -> Result<RunTrace> {
    check_env(config, env)?;
    let mut state = BwkState::new(config, params, seed)?;
    let mut history: Vec<ActionDistribution> = Vec::with_capacity(config.horizon);
    let mut records = Vec::with_capacity(config.horizon);
    for t in 0..config.horizon {
        let costs = env
            .next_step(&history)
            .ok_or(Error::EnvironmentExhausted { steps: t, horizon: config.horizon })?;
        let (play, mut record) = state.step(&costs)?;
        record.phase = phase;
        history.push(play);
        records.push(record);
    }
    Ok(RunTrace::assemble(
        config.p,
        config.d,
        config.n,
        config.horizon,
        Objective::Reward,
        records,
        state.stop_time,
    ))
}

/// Runs the known-OPT algorithm.
pub fn run_bwk<E: Environment + ?Sized>(config: &BwkConfig, env: &mut E, seed: u64) -> Result<RunTrace> {
    run_with(config, config.params()?, env, seed, 0)
}

/// Number of OPT buckets `⌈log₂ T⌉`.
pub fn bucket_count(horizon: usize) -> usize {
    (usize::BITS - (horizon.max(2) - 1).leading_zeros()) as usize
}

/// Runs with the OPT guess `2^bucket`; records carry the bucket as phase.
pub fn run_bwk_bucket<E: Environment + ?Sized>(config: &BwkConfig, env: &mut E, seed: u64, bucket: usize) -> Result<RunTrace> {
    if config.horizon < 2 {
        return Err(invalid_config!("guessing needs T ≥ 2"));
    }
    if bucket >= bucket_count(config.horizon) {
        return Err(invalid_config!("bucket {bucket} out of range"));
    }
    let params = config.params_for(libm::exp2(bucket as f64))?;
    run_with(config, params, env, seed, bucket)
}

/// Draws a bucket uniformly from the run's stream and runs with its guess.
pub fn run_bwk_guessing<E: Environment + ?Sized>(config: &BwkConfig, env: &mut E, seed: u64) -> Result<RunTrace> {
    if config.horizon < 2 {
        return Err(invalid_config!("guessing needs T ≥ 2"));
    }
    let bucket = rng::stream(seed, rng::label::BUCKET).gen_range(0..bucket_count(config.horizon));
    run_bwk_bucket(config, env, seed, bucket)
}
