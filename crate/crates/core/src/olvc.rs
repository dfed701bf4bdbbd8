//! Online learning with vector costs: every step the learner's play is
//! charged the surrogate cost `c_i = ⟨C e_i, ∇Ψ(Λ)⟩` of each action, and the
//! real load `Λ` grows by the incurred cost vector.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::environment::{CostMatrix, Environment};
use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::learner::{ActionDistribution, Feedback, LearnerState};
use crate::potential::{norm_of, ones_norm, smoothing_width, Exponent, NormParams};
use crate::rng::{self, Stream};
use crate::trace::{Objective, RunTrace, StepRecord};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "rule", rename_all = "snake_case"))]
pub enum EpsilonRule {
    Explicit { epsilon: f64 },
    /// `ε = min{1, ‖1‖_p / (5·OPT)}`.
    AdversarialFromOpt { opt: f64 },
    /// Unknown OPT: phase `i` guesses `2^i` and restarts once its own load
    /// exceeds `c·κ·2^i`.
    Doubling { growth: f64 },
    /// `ε = min{1, √(p(‖1‖_p − 1) / (‖1‖_p √T))}`.
    StochasticDefault,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OlvcConfig {
    pub p: Exponent,
    pub d: usize,
    pub n: usize,
    pub horizon: usize,
    pub feedback: Feedback,
    pub epsilon_rule: EpsilonRule,
    /// Failure probability of the bandit learner's schedule.
    #[cfg_attr(feature = "serde", serde(default = "default_failure_prob"))]
    pub failure_prob: f64,
    /// Keep per-step gradients and cost matrices.
    #[cfg_attr(feature = "serde", serde(default))]
    pub diagnostics: bool,
}

#[cfg(feature = "serde")]
fn default_failure_prob() -> f64 {
    0.05
}

/// `min{1, ‖1‖_p / (5·opt)}`.
pub fn adversarial_epsilon(p: Exponent, d: usize, opt: f64) -> Result<f64> {
    if !(opt.is_finite() && opt > 0.0) {
        return Err(invalid_config!("OPT guess must be positive and finite, got {opt}"));
    }
    Ok((ones_norm(p, d) / (5.0 * opt)).min(1.0))
}

/// `min{1, √(p(‖1‖_p − 1) / (‖1‖_p √T))}`, falling back to 1 when `d = 1`
/// makes the formula vanish.
pub fn stochastic_epsilon(p: Exponent, d: usize, horizon: usize) -> f64 {
    let width = smoothing_width(p, d);
    if width <= 0.0 {
        return 1.0;
    }
    libm::sqrt(width / (ones_norm(p, d) * libm::sqrt(horizon as f64))).min(1.0)
}

/// Growth base of the doubling threshold: `p`, or `log₂ d + 1` for `p = ∞`.
pub fn doubling_kappa(p: Exponent, d: usize) -> f64 {
    match p {
        Exponent::Finite(p) => p,
        Exponent::Infinity => libm::log2(d as f64) + 1.0,
    }
}

impl OlvcConfig {
    pub fn new(p: Exponent, d: usize, n: usize, horizon: usize, feedback: Feedback, epsilon_rule: EpsilonRule) -> Self {
        Self { p, d, n, horizon, feedback, epsilon_rule, failure_prob: 0.05, diagnostics: false }
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(invalid_config!("need d ≥ 1 and n ≥ 1"));
        }
        if self.horizon == 0 {
            return Err(invalid_config!("horizon must be positive"));
        }
        if let EpsilonRule::Doubling { growth } = self.epsilon_rule {
            if !(growth >= 1.0 && growth.is_finite()) {
                return Err(invalid_config!("doubling growth constant must be ≥ 1, got {growth}"));
            }
        }
        if let EpsilonRule::Explicit { epsilon } = self.epsilon_rule {
            if !(epsilon > 0.0 && epsilon <= 1.0) {
                return Err(invalid_config!("ε must lie in (0, 1], got {epsilon}"));
            }
        }
        Ok(())
    }

    /// Smoothing for phase `phase` (ignored unless doubling).
    pub fn epsilon(&self, phase: usize) -> Result<f64> {
        match self.epsilon_rule {
            EpsilonRule::Explicit { epsilon } => Ok(epsilon),
            EpsilonRule::AdversarialFromOpt { opt } => adversarial_epsilon(self.p, self.d, opt),
            EpsilonRule::Doubling { .. } => adversarial_epsilon(self.p, self.d, libm::exp2(phase as f64)),
            EpsilonRule::StochasticDefault => Ok(stochastic_epsilon(self.p, self.d, self.horizon)),
        }
    }

    /// Load threshold ending doubling phase `phase`.
    pub fn phase_threshold(&self, phase: usize) -> Option<f64> {
        match self.epsilon_rule {
            EpsilonRule::Doubling { growth } => {
                Some(growth * doubling_kappa(self.p, self.d) * libm::exp2(phase as f64))
            }
            _ => None,
        }
    }
}

/// `c_i = ⟨C e_i, ∇Ψ(Λ)⟩` for every action.
pub fn surrogate_costs(norm: &NormParams, load: &[f64], costs: &CostMatrix) -> Result<Vec<f64>> {
    if costs.d() != norm.d {
        return Err(invalid_input!("cost matrix has {} rows, potential has {}", costs.d(), norm.d));
    }
    let g = norm.psi_gradient(load)?;
    Ok(costs_from_gradient(&g, costs))
}

pub(crate) fn costs_from_gradient(g: &[f64], costs: &CostMatrix) -> Vec<f64> {
    (0..costs.n()).map(|i| dot(costs.column(i), g)).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug)]
pub struct OlvcState {
    config: OlvcConfig,
    norm: NormParams,
    load: Vec<f64>,
    phase_load: Vec<f64>,
    learner: LearnerState,
    step: usize,
    phase: usize,
    rng: Stream,
}

impl OlvcState {
    pub fn new(config: &OlvcConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let phase = usize::from(matches!(config.epsilon_rule, EpsilonRule::Doubling { .. }));
        let norm = NormParams::new(config.p, config.d, config.epsilon(phase)?)?;
        Ok(Self {
            config: config.clone(),
            norm,
            load: vec![0.0; config.d],
            phase_load: vec![0.0; config.d],
            learner: new_learner(config)?,
            step: 0,
            phase,
            rng: rng::stream(seed, rng::label::ALGORITHM),
        })
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    /// The load the potential sees; differs from `load` only under doubling.
    pub fn phase_load(&self) -> &[f64] {
        &self.phase_load
    }

    pub fn phase_index(&self) -> usize {
        self.phase
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn norm_params(&self) -> &NormParams {
        &self.norm
    }

    pub fn learner(&self) -> &LearnerState {
        &self.learner
    }

    /// The play for the coming step.
    pub fn distribution(&self) -> ActionDistribution {
        self.learner.next_distribution()
    }

    /// Plays one step against `costs`, which must have been produced without
    /// knowledge of this step's play.
    pub fn step(&mut self, costs: &CostMatrix) -> Result<(ActionDistribution, StepRecord)> {
        if self.step >= self.config.horizon {
            return Err(invalid_input!("step beyond horizon {}", self.config.horizon));
        }
        if costs.d() != self.config.d || costs.n() != self.config.n {
            return Err(invalid_input!(
                "cost matrix is {}×{}, expected {}×{}",
                costs.d(),
                costs.n(),
                self.config.d,
                self.config.n
            ));
        }
        let play = self.learner.next_distribution();
        let g = self.norm.psi_gradient(&self.phase_load)?;
        let surrogate = costs_from_gradient(&g, costs);
        let psi_before = self.norm.psi_unchecked(&self.phase_load);
        let scale = self.norm.ones_norm();

        let (incurred, action) = match self.config.feedback {
            Feedback::Full => (costs.product(play.probabilities()), None),
            Feedback::Bandit => {
                let i = play.sample(self.rng.gen::<f64>());
                (costs.column(i).to_vec(), Some(i))
            }
        };
        let linear_term = dot(&incurred, &g);
        match action {
            None => {
                let losses: Vec<f64> = surrogate.iter().map(|c| c / scale).collect();
                self.learner.update_full(&losses)?;
            }
            Some(i) => {
                let p = play.probabilities()[i];
                self.learner.update_bandit(i, surrogate[i] / scale, p)?;
            }
        }
        for ((l, pl), c) in self.load.iter_mut().zip(self.phase_load.iter_mut()).zip(&incurred) {
            *l += c;
            *pl += c;
        }
        let psi_after = self.norm.psi_unchecked(&self.phase_load);
        self.step += 1;

        let record = StepRecord {
            t: self.step,
            play: play.probabilities().to_vec(),
            action,
            incurred,
            reward: 0.0,
            surrogate,
            linear_term,
            psi_before,
            psi_after,
            epsilon: self.norm.epsilon,
            phase: self.phase,
            gradient: self.config.diagnostics.then_some(g),
            costs: self.config.diagnostics.then(|| costs.clone()),
        };
        self.maybe_advance_phase()?;
        Ok((play, record))
    }

    fn maybe_advance_phase(&mut self) -> Result<()> {
        let Some(threshold) = self.config.phase_threshold(self.phase) else {
            return Ok(());
        };
        if norm_of(self.config.p, &self.phase_load) > threshold {
            self.phase += 1;
            self.phase_load.fill(0.0);
            self.norm = NormParams::new(self.config.p, self.config.d, self.config.epsilon(self.phase)?)?;
            self.learner = new_learner(&self.config)?;
        }
        Ok(())
    }
}

fn new_learner(config: &OlvcConfig) -> Result<LearnerState> {
    LearnerState::new(config.feedback, config.n, config.horizon, config.failure_prob)
}

/// One step of the algorithm.
pub fn olvc_step(state: &mut OlvcState, costs: &CostMatrix) -> Result<(ActionDistribution, StepRecord)> {
    state.step(costs)
}

fn check_env<E: Environment + ?Sized>(config: &OlvcConfig, env: &E) -> Result<()> {
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

/// Runs the algorithm for the configured horizon.
pub fn run_olvc<E: Environment + ?Sized>(config: &OlvcConfig, env: &mut E, seed: u64) -> Result<RunTrace> {
    check_env(config, env)?;
    let mut state = OlvcState::new(config, seed)?;
    let mut history: Vec<ActionDistribution> = Vec::with_capacity(config.horizon);
    let mut records = Vec::with_capacity(config.horizon);
    for t in 0..config.horizon {
        let costs = env
            .next_step(&history)
            .ok_or(Error::EnvironmentExhausted { steps: t, horizon: config.horizon })?;
        let (play, record) = state.step(&costs)?;
        history.push(play);
        records.push(record);
    }
    Ok(RunTrace::assemble(config.p, config.d, config.n, config.horizon, Objective::Load, records, None))
}

/// [`run_olvc`] for a configuration with the doubling rule.
pub fn run_olvc_doubling<E: Environment + ?Sized>(config: &OlvcConfig, env: &mut E, seed: u64) -> Result<RunTrace> {
    if !matches!(config.epsilon_rule, EpsilonRule::Doubling { .. }) {
        return Err(invalid_config!("doubling run needs the doubling ε rule"));
    }
    run_olvc(config, env, seed)
}

/// Checks, on a trace with diagnostics, that for the benchmark `x_star`
/// `Σ_t ⟨C x*, ∇Ψ_t⟩ ≤ (e^{ε OPT/‖1‖_p} − 1)·((1+ε) Σ_t ⟨C x_t, ∇Ψ_t⟩ + ‖1‖_p/ε)`
/// up to `1e-6·T`, with `OPT = ‖Σ_t C x*‖_p`.
pub fn benchmark_gradient_diagnostic(trace: &RunTrace, x_star: &ActionDistribution) -> Result<bool> {
    Ok(benchmark_gradient_sides(trace, x_star)?.holds(trace.records.len()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchmarkGradientSides {
    pub lhs: f64,
    pub rhs: f64,
    pub opt: f64,
}

impl BenchmarkGradientSides {
    pub fn holds(&self, steps: usize) -> bool {
        self.lhs <= self.rhs + 1e-6 * steps as f64
    }
}

pub fn benchmark_gradient_sides(trace: &RunTrace, x_star: &ActionDistribution) -> Result<BenchmarkGradientSides> {
    if !trace.has_diagnostics() {
        return Err(Error::Unsupported("trace was recorded without gradients"));
    }
    if x_star.len() != trace.n {
        return Err(invalid_input!("benchmark has {} actions, trace has {}", x_star.len(), trace.n));
    }
    let eps = trace.records[0].epsilon;
    if trace.records.iter().any(|r| r.epsilon != eps || r.phase != trace.records[0].phase) {
        return Err(Error::Unsupported("the inequality needs a single smoothing phase"));
    }
    let x = x_star.probabilities();
    let mut total = vec![0.0; trace.d];
    let (mut lhs, mut played) = (0.0, 0.0);
    for r in &trace.records {
        let (Some(c), Some(g)) = (&r.costs, &r.gradient) else { unreachable!() };
        let cx = c.product(x);
        lhs += dot(&cx, g);
        played += r.linear_term;
        for (t, v) in total.iter_mut().zip(&cx) {
            *t += v;
        }
    }
    let ones = ones_norm(trace.p, trace.d);
    let opt = norm_of(trace.p, &total);
    let rhs = libm::expm1(eps * opt / ones) * ((1.0 + eps) * played + ones / eps);
    Ok(BenchmarkGradientSides { lhs, rhs, opt })
}
