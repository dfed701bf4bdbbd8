//! Cost-matrix environments: i.i.d. stochastic instances, the phased-halving
//! lower-bound adversary (plain and with rewards), the greedy trap and replay
//! of stored sequences.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid_input, Result};
use crate::learner::ActionDistribution;
use crate::potential::Exponent;
use crate::rng::{self, Stream};

/// A `d × n` cost matrix with entries in `[0, 1]`, stored column by column,
/// plus an optional reward per action.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    d: usize,
    n: usize,
    entries: Vec<f64>,
    rewards: Option<Vec<f64>>,
}

impl CostMatrix {
    /// `entries[i * d + j]` is the cost of action `i` on dimension `j`.
    pub fn new(d: usize, n: usize, entries: Vec<f64>, rewards: Option<Vec<f64>>) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(invalid_input!("cost matrix needs d ≥ 1 and n ≥ 1"));
        }
        if entries.len() != d * n {
            return Err(invalid_input!("expected {} cost entries, got {}", d * n, entries.len()));
        }
        if let Some(pos) = entries.iter().position(|c| !(0.0..=1.0).contains(c)) {
            return Err(invalid_input!(
                "cost {} for action {} dimension {} lies outside [0, 1]",
                entries[pos],
                pos / d,
                pos % d
            ));
        }
        if let Some(r) = &rewards {
            if r.len() != n {
                return Err(invalid_input!("expected {n} rewards, got {}", r.len()));
            }
            if let Some(i) = r.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid_input!("reward {} for action {i} lies outside [0, 1]", r[i]));
            }
        }
        Ok(Self { d, n, entries, rewards })
    }

    pub fn zeros(d: usize, n: usize) -> Self {
        Self { d, n, entries: vec![0.0; d * n], rewards: None }
    }

    /// Builds from columns, one per action.
    pub fn from_columns(columns: &[Vec<f64>], rewards: Option<Vec<f64>>) -> Result<Self> {
        let n = columns.len();
        let d = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != d) {
            return Err(invalid_input!("columns have unequal lengths"));
        }
        Self::new(d, n, columns.concat(), rewards)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, dim: usize, action: usize) -> f64 {
        self.entries[action * self.d + dim]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rewards(&self) -> Option<&[f64]> {
        self.rewards.as_deref()
    }

    pub fn reward(&self, i: usize) -> f64 {
        self.rewards.as_ref().map_or(0.0, |r| r[i])
    }

    /// Accumulates `C x` into `out`.
    pub fn add_product(&self, x: &[f64], out: &mut [f64]) {
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &c) in out.iter_mut().zip(self.column(i)) {
                *o += c * xi;
            }
        }
    }

    pub fn product(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.add_product(x, &mut out);
        out
    }

    /// `⟨r, x⟩`, zero without rewards.
    pub fn reward_of(&self, x: &[f64]) -> f64 {
        self.rewards.as_ref().map_or(0.0, |r| r.iter().zip(x).map(|(a, b)| a * b).sum())
    }
}

/// A source of per-step cost matrices.
///
/// `history` holds the plays of all earlier steps, never the current one.
pub trait Environment {
    fn dimensions(&self) -> usize;
    fn actions(&self) -> usize;
    /// Number of steps the environment can emit.
    fn horizon(&self) -> usize;
    fn has_rewards(&self) -> bool {
        false
    }
    /// Index of the zero-cost, zero-reward action, if one is designated.
    fn null_action(&self) -> Option<usize> {
        None
    }
    fn next_step(&mut self, history: &[ActionDistribution]) -> Option<CostMatrix>;
}

impl<E: Environment + ?Sized> Environment for alloc::boxed::Box<E> {
    fn dimensions(&self) -> usize {
        (**self).dimensions()
    }
    fn actions(&self) -> usize {
        (**self).actions()
    }
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn has_rewards(&self) -> bool {
        (**self).has_rewards()
    }
    fn null_action(&self) -> Option<usize> {
        (**self).null_action()
    }
    fn next_step(&mut self, history: &[ActionDistribution]) -> Option<CostMatrix> {
        (**self).next_step(history)
    }
}

/// Draws `steps` matrices from an environment that ignores the history.
pub fn record<E: Environment + ?Sized>(env: &mut E, steps: usize) -> Vec<CostMatrix> {
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        match env.next_step(&[]) {
            Some(m) => out.push(m),
            None => break,
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Stochastic

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum CellDist {
    Bernoulli { q: f64 },
    Uniform { a: f64, b: f64 },
    Constant { v: f64 },
}

impl CellDist {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CellDist::Bernoulli { q } => (0.0..=1.0).contains(&q),
            CellDist::Uniform { a, b } => 0.0 <= a && a <= b && b <= 1.0,
            CellDist::Constant { v } => (0.0..=1.0).contains(&v),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid_input!("distribution {self:?} has support outside [0, 1]"))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CellDist::Bernoulli { q } => q,
            CellDist::Uniform { a, b } => 0.5 * (a + b),
            CellDist::Constant { v } => v,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CellDist::Bernoulli { q } => {
                if rng.gen::<f64>() < q {
                    1.0
                } else {
                    0.0
                }
            }
            CellDist::Uniform { a, b } => {
                let u: f64 = rng.gen();
                (a + (b - a) * u).min(b)
            }
            CellDist::Constant { v } => v,
        }
    }
}

/// Per-cell distributions of an i.i.d. environment. `costs[i * d + j]` is the
/// distribution of action `i` on dimension `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticSpec {
    d: usize,
    n: usize,
    costs: Vec<CellDist>,
    rewards: Option<Vec<CellDist>>,
}

impl StochasticSpec {
    pub fn new(d: usize, n: usize, costs: Vec<CellDist>, rewards: Option<Vec<CellDist>>) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(invalid_input!("stochastic spec needs d ≥ 1 and n ≥ 1"));
        }
        if costs.len() != d * n {
            return Err(invalid_input!("expected {} cost cells, got {}", d * n, costs.len()));
        }
        for c in &costs {
            c.validate()?;
        }
        if let Some(r) = &rewards {
            if r.len() != n {
                return Err(invalid_input!("expected {n} reward cells, got {}", r.len()));
            }
            for c in r {
                c.validate()?;
            }
        }
        Ok(Self { d, n, costs, rewards })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn costs(&self) -> &[CellDist] {
        &self.costs
    }

    pub fn reward_cells(&self) -> Option<&[CellDist]> {
        self.rewards.as_deref()
    }

    pub fn mean_matrix(&self) -> CostMatrix {
        CostMatrix {
            d: self.d,
            n: self.n,
            entries: self.costs.iter().map(CellDist::mean).collect(),
            rewards: self.rewards.as_ref().map(|r| r.iter().map(CellDist::mean).collect()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CostMatrix {
        let entries = self.costs.iter().map(|c| c.sample(rng)).collect();
        let rewards = self.rewards.as_ref().map(|r| r.iter().map(|c| c.sample(rng)).collect());
        CostMatrix { d: self.d, n: self.n, entries, rewards }
    }

    /// An action whose every cell is the constant 0, if any.
    pub fn null_action(&self) -> Option<usize> {
        let zero = |c: &CellDist| matches!(c, CellDist::Constant { v } if *v == 0.0);
        (0..self.n).rev().find(|&i| {
            self.costs[i * self.d..(i + 1) * self.d].iter().all(zero)
                && self.rewards.as_ref().map_or(true, |r| zero(&r[i]))
        })
    }
}

pub struct StochasticEnv {
    spec: StochasticSpec,
    horizon: usize,
    step: usize,
    rng: Stream,
}

impl StochasticEnv {
    pub fn new(spec: StochasticSpec, horizon: usize, seed: u64) -> Self {
        Self { spec, horizon, step: 0, rng: rng::stream(seed, rng::label::ENVIRONMENT) }
    }

    pub fn spec(&self) -> &StochasticSpec {
        &self.spec
    }
}

impl Environment for StochasticEnv {
    fn dimensions(&self) -> usize {
        self.spec.d
    }
    fn actions(&self) -> usize {
        self.spec.n
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn has_rewards(&self) -> bool {
        self.spec.rewards.is_some()
    }
    fn null_action(&self) -> Option<usize> {
        self.spec.rewards.as_ref().and(self.spec.null_action())
    }
    fn next_step(&mut self, _history: &[ActionDistribution]) -> Option<CostMatrix> {
        if self.step >= self.horizon {
            return None;
        }
        self.step += 1;
        Some(self.spec.sample(&mut self.rng))
    }
}

// ---------------------------------------------------------------------------
// Phased halving

/// The lower-bound adversary: `k` phases of `L` steps over `d = 2^m`
/// dimensions and `2^k` actions. In phase `i` (1-based) action `a` puts unit
/// load on the top half of the active block when bit `i` of `a` is 0, the
/// bottom half when it is 1. At the end of phase `i` a coin `R_i` deactivates
/// the top half (`R_i = 0`) or the bottom half (`R_i = 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct PhasedHalvingSpec {
    d: usize,
    p: Exponent,
    horizon: usize,
    k: usize,
    block_len: usize,
}

impl PhasedHalvingSpec {
    pub fn new(d: usize, p: Exponent, horizon: usize) -> Result<Self> {
        if d < 2 || !d.is_power_of_two() {
            return Err(invalid_input!("phased halving needs d a power of two ≥ 2, got {d}"));
        }
        let log_d = d.trailing_zeros() as usize;
        let k = match p {
            Exponent::Infinity => log_d,
            Exponent::Finite(p) => (libm::floor(p) as usize).clamp(1, log_d),
        };
        if horizon < k {
            return Err(invalid_input!("horizon {horizon} is shorter than the {k} phases"));
        }
        Ok(Self { d, p, horizon, k, block_len: horizon / k })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn phases(&self) -> usize {
        self.k
    }

    /// `L = ⌊T/k⌋`.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn actions(&self) -> usize {
        1 << self.k
    }

    pub fn coins(&self, seed: u64) -> Vec<bool> {
        let mut rng = rng::stream(seed, rng::label::ENVIRONMENT);
        (0..self.k).map(|_| rng.gen::<bool>()).collect()
    }

    /// The action whose bits equal the coins.
    pub fn benchmark_action(coins: &[bool]) -> usize {
        coins.iter().enumerate().map(|(i, &c)| usize::from(c) << i).sum()
    }

    /// Active block `[lo, hi)` during each phase, followed by the block that
    /// stays active after the last phase.
    pub fn active_blocks(&self, coins: &[bool]) -> Vec<(usize, usize)> {
        let (mut lo, mut hi) = (0, self.d);
        let mut out = Vec::with_capacity(self.k + 1);
        for &c in coins {
            out.push((lo, hi));
            let mid = (lo + hi) / 2;
            if c {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push((lo, hi));
        out
    }

    /// Total load the fixed action `a` receives over the whole horizon.
    pub fn fixed_action_load(&self, coins: &[bool], a: usize) -> Vec<u64> {
        let mut load = vec![0u64; self.d];
        for (i, &(lo, hi)) in self.active_blocks(coins).iter().take(self.k).enumerate() {
            let mid = (lo + hi) / 2;
            let (a0, a1) = if (a >> i) & 1 == 0 { (lo, mid) } else { (mid, hi) };
            for l in &mut load[a0..a1] {
                *l += self.block_len as u64;
            }
        }
        load
    }
}

pub struct PhasedHalvingEnv {
    spec: PhasedHalvingSpec,
    coins: Vec<bool>,
    blocks: Vec<(usize, usize)>,
    with_rewards: bool,
    step: usize,
}

impl PhasedHalvingEnv {
    pub fn new(spec: PhasedHalvingSpec, seed: u64) -> Self {
        Self::build(spec, seed, false)
    }

    /// Reward variant: every non-null action earns 1 during the phases and an
    /// extra null action (the last index) earns nothing and costs nothing.
    pub fn with_rewards(spec: PhasedHalvingSpec, seed: u64) -> Self {
        Self::build(spec, seed, true)
    }

    fn build(spec: PhasedHalvingSpec, seed: u64, with_rewards: bool) -> Self {
        let coins = spec.coins(seed);
        let blocks = spec.active_blocks(&coins);
        Self { spec, coins, blocks, with_rewards, step: 0 }
    }

    pub fn spec(&self) -> &PhasedHalvingSpec {
        &self.spec
    }

    pub fn coins(&self) -> &[bool] {
        &self.coins
    }

    pub fn benchmark_action(&self) -> usize {
        PhasedHalvingSpec::benchmark_action(&self.coins)
    }

    fn matrix(&self, t: usize) -> CostMatrix {
        let (d, base) = (self.spec.d, self.spec.actions());
        let n = self.actions();
        let phase = t / self.spec.block_len;
        let mut entries = vec![0.0; d * n];
        let mut rewards = self.with_rewards.then(|| vec![0.0; n]);
        if phase < self.spec.k {
            let (lo, hi) = self.blocks[phase];
            let mid = (lo + hi) / 2;
            for a in 0..base {
                let (a0, a1) = if (a >> phase) & 1 == 0 { (lo, mid) } else { (mid, hi) };
                for c in &mut entries[a * d + a0..a * d + a1] {
                    *c = 1.0;
                }
            }
            if let Some(r) = rewards.as_mut() {
                r[..base].fill(1.0);
            }
        }
        CostMatrix { d, n, entries, rewards }
    }
}

impl Environment for PhasedHalvingEnv {
    fn dimensions(&self) -> usize {
        self.spec.d
    }
    fn actions(&self) -> usize {
        self.spec.actions() + usize::from(self.with_rewards)
    }
    fn horizon(&self) -> usize {
        self.spec.horizon
    }
    fn has_rewards(&self) -> bool {
        self.with_rewards
    }
    fn null_action(&self) -> Option<usize> {
        self.with_rewards.then(|| self.spec.actions())
    }
    fn next_step(&mut self, _history: &[ActionDistribution]) -> Option<CostMatrix> {
        if self.step >= self.spec.horizon {
            return None;
        }
        let m = self.matrix(self.step);
        self.step += 1;
        Some(m)
    }
}

// ---------------------------------------------------------------------------
// Greedy trap

/// Two actions: action 0 puts `1 − gap` on every dimension, action 1 puts a
/// unit on one dimension drawn uniformly afresh each step.
pub struct GreedyTrapEnv {
    d: usize,
    gap: f64,
    horizon: usize,
    step: usize,
    rng: Stream,
}

impl GreedyTrapEnv {
    pub fn new(d: usize, load_gap: f64, horizon: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(invalid_input!("greedy trap needs d ≥ 1"));
        }
        if !(load_gap > 0.0 && load_gap < 0.5) {
            return Err(invalid_input!("load gap must lie in (0, 0.5), got {load_gap}"));
        }
        Ok(Self { d, gap: load_gap, horizon, step: 0, rng: rng::stream(seed, rng::label::ENVIRONMENT) })
    }
}

impl Environment for GreedyTrapEnv {
    fn dimensions(&self) -> usize {
        self.d
    }
    fn actions(&self) -> usize {
        2
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn next_step(&mut self, _history: &[ActionDistribution]) -> Option<CostMatrix> {
        if self.step >= self.horizon {
            return None;
        }
        self.step += 1;
        let d = self.d;
        let mut entries = vec![1.0 - self.gap; 2 * d];
        entries[d..].fill(0.0);
        let j = self.rng.gen_range(0..d);
        entries[d + j] = 1.0;
        Some(CostMatrix { d, n: 2, entries, rewards: None })
    }
}

// ---------------------------------------------------------------------------
// Replay

#[derive(Clone, Debug)]
pub struct TraceEnv {
    d: usize,
    n: usize,
    steps: Vec<CostMatrix>,
    pos: usize,
}

impl TraceEnv {
    pub fn new(d: usize, n: usize, steps: Vec<CostMatrix>) -> Result<Self> {
        if let Some(t) = steps.iter().position(|m| m.d != d || m.n != n) {
            return Err(invalid_input!("step {} has shape {}×{}, expected {d}×{n}", t + 1, steps[t].d, steps[t].n));
        }
        let with_rewards = steps.first().map(|m| m.rewards.is_some());
        if steps.iter().any(|m| Some(m.rewards.is_some()) != with_rewards) {
            return Err(invalid_input!("either every step or no step carries rewards"));
        }
        Ok(Self { d, n, steps, pos: 0 })
    }

    pub fn from_steps(steps: Vec<CostMatrix>) -> Result<Self> {
        let (d, n) = steps.first().map_or((1, 1), |m| (m.d, m.n));
        Self::new(d, n, steps)
    }

    pub fn steps(&self) -> &[CostMatrix] {
        &self.steps
    }

    pub fn rewind(&mut self) {
        self.pos = 0;
    }
}

impl Environment for TraceEnv {
    fn dimensions(&self) -> usize {
        self.d
    }
    fn actions(&self) -> usize {
        self.n
    }
    fn horizon(&self) -> usize {
        self.steps.len()
    }
    fn has_rewards(&self) -> bool {
        self.steps.first().is_some_and(|m| m.rewards.is_some())
    }
    fn null_action(&self) -> Option<usize> {
        if !self.has_rewards() {
            return None;
        }
        (0..self.n).rev().find(|&i| {
            self.steps.iter().all(|m| m.reward(i) == 0.0 && m.column(i).iter().all(|&c| c == 0.0))
        })
    }
    fn next_step(&mut self, _history: &[ActionDistribution]) -> Option<CostMatrix> {
        let m = self.steps.get(self.pos)?.clone();
        self.pos += 1;
        Some(m)
    }
}
