//! Per-step records of a run and the summary derived from them.

use alloc::vec;
use alloc::vec::Vec;

use crate::environment::CostMatrix;
use crate::potential::{norm_of, Exponent};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Objective {
    /// Load minimisation; surrogate entries are costs.
    Load,
    /// Reward maximisation; surrogate entries are Lagrangian rewards.
    Reward,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based step index.
    pub t: usize,
    /// The distribution the algorithm played.
    pub play: Vec<f64>,
    /// The sampled action under bandit feedback.
    pub action: Option<usize>,
    /// Cost vector added to the real load (`C x`, or the sampled column).
    pub incurred: Vec<f64>,
    pub reward: f64,
    /// Per-action surrogate costs (or Lagrangian rewards).
    pub surrogate: Vec<f64>,
    /// `⟨incurred, ∇Ψ⟩` at the load before the step, on the potential's own
    /// coordinates.
    pub linear_term: f64,
    pub psi_before: f64,
    pub psi_after: f64,
    pub epsilon: f64,
    /// Doubling phase (or 0).
    pub phase: usize,
    /// Gradient used for the step, kept only with diagnostics on.
    pub gradient: Option<Vec<f64>>,
    /// The step's cost matrix, kept only with diagnostics on.
    pub costs: Option<CostMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_load: Vec<f64>,
    pub final_norm: f64,
    pub total_reward: f64,
    pub stop_time: Option<usize>,
    /// Surrogate-game regret of the plays against the best fixed action.
    pub regret_empirical: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub p: Exponent,
    pub d: usize,
    pub n: usize,
    pub horizon: usize,
    pub objective: Objective,
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

impl RunTrace {
    pub(crate) fn assemble(
        p: Exponent,
        d: usize,
        n: usize,
        horizon: usize,
        objective: Objective,
        records: Vec<StepRecord>,
        stop_time: Option<usize>,
    ) -> Self {
        let mut trace = Self {
            p,
            d,
            n,
            horizon,
            objective,
            records,
            summary: RunSummary {
                steps: 0,
                final_load: Vec::new(),
                final_norm: 0.0,
                total_reward: 0.0,
                stop_time,
                regret_empirical: 0.0,
            },
        };
        trace.summary = trace.recompute_summary();
        trace
    }

    /// Rebuilds the summary from the per-step records alone.
    pub fn recompute_summary(&self) -> RunSummary {
        let mut load = vec![0.0; self.d];
        let mut total_reward = 0.0;
        let mut cumulative = vec![0.0; self.n];
        let mut played = 0.0;
        for r in &self.records {
            for (l, c) in load.iter_mut().zip(&r.incurred) {
                *l += c;
            }
            total_reward += r.reward;
            for (s, c) in cumulative.iter_mut().zip(&r.surrogate) {
                *s += c;
            }
            played += r.play.iter().zip(&r.surrogate).map(|(x, c)| x * c).sum::<f64>();
        }
        let regret = match self.objective {
            Objective::Load => played - cumulative.iter().copied().fold(f64::INFINITY, f64::min),
            Objective::Reward => cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max) - played,
        };
        RunSummary {
            steps: self.records.len(),
            final_norm: norm_of(self.p, &load),
            final_load: load,
            total_reward,
            stop_time: self.summary.stop_time,
            regret_empirical: if self.records.is_empty() { 0.0 } else { regret },
        }
    }

    /// Whether gradients and cost matrices were retained.
    pub fn has_diagnostics(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.gradient.is_some() && r.costs.is_some())
    }

    /// Average play over all steps.
    pub fn average_play(&self) -> Vec<f64> {
        let mut avg = vec![0.0; self.n];
        for r in &self.records {
            for (a, x) in avg.iter_mut().zip(&r.play) {
                *a += x;
            }
        }
        let len = self.records.len().max(1) as f64;
        avg.iter_mut().for_each(|a| *a /= len);
        avg
    }
}
