//! Unsmoothed greedy baseline: each step it sees the cost matrix and plays
//! the pure action along which `‖Λ‖_p` grows slowest.

use alloc::vec::Vec;

use crate::environment::{CostMatrix, Environment};
use crate::error::{invalid_config, Error, Result};
use crate::learner::ActionDistribution;
use crate::potential::{norm_of, Exponent};
use crate::trace::{Objective, RunTrace, StepRecord};

/// One-sided directional derivative of `‖·‖_p` at `load` along `c`.
pub fn directional_derivative(p: Exponent, load: &[f64], c: &[f64]) -> f64 {
    let m = load.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return norm_of(p, c);
    }
    match p {
        Exponent::Infinity => load
            .iter()
            .zip(c)
            .filter(|(&l, _)| l >= m * (1.0 - 1e-12))
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max),
        Exponent::Finite(q) if q == 1.0 => c.iter().sum(),
        Exponent::Finite(q) => {
            let norm = norm_of(p, load);
            load.iter().zip(c).map(|(&l, &v)| if l > 0.0 { libm::pow(l / norm, q - 1.0) * v } else { 0.0 }).sum()
        }
    }
}

/// Per-action directional derivatives; the greedy plays the smallest, ties
/// to the lowest index.
pub fn greedy_scores(p: Exponent, load: &[f64], costs: &CostMatrix) -> Vec<f64> {
    (0..costs.n()).map(|i| directional_derivative(p, load, costs.column(i))).collect()
}

pub fn naive_baseline<E: Environment + ?Sized>(env: &mut E, p: Exponent, horizon: usize) -> Result<RunTrace> {
    let (d, n) = (env.dimensions(), env.actions());
    if horizon > env.horizon() {
        return Err(invalid_config!("horizon {horizon} exceeds the environment's {}", env.horizon()));
    }
    let mut load = alloc::vec![0.0; d];
    let mut history = Vec::with_capacity(horizon);
    let mut records = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let costs = env.next_step(&history).ok_or(Error::EnvironmentExhausted { steps: t, horizon })?;
        let scores = greedy_scores(p, &load, &costs);
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s < scores[best] {
                best = i;
            }
        }
        let play = ActionDistribution::point_mass(n, best);
        let incurred = costs.column(best).to_vec();
        let before = norm_of(p, &load);
        for (l, c) in load.iter_mut().zip(&incurred) {
            *l += c;
        }
        records.push(StepRecord {
            t: t + 1,
            play: play.probabilities().to_vec(),
            action: Some(best),
            incurred,
            reward: costs.rewards().map_or(0.0, |r| r[best]),
            linear_term: scores[best],
            surrogate: scores,
            psi_before: before,
            psi_after: norm_of(p, &load),
            epsilon: 0.0,
            phase: 0,
            gradient: None,
            costs: None,
        });
        history.push(play);
    }
    Ok(RunTrace::assemble(p, d, n, horizon, Objective::Load, records, None))
}
