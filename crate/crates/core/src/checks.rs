//! Per-run inequality checks on recorded traces.

use alloc::vec;

use crate::potential::ones_norm;
use crate::trace::{Objective, RunTrace};

/// `Ψ(Λ+z) − Ψ(Λ) ≤ (1+ε)⟨z, ∇Ψ(Λ)⟩` on every step.
pub fn step_increments(trace: &RunTrace) -> bool {
    trace.records.iter().all(|r| {
        let slack = 1e-9 * (1.0 + r.psi_after.abs());
        r.psi_after - r.psi_before <= (1.0 + r.epsilon) * r.linear_term + slack
    })
}

/// The per-step bound summed over each smoothing phase:
/// `Ψ(Λ_end) − Ψ(Λ_start) ≤ (1+ε) Σ_t ⟨z_t, ∇Ψ_t⟩ + 1e-6·T`.
pub fn telescoped(trace: &RunTrace) -> bool {
    let slack = 1e-6 * trace.records.len() as f64;
    let mut i = 0;
    while i < trace.records.len() {
        let phase = trace.records[i].phase;
        let start = i;
        let mut linear = 0.0;
        while i < trace.records.len() && trace.records[i].phase == phase {
            linear += trace.records[i].linear_term;
            i += 1;
        }
        let first = &trace.records[start];
        let last = &trace.records[i - 1];
        if last.psi_after - first.psi_before > (1.0 + first.epsilon) * linear + slack {
            return false;
        }
    }
    true
}

/// Surrogate costs lie in `[0, ‖1‖_p]` up to `1e-12`.
pub fn surrogate_range(trace: &RunTrace) -> bool {
    let top = ones_norm(trace.p, trace.d);
    trace.records.iter().all(|r| r.surrogate.iter().all(|&c| (-1e-12..=top + 1e-12).contains(&c)))
}

/// Every Lagrangian reward satisfies `|R_i| ≤ bound + 1e-9`.
pub fn reward_range(trace: &RunTrace, bound: f64) -> bool {
    trace.objective == Objective::Reward
        && trace.records.iter().all(|r| r.surrogate.iter().all(|&v| v.abs() <= bound + 1e-9))
}

/// No reward after the budget was crossed, and the final norm exceeds the
/// budget by at most one step's worth, `‖1‖_p`.
pub fn budget_safety(trace: &RunTrace, budget: f64) -> bool {
    let mut load = vec![0.0; trace.d];
    let mut crossed = false;
    for r in &trace.records {
        if crossed && r.reward != 0.0 {
            return false;
        }
        for (l, c) in load.iter_mut().zip(&r.incurred) {
            *l += c;
        }
        if crate::potential::norm_of(trace.p, &load) > budget {
            crossed = true;
        }
    }
    let stop = trace.summary.stop_time.unwrap_or(trace.records.len());
    let mut at_stop = vec![0.0; trace.d];
    for r in &trace.records[..stop] {
        for (l, c) in at_stop.iter_mut().zip(&r.incurred) {
            *l += c;
        }
    }
    crate::potential::norm_of(trace.p, &at_stop) <= budget + ones_norm(trace.p, trace.d) + 1e-9
}

/// The summary's load equals the re-summed per-step contributions.
pub fn load_accounting(trace: &RunTrace) -> bool {
    let fresh = trace.recompute_summary();
    fresh
        .final_load
        .iter()
        .zip(&trace.summary.final_load)
        .all(|(a, b)| (a - b).abs() <= 1e-9)
}
