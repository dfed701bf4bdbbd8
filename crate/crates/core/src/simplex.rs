//! Dense two-phase simplex with Bland's rule, for the small linear programs
//! behind the `ℓ_1` and `ℓ_∞` benchmarks.
//!
//! Solves `max cᵀx` subject to `A_ub x ≤ b_ub`, `A_eq x = b_eq`, `x ≥ 0`
//! with `b_ub, b_eq ≥ 0`.

use alloc::vec;
use alloc::vec::Vec;

const TOL: f64 = 1e-10;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers of the `≤` rows.
    pub duals_ub: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
    /// Pivot limit reached.
    Stalled,
}

struct Tableau {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, obj: &mut [f64], r: usize, c: usize) {
        let w = self.cols + 1;
        let piv = self.a[r * w + c];
        for v in &mut self.a[r * w..(r + 1) * w] {
            *v /= piv;
        }
        let (before, rest) = self.a.split_at_mut(r * w);
        let (row, after) = rest.split_at_mut(w);
        for other in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = other[c];
            if f != 0.0 {
                for (o, &v) in other.iter_mut().zip(row.iter()) {
                    *o -= f * v;
                }
                other[c] = 0.0;
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (o, &v) in obj.iter_mut().zip(row.iter()) {
                *o -= f * v;
            }
            obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Reduced-cost row for `cost`; the last entry holds minus the value.
    fn objective_row(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj = vec![0.0; self.cols + 1];
        obj[..self.cols].copy_from_slice(cost);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (c, o) in obj.iter_mut().enumerate() {
                    *o -= cb * self.at(r, c);
                }
            }
        }
        obj
    }

    /// Runs Bland's rule until optimal. `Ok(false)` means unbounded.
    fn optimize(&mut self, obj: &mut [f64], allowed: impl Fn(usize) -> bool) -> Result<bool, ()> {
        for _ in 0..MAX_PIVOTS {
            let Some(c) = (0..self.cols).find(|&j| allowed(j) && obj[j] > TOL) else {
                return Ok(true);
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for r in 0..self.rows {
                let v = self.at(r, c);
                if v > TOL {
                    let ratio = self.rhs(r) / v;
                    let better = match best {
                        None => true,
                        Some((br, _, bb)) => ratio < br - TOL || (ratio <= br + TOL && self.basis[r] < bb),
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            match best {
                None => return Ok(false),
                Some((_, r, _)) => self.pivot(obj, r, c),
            }
        }
        Err(())
    }
}

pub(crate) fn maximize(c: &[f64], a_ub: &[Vec<f64>], b_ub: &[f64], a_eq: &[Vec<f64>], b_eq: &[f64]) -> LpOutcome {
    let n = c.len();
    let (mu, me) = (a_ub.len(), a_eq.len());
    debug_assert!(b_ub.iter().chain(b_eq).all(|&b| b >= 0.0));
    let rows = mu + me;
    let cols = n + mu + me;
    let w = cols + 1;
    let mut a = vec![0.0; rows * w];
    for (r, row) in a_ub.iter().enumerate() {
        a[r * w..r * w + n].copy_from_slice(row);
        a[r * w + n + r] = 1.0;
        a[r * w + cols] = b_ub[r];
    }
    for (k, row) in a_eq.iter().enumerate() {
        let r = mu + k;
        a[r * w..r * w + n].copy_from_slice(row);
        a[r * w + n + mu + k] = 1.0;
        a[r * w + cols] = b_eq[k];
    }
    let basis = (n..cols).collect();
    let mut t = Tableau { rows, cols, a, basis };
    let is_artificial = |j: usize| j >= n + mu;

    if me > 0 {
        let cost: Vec<f64> = (0..cols).map(|j| if is_artificial(j) { -1.0 } else { 0.0 }).collect();
        let mut obj = t.objective_row(&cost);
        if let Err(()) = t.optimize(&mut obj, |_| true) { return LpOutcome::Stalled }
        let scale = 1.0 + b_eq.iter().sum::<f64>();
        if -obj[cols] < -1e-9 * scale {
            return LpOutcome::Infeasible;
        }
        for r in 0..rows {
            if is_artificial(t.basis[r]) {
                if let Some(j) = (0..n + mu).find(|&j| t.at(r, j).abs() > 1e-9) {
                    t.pivot(&mut obj, r, j);
                }
            }
        }
    }

    let cost: Vec<f64> = (0..cols).map(|j| if j < n { c[j] } else { 0.0 }).collect();
    let mut obj = t.objective_row(&cost);
    match t.optimize(&mut obj, |j| !is_artificial(j)) {
        Err(()) => LpOutcome::Stalled,
        Ok(false) => LpOutcome::Unbounded,
        Ok(true) => {
            let mut x = vec![0.0; n];
            for r in 0..rows {
                if t.basis[r] < n {
                    x[t.basis[r]] = t.rhs(r).max(0.0);
                }
            }
            let duals_ub = (0..mu).map(|k| (-obj[n + k]).max(0.0)).collect();
            LpOutcome::Optimal(LpSolution { objective: c.iter().zip(&x).map(|(a, b)| a * b).sum(), x, duals_ub })
        }
    }
}
