//! Offline benchmarks: the best fixed distribution in hindsight for vector
//! costs, and the best fixed distribution under a knapsack budget.
//!
//! Every solution carries a certified gap derived from a dual vector `y`
//! with `‖y‖_q ≤ 1`: for vector costs `‖A x‖_p ≥ min_i (Aᵀy)_i` on the whole
//! simplex, and for knapsacks the Lagrangian bound
//! `V ≤ min_{μ≥0} μB + max_i (R_i − μ (Sᵀy)_i)`.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::environment::{CostMatrix, PhasedHalvingSpec, StochasticSpec};
use crate::error::{invalid_input, Error, Result};
use crate::learner::ActionDistribution;
use crate::potential::{log_sum_exp, norm_of, Exponent};
use crate::rng;
use crate::simplex::{self, LpOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Grid,
    FrankWolfe,
    LinearProgram,
    ClosedForm,
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Method::Grid => "grid",
            Method::FrankWolfe => "frank-wolfe",
            Method::LinearProgram => "linear-program",
            Method::ClosedForm => "closed-form",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub x_star: ActionDistribution,
    pub value: f64,
    /// Budget exhaustion step of the benchmark (knapsack problems).
    pub tau_star: Option<usize>,
    pub method: Method,
    /// Upper bound on `|value − optimum|` (on the side that can be wrong).
    pub certified_gap: f64,
    /// Monte-Carlo standard error of `value`.
    pub stderr: Option<f64>,
    /// `T·‖E[C] x*‖_p` for stochastic vector costs.
    pub lower_bound: Option<f64>,
    /// The other benchmark form for stochastic knapsacks.
    pub alt_value: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct OracleSettings {
    /// Grid points per unit along each simplex edge.
    pub grid_resolution: usize,
    /// Largest action count searched by the grid.
    pub grid_max_actions: usize,
    /// Relative duality-gap target.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { grid_resolution: 200, grid_max_actions: 3, tolerance: 1e-6, max_iterations: 20_000 }
    }
}

/// A dense nonnegative `d × n` matrix stored column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadMatrix {
    pub d: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl LoadMatrix {
    pub fn zeros(d: usize, n: usize) -> Self {
        Self { d, n, data: vec![0.0; d * n] }
    }

    /// `Σ_t C^(t)`.
    pub fn total(steps: &[CostMatrix]) -> Result<Self> {
        let first = steps.first().ok_or_else(|| invalid_input!("empty cost sequence"))?;
        let mut m = Self::zeros(first.d(), first.n());
        for (t, c) in steps.iter().enumerate() {
            if c.d() != m.d || c.n() != m.n {
                return Err(invalid_input!("step {} has a different shape", t + 1));
            }
            m.add(c.entries(), 1.0);
        }
        Ok(m)
    }

    pub fn from_cost(c: &CostMatrix) -> Self {
        Self { d: c.d(), n: c.n(), data: c.entries().to_vec() }
    }

    fn add(&mut self, entries: &[f64], scale: f64) {
        for (a, b) in self.data.iter_mut().zip(entries) {
            *a += scale * b;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { d: self.d, n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (o, c) in out.iter_mut().zip(self.column(i)) {
                    *o += c * xi;
                }
            }
        }
        out
    }

    /// `Aᵀ y`.
    pub fn transpose_mul(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.column(i).iter().zip(y).map(|(a, b)| a * b).sum()).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn distribution(x: &[f64]) -> ActionDistribution {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    ActionDistribution::from_normalized(clipped.into_iter().map(|v| v / total).collect())
}

// ---------------------------------------------------------------------------
// Grid search over small simplices

/// Minimises `f` over the grid of step `1/res`, then zooms in around the
/// best point on successively finer local grids.
fn grid_minimize(n: usize, res: usize, mut f: impl FnMut(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut best = (vec![0.0; n], f64::INFINITY);
    let mut consider = |x: &[f64], best: &mut (Vec<f64>, f64)| {
        let v = f(x);
        if v < best.1 {
            best.0.copy_from_slice(x);
            best.1 = v;
        }
    };
    let r = res as f64;
    match n {
        1 => consider(&[1.0], &mut best),
        2 => {
            for i in 0..=res {
                let a = i as f64 / r;
                consider(&[a, 1.0 - a], &mut best);
            }
        }
        3 => {
            for i in 0..=res {
                for j in 0..=res - i {
                    let (a, b) = (i as f64 / r, j as f64 / r);
                    consider(&[a, b, 1.0 - a - b], &mut best);
                }
            }
        }
        _ => unreachable!("grid search is limited to three actions"),
    }
    let mut h = 1.0 / r;
    for _ in 0..4 {
        let c = best.0.clone();
        let steps = 10i32;
        match n {
            2 => {
                for i in -steps..=steps {
                    let a = c[0] + h * i as f64 / steps as f64;
                    if (0.0..=1.0).contains(&a) {
                        consider(&[a, 1.0 - a], &mut best);
                    }
                }
            }
            3 => {
                for i in -steps..=steps {
                    for j in -steps..=steps {
                        let a = c[0] + h * i as f64 / steps as f64;
                        let b = c[1] + h * j as f64 / steps as f64;
                        if a >= 0.0 && b >= 0.0 && a + b <= 1.0 {
                            consider(&[a, b, (1.0 - a - b).max(0.0)], &mut best);
                        }
                    }
                }
            }
            _ => {}
        }
        h /= steps as f64;
    }
    best
}

fn grid_points(n: usize, res: usize, mut visit: impl FnMut(&[f64])) {
    let r = res as f64;
    match n {
        1 => visit(&[1.0]),
        2 => (0..=res).for_each(|i| visit(&[i as f64 / r, 1.0 - i as f64 / r])),
        3 => {
            for i in 0..=res {
                for j in 0..=res - i {
                    let (a, b) = (i as f64 / r, j as f64 / r);
                    visit(&[a, b, 1.0 - a - b]);
                }
            }
        }
        _ => unreachable!("grid search is limited to three actions"),
    }
}

// ---------------------------------------------------------------------------
// Frank-Wolfe over the convex hull of load points

/// `mean_b ‖Z_b w‖_p` over weights `w` on `k` vertices; block `b` stores its
/// `k` points of dimension `d` consecutively.
struct Hull<'a> {
    p: Exponent,
    d: usize,
    k: usize,
    blocks: &'a [Vec<f64>],
}

struct FwOutcome {
    weights: Vec<f64>,
    value: f64,
    lower: f64,
    /// Per-block dual vectors that produced `lower`.
    duals: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, PartialEq)]
enum Stop {
    Converged,
    /// `value ≤ threshold` or `lower > threshold`.
    Threshold(f64),
}

impl Hull<'_> {
    fn point<'b>(&self, block: &'b [f64], i: usize) -> &'b [f64] {
        &block[i * self.d..(i + 1) * self.d]
    }

    fn combine(&self, block: &[f64], w: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.d];
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                for (o, c) in z.iter_mut().zip(self.point(block, i)) {
                    *o += wi * c;
                }
            }
        }
        z
    }

    fn exact(&self, zs: &[Vec<f64>]) -> f64 {
        zs.iter().map(|z| norm_of(self.p, z)).sum::<f64>() / zs.len() as f64
    }

    /// Objective and dual vector for one block, smoothed with `beta` when
    /// `p = ∞`.
    fn smooth(&self, z: &[f64], beta: f64) -> f64 {
        match self.p {
            Exponent::Infinity => log_sum_exp(z.iter().map(|&v| beta * v)) / beta,
            Exponent::Finite(_) => norm_of(self.p, z),
        }
    }

    fn dual(&self, z: &[f64], beta: f64) -> Vec<f64> {
        match self.p {
            Exponent::Infinity => {
                let lse = log_sum_exp(z.iter().map(|&v| beta * v));
                z.iter().map(|&v| libm::exp(beta * v - lse)).collect()
            }
            Exponent::Finite(p) => {
                let norm = norm_of(self.p, z);
                if norm == 0.0 {
                    return vec![0.0; z.len()];
                }
                if p == 1.0 {
                    return vec![1.0; z.len()];
                }
                z.iter()
                    .map(|&v| if v > 0.0 { libm::exp((p - 1.0) * libm::log(v / norm)) } else { 0.0 })
                    .collect()
            }
        }
    }

    fn minimize(&self, start: Vec<f64>, tol: f64, max_iter: usize, stop: Stop) -> FwOutcome {
        let nb = self.blocks.len() as f64;
        let mut w = start;
        let mut zs: Vec<Vec<f64>> = self.blocks.iter().map(|b| self.combine(b, &w)).collect();
        let mut best = FwOutcome { weights: w.clone(), value: self.exact(&zs), lower: f64::NEG_INFINITY, duals: Vec::new() };
        let deltas: &[f64] = match self.p {
            Exponent::Infinity => &[1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
            Exponent::Finite(_) => &[0.0],
        };
        let per_stage = (max_iter / deltas.len()).max(1);
        let ln_d = libm::log(self.d.max(2) as f64);
        let mut g = vec![0.0; self.k];
        'stages: for &delta in deltas {
            let scale = best.value.max(1e-300);
            let beta = if delta > 0.0 { ln_d / (delta * scale) } else { 0.0 };
            let mut stalls = 0;
            for _ in 0..per_stage {
                let value = self.exact(&zs);
                let duals: Vec<Vec<f64>> = zs.iter().map(|z| self.dual(z, beta)).collect();
                g.iter_mut().for_each(|v| *v = 0.0);
                for (block, y) in self.blocks.iter().zip(&duals) {
                    for (i, gi) in g.iter_mut().enumerate() {
                        *gi += dot(self.point(block, i), y) / nb;
                    }
                }
                let lower = g.iter().copied().fold(f64::INFINITY, f64::min);
                if value < best.value {
                    best.value = value;
                    best.weights.copy_from_slice(&w);
                }
                if lower > best.lower {
                    best.lower = lower;
                    best.duals = duals;
                }
                if best.value == 0.0 || best.value - best.lower <= tol * best.value {
                    break 'stages;
                }
                if let Stop::Threshold(t) = stop {
                    if best.value <= t || best.lower > t {
                        break 'stages;
                    }
                }
                if delta > 0.0 && value - lower <= 3.0 * delta * value {
                    continue 'stages;
                }

                let gw = dot(&g, &w);
                let s = argmin(&g);
                let a = (0..self.k)
                    .filter(|&i| w[i] > 0.0)
                    .max_by(|&i, &j| g[i].total_cmp(&g[j]).then(j.cmp(&i)))
                    .unwrap_or(s);
                let fw_gap = gw - g[s];
                let away_gap = g[a] - gw;
                let (towards, gamma_max) = if fw_gap >= away_gap || w[a] >= 1.0 {
                    (true, 1.0)
                } else {
                    (false, w[a] / (1.0 - w[a]))
                };
                let dirs: Vec<Vec<f64>> = self
                    .blocks
                    .iter()
                    .zip(&zs)
                    .map(|(block, z)| {
                        if towards {
                            self.point(block, s).iter().zip(z).map(|(p, z)| p - z).collect()
                        } else {
                            z.iter().zip(self.point(block, a)).map(|(z, p)| z - p).collect()
                        }
                    })
                    .collect();
                let phi = |gamma: f64| {
                    zs.iter()
                        .zip(&dirs)
                        .map(|(z, dz)| {
                            let moved: Vec<f64> = z.iter().zip(dz).map(|(a, b)| (a + gamma * b).max(0.0)).collect();
                            self.smooth(&moved, beta)
                        })
                        .sum::<f64>()
                };
                let gamma = golden_section(phi, 0.0, gamma_max);
                if gamma <= 0.0 {
                    stalls += 1;
                    if stalls > 3 {
                        continue 'stages;
                    }
                    continue;
                }
                stalls = 0;
                if towards {
                    w.iter_mut().for_each(|v| *v *= 1.0 - gamma);
                    w[s] += gamma;
                } else {
                    w.iter_mut().for_each(|v| *v *= 1.0 + gamma);
                    w[a] -= gamma;
                    if gamma >= gamma_max * (1.0 - 1e-9) || w[a] < 1e-12 {
                        // Drop step: the vertex leaves the active set.
                        w[a] = 0.0;
                        let total: f64 = w.iter().sum();
                        w.iter_mut().for_each(|v| *v /= total);
                        zs = self.blocks.iter().map(|b| self.combine(b, &w)).collect();
                        continue;
                    }
                }
                for (z, dz) in zs.iter_mut().zip(&dirs) {
                    for (a, b) in z.iter_mut().zip(dz) {
                        *a = (*a + gamma * b).max(0.0);
                    }
                }
            }
        }
        let value = self.exact(&zs);
        if value < best.value {
            best.value = value;
            best.weights = w;
        }
        best
    }

    /// Best dual lower bound reachable from `x` with a short polish.
    fn lower_bound_near(&self, x: &[f64], tol: f64) -> f64 {
        self.minimize(x.to_vec(), tol, 400, Stop::Converged).lower
    }
}

fn argmin(g: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in g.iter().enumerate() {
        if v < g[best] {
            best = i;
        }
    }
    best
}

/// Minimiser of a convex function on `[lo, hi]`; returns `lo` unless the
/// minimum is strictly better.
fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let (f0, fm, fh) = (f(lo), f(mid), f(hi));
    if fh < fm && fh < f0 {
        hi
    } else if fm < f0 {
        mid
    } else {
        lo
    }
}

// ---------------------------------------------------------------------------
// Vector-cost benchmarks

/// `min_x ‖A x‖_∞` as a linear program; returns the minimiser and the dual
/// mixture over rows.
fn linf_lp(a: &LoadMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.n;
    let mut c = vec![0.0; n + 1];
    c[n] = -1.0;
    let rows: Vec<Vec<f64>> = (0..a.d)
        .map(|j| {
            let mut r: Vec<f64> = (0..n).map(|i| a.column(i)[j]).collect();
            r.push(-1.0);
            r
        })
        .collect();
    let mut eq = vec![1.0; n + 1];
    eq[n] = 0.0;
    match simplex::maximize(&c, &rows, &vec![0.0; a.d], &[eq], &[1.0]) {
        LpOutcome::Optimal(s) => Ok((s.x[..n].to_vec(), s.duals_ub)),
        _ => Err(invalid_input!("benchmark linear program did not solve")),
    }
}

/// `min_i (Aᵀ y)_i` with `y` rescaled into the dual unit ball.
fn certificate(a: &LoadMatrix, p: Exponent, y: &[f64]) -> f64 {
    let y: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    let norm = norm_of(p.dual(), &y);
    let y: Vec<f64> = if norm > 1.0 { y.iter().map(|v| v / norm).collect() } else { y };
    a.transpose_mul(&y).into_iter().fold(f64::INFINITY, f64::min)
}

fn linf_certificate(a: &LoadMatrix) -> Result<f64> {
    let (_, y) = linf_lp(a)?;
    Ok(certificate(a, Exponent::Infinity, &y))
}

/// The best fixed distribution for an aggregated cost matrix, with an
/// optional forced method.
pub fn opt_olvc_matrix(a: &LoadMatrix, p: Exponent, settings: &OracleSettings, method: Option<Method>) -> Result<OracleSolution> {
    if a.n == 0 || a.d == 0 {
        return Err(invalid_input!("empty cost matrix"));
    }
    let method = method.unwrap_or(if a.n <= settings.grid_max_actions {
        Method::Grid
    } else if p.is_infinite() {
        Method::LinearProgram
    } else {
        Method::FrankWolfe
    });
    let block = [a.data.clone()];
    let hull = Hull { p, d: a.d, k: a.n, blocks: &block };
    let (x, lower) = match method {
        Method::Grid => {
            if a.n > 3 {
                return Err(Error::Unsupported("grid search handles at most three actions"));
            }
            let (x, _) = grid_minimize(a.n, settings.grid_resolution, |x| norm_of(p, &a.mul(x)));
            let lower = if p.is_infinite() { linf_certificate(a)? } else { hull.lower_bound_near(&x, settings.tolerance) };
            (x, lower)
        }
        Method::FrankWolfe => {
            let out = hull.minimize(vec![1.0 / a.n as f64; a.n], settings.tolerance, settings.max_iterations, Stop::Converged);
            (out.weights, out.lower)
        }
        Method::LinearProgram => {
            if !p.is_infinite() {
                return Err(Error::Unsupported("the linear program covers p = ∞ only"));
            }
            let (x, y) = linf_lp(a)?;
            (x, certificate(a, p, &y))
        }
        Method::ClosedForm => return Err(Error::Unsupported("no closed form for a general instance")),
    };
    let x_star = distribution(&x);
    let value = norm_of(p, &a.mul(x_star.probabilities()));
    Ok(OracleSolution {
        x_star,
        value,
        tau_star: None,
        method,
        certified_gap: (value - lower).max(0.0),
        stderr: None,
        lower_bound: None,
        alt_value: None,
    })
}

/// `min_x ‖Σ_t C^(t) x‖_p` over the simplex.
pub fn opt_olvc_adversarial(steps: &[CostMatrix], p: Exponent) -> Result<OracleSolution> {
    opt_olvc_adversarial_with(steps, p, &OracleSettings::default(), None)
}

pub fn opt_olvc_adversarial_with(
    steps: &[CostMatrix],
    p: Exponent,
    settings: &OracleSettings,
    method: Option<Method>,
) -> Result<OracleSolution> {
    opt_olvc_matrix(&LoadMatrix::total(steps)?, p, settings, method)
}

/// Monte-Carlo estimate of `min_x E‖Σ_t C^(t) x‖_p` with common random
/// numbers: `mc_samples` independent horizon sums are drawn once and every
/// candidate is scored on the same draws.
pub fn opt_olvc_stochastic(
    spec: &StochasticSpec,
    horizon: usize,
    p: Exponent,
    mc_samples: usize,
    seed: u64,
    settings: &OracleSettings,
) -> Result<OracleSolution> {
    if mc_samples < 2 {
        return Err(invalid_input!("need at least two Monte-Carlo samples, got {mc_samples}"));
    }
    let (d, n) = (spec.d(), spec.n());
    let mut rng = rng::stream(seed, rng::label::ORACLE);
    let cells = spec.costs();
    let blocks: Vec<Vec<f64>> = (0..mc_samples)
        .map(|_| {
            let mut acc = vec![0.0; d * n];
            for _ in 0..horizon {
                for (a, c) in acc.iter_mut().zip(cells) {
                    *a += c.sample(&mut rng);
                }
            }
            acc
        })
        .collect();
    let hull = Hull { p, d, k: n, blocks: &blocks };
    let per_sample = |x: &[f64]| -> Vec<f64> {
        blocks
            .iter()
            .map(|b| norm_of(p, &LoadMatrix { d, n, data: b.clone() }.mul(x)))
            .collect()
    };
    let (x, method, lower) = if n <= settings.grid_max_actions {
        let mats: Vec<LoadMatrix> = blocks.iter().map(|b| LoadMatrix { d, n, data: b.clone() }).collect();
        let (x, _) = grid_minimize(n, settings.grid_resolution, |x| {
            mats.iter().map(|m| norm_of(p, &m.mul(x))).sum::<f64>() / mc_samples as f64
        });
        let lower = hull.lower_bound_near(&x, settings.tolerance);
        (x, Method::Grid, lower)
    } else {
        let out = hull.minimize(vec![1.0 / n as f64; n], settings.tolerance, settings.max_iterations, Stop::Converged);
        (out.weights, Method::FrankWolfe, out.lower)
    };
    let x_star = distribution(&x);
    let samples = per_sample(x_star.probabilities());
    let m = mc_samples as f64;
    let value = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|s| (s - value) * (s - value)).sum::<f64>() / (m - 1.0);
    let mean = LoadMatrix::from_cost(&spec.mean_matrix());
    let lower_bound = horizon as f64 * norm_of(p, &mean.mul(x_star.probabilities()));
    Ok(OracleSolution {
        x_star,
        value,
        tau_star: None,
        method,
        certified_gap: (value - lower).max(0.0),
        stderr: Some(libm::sqrt(var / m)),
        lower_bound: Some(lower_bound),
        alt_value: None,
    })
}

/// The phased-halving benchmark action and its load norm. This is the
/// instance's reference value, which mixed strategies can undercut; the
/// certified gap measures by how much at most.
pub fn phased_halving_benchmark(spec: &PhasedHalvingSpec, coins: &[bool]) -> Result<OracleSolution> {
    let a = PhasedHalvingSpec::benchmark_action(coins);
    let load: Vec<f64> = spec.fixed_action_load(coins, a).into_iter().map(|v| v as f64).collect();
    let value = norm_of(spec.p(), &load);
    let total = phased_halving_total(spec, coins);
    let lower = if spec.p().is_infinite() {
        linf_certificate(&total)?
    } else {
        let block = [total.data.clone()];
        let hull = Hull { p: spec.p(), d: total.d, k: total.n, blocks: &block };
        hull.minimize(vec![1.0 / total.n as f64; total.n], 1e-9, 5000, Stop::Converged).lower
    };
    Ok(OracleSolution {
        x_star: ActionDistribution::point_mass(spec.actions(), a),
        value,
        tau_star: None,
        method: Method::ClosedForm,
        certified_gap: (value - lower).max(0.0),
        stderr: None,
        lower_bound: None,
        alt_value: None,
    })
}

/// `Σ_t C^(t)` of the phased-halving instance, in integer arithmetic.
pub fn phased_halving_total(spec: &PhasedHalvingSpec, coins: &[bool]) -> LoadMatrix {
    let n = spec.actions();
    let mut m = LoadMatrix::zeros(spec.d(), n);
    for a in 0..n {
        let load = spec.fixed_action_load(coins, a);
        for (j, v) in load.into_iter().enumerate() {
            m.data[a * spec.d() + j] = v as f64;
        }
    }
    m
}

/// Knapsack benchmark of the phased-halving reward instance when the budget
/// is at least the benchmark action's load: `k·L`, which is also the most
/// reward any play can collect.
pub fn phased_halving_bwk_benchmark(spec: &PhasedHalvingSpec, coins: &[bool], budget: f64) -> Result<OracleSolution> {
    let a = PhasedHalvingSpec::benchmark_action(coins);
    let load: Vec<f64> = spec.fixed_action_load(coins, a).into_iter().map(|v| v as f64).collect();
    if norm_of(spec.p(), &load) > budget {
        return Err(invalid_input!("budget {budget} is below the benchmark action's load"));
    }
    let kl = spec.phases() * spec.block_len();
    Ok(OracleSolution {
        x_star: ActionDistribution::point_mass(spec.actions() + 1, a),
        value: kl as f64,
        tau_star: Some(spec.horizon()),
        method: Method::ClosedForm,
        certified_gap: 0.0,
        stderr: None,
        lower_bound: None,
        alt_value: None,
    })
}

// ---------------------------------------------------------------------------
// Knapsack benchmarks

/// `min_{μ ≥ 0} μB + max_i (r_i − μ a_i)`; `−∞` certifies infeasibility.
fn lagrangian_upper_bound(a: &[f64], r: &[f64], b: f64) -> f64 {
    let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
    if min_a > b {
        return f64::NEG_INFINITY;
    }
    let h = |mu: f64| mu * b + r.iter().zip(a).map(|(ri, ai)| ri - mu * ai).fold(f64::NEG_INFINITY, f64::max);
    let mut best = h(0.0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            if a[i] != a[j] {
                let mu = (r[i] - r[j]) / (a[i] - a[j]);
                if mu > 0.0 && mu.is_finite() {
                    best = best.min(h(mu));
                }
            }
        }
    }
    best
}

#[derive(Clone, Debug)]
struct Bracket {
    lower: f64,
    upper: f64,
    x: Vec<f64>,
}

/// Brackets `V = max{r·x : ‖S x‖_p ≤ b, x ∈ Δ}`; `None` certifies that no
/// distribution fits the budget.
fn knapsack_value(s: &LoadMatrix, r: &[f64], b: f64, p: Exponent, settings: &OracleSettings) -> Result<Option<Bracket>> {
    let n = s.n;
    let feasible = |x: &[f64]| norm_of(p, &s.mul(x)) <= b * (1.0 + 1e-12);
    let fits: Vec<usize> = (0..n).filter(|&i| norm_of(p, s.column(i)) <= b).collect();
    let mut lo = f64::NEG_INFINITY;
    let mut x_lo = Vec::new();
    for &i in &fits {
        if r[i] > lo {
            lo = r[i];
            x_lo = unit(n, i);
        }
    }
    let r_max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo >= r_max {
        return Ok(Some(Bracket { lower: lo, upper: lo, x: x_lo }));
    }

    let lp_rows: Option<(Vec<Vec<f64>>, Vec<f64>)> = match p {
        Exponent::Infinity => Some((
            (0..s.d).map(|j| (0..n).map(|i| s.column(i)[j]).collect()).collect(),
            vec![b; s.d],
        )),
        Exponent::Finite(q) if q == 1.0 => Some((vec![(0..n).map(|i| s.column(i).iter().sum()).collect()], vec![b])),
        Exponent::Finite(_) => None,
    };
    if let Some((rows, rhs)) = lp_rows {
        return match simplex::maximize(r, &rows, &rhs, &[vec![1.0; n]], &[1.0]) {
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Optimal(sol) => {
                let mut y = sol.duals_ub.clone();
                let total: f64 = y.iter().sum();
                let dir: Vec<f64> = match p {
                    Exponent::Infinity if total > 0.0 => {
                        y.iter_mut().for_each(|v| *v /= total);
                        y
                    }
                    Exponent::Infinity => vec![0.0; s.d],
                    Exponent::Finite(_) => vec![1.0; s.d],
                };
                let upper = lagrangian_upper_bound(&s.transpose_mul(&dir), r, b);
                let x = sol.x;
                let (lower, x) = if feasible(&x) { (dot(r, &x), x) } else { (lo, x_lo) };
                if upper == f64::NEG_INFINITY {
                    return Ok(None);
                }
                Ok(Some(Bracket { lower, upper: upper.max(lower), x }))
            }
            _ => Err(invalid_input!("knapsack linear program did not solve")),
        };
    }

    // Finite p > 1: bisection on the reward level with a min-norm
    // subproblem over {x ∈ Δ : r·x ≥ ρ}.
    let tol = settings.tolerance;
    let min_norm = {
        let block = [s.data.clone()];
        let hull = Hull { p, d: s.d, k: n, blocks: &block };
        hull.minimize(vec![1.0 / n as f64; n], tol, settings.max_iterations, Stop::Threshold(b))
    };
    if min_norm.lower > b {
        return Ok(None);
    }
    if min_norm.value <= b {
        let x = min_norm.weights.clone();
        if dot(r, &x) > lo {
            lo = dot(r, &x);
            x_lo = x;
        }
    }
    if x_lo.is_empty() {
        return Ok(None);
    }
    let mut hi = r_max;
    let mut upper_dual = f64::INFINITY;
    for _ in 0..100 {
        if hi - lo <= tol * hi.abs().max(1.0) {
            break;
        }
        let rho = 0.5 * (lo + hi);
        let (points, xs) = level_vertices(s, r, rho);
        let block = [points];
        let hull = Hull { p, d: s.d, k: xs.len(), blocks: &block };
        let start = vec![1.0 / xs.len() as f64; xs.len()];
        let out = hull.minimize(start, 1e-10, settings.max_iterations, Stop::Threshold(b));
        if let Some(y) = out.duals.first() {
            upper_dual = upper_dual.min(lagrangian_upper_bound(&s.transpose_mul(y), r, b));
        }
        if out.value <= b {
            let x = mix(&xs, &out.weights, n);
            lo = dot(r, &x).max(rho);
            x_lo = x;
        } else if out.lower > b {
            hi = rho;
        } else {
            break;
        }
        hi = hi.min(upper_dual);
    }
    let upper = hi.min(upper_dual).max(lo);
    Ok(Some(Bracket { lower: lo, upper, x: x_lo }))
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn mix(xs: &[Vec<f64>], w: &[f64], n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (v, &wi) in xs.iter().zip(w) {
        for (a, b) in x.iter_mut().zip(v) {
            *a += wi * b;
        }
    }
    x
}

/// Vertices of `{x ∈ Δ : r·x ≥ ρ}` and their load points `S v`.
fn level_vertices(s: &LoadMatrix, r: &[f64], rho: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = s.n;
    let mut xs = Vec::new();
    for i in 0..n {
        if r[i] >= rho {
            xs.push(unit(n, i));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if r[i] > rho && r[j] < rho {
                let theta = (rho - r[j]) / (r[i] - r[j]);
                let mut v = vec![0.0; n];
                v[i] = theta;
                v[j] = 1.0 - theta;
                xs.push(v);
            }
        }
    }
    let points = xs.iter().flat_map(|x| s.mul(x)).collect();
    (points, xs)
}

/// Prefix sums of a knapsack instance.
enum Prefix<'a> {
    Trace { d: usize, n: usize, loads: Vec<f64>, rewards: Vec<f64> },
    Mean { mean: &'a LoadMatrix, reward: &'a [f64] },
}

impl Prefix<'_> {
    fn from_steps(steps: &[CostMatrix]) -> Result<Prefix<'static>> {
        let first = steps.first().ok_or_else(|| invalid_input!("empty cost sequence"))?;
        let (d, n) = (first.d(), first.n());
        let mut loads = vec![0.0; (steps.len() + 1) * d * n];
        let mut rewards = vec![0.0; (steps.len() + 1) * n];
        for (t, c) in steps.iter().enumerate() {
            if c.d() != d || c.n() != n {
                return Err(invalid_input!("step {} has a different shape", t + 1));
            }
            let rw = c.rewards().ok_or_else(|| invalid_input!("step {} has no rewards", t + 1))?;
            let (prev, next) = loads.split_at_mut((t + 1) * d * n);
            for ((o, a), b) in next[..d * n].iter_mut().zip(&prev[t * d * n..]).zip(c.entries()) {
                *o = a + b;
            }
            let (prev, next) = rewards.split_at_mut((t + 1) * n);
            for ((o, a), b) in next[..n].iter_mut().zip(&prev[t * n..]).zip(rw) {
                *o = a + b;
            }
        }
        Ok(Prefix::Trace { d, n, loads, rewards })
    }

    fn n(&self) -> usize {
        match self {
            Prefix::Trace { n, .. } => *n,
            Prefix::Mean { mean, .. } => mean.n,
        }
    }

    fn load(&self, tau: usize) -> LoadMatrix {
        match self {
            Prefix::Trace { d, n, loads, .. } => {
                LoadMatrix { d: *d, n: *n, data: loads[tau * d * n..(tau + 1) * d * n].to_vec() }
            }
            Prefix::Mean { mean, .. } => mean.scaled(tau as f64),
        }
    }

    fn reward(&self, tau: usize) -> Vec<f64> {
        match self {
            Prefix::Trace { n, rewards, .. } => rewards[tau * n..(tau + 1) * n].to_vec(),
            Prefix::Mean { reward, .. } => reward.iter().map(|r| r * tau as f64).collect(),
        }
    }

    /// Largest `τ` with `‖S_τ x‖_p ≤ b`.
    fn exhaustion(&self, x: &[f64], horizon: usize, p: Exponent, b: f64) -> usize {
        let (mut lo, mut hi) = (0, horizon);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if norm_of(p, &self.load(mid).mul(x)) <= b {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }
}

#[derive(PartialEq)]
struct Node {
    upper: f64,
    a: usize,
    b: usize,
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper).then(other.a.cmp(&self.a))
    }
}

struct Search {
    value: f64,
    upper: f64,
    x: Vec<f64>,
    tau: usize,
}

/// Branch and bound over the exhaustion step: on `[a, b]` the optimum is at
/// most `max{R_b x : ‖S_a x‖ ≤ B}`.
fn knapsack_search(prefix: &Prefix<'_>, horizon: usize, p: Exponent, budget: f64, settings: &OracleSettings) -> Result<Search> {
    let n = prefix.n();
    let mut best = Search { value: 0.0, upper: 0.0, x: unit(n, 0), tau: 0 };
    let bound = |a: usize, b: usize| -> Result<f64> {
        Ok(knapsack_value(&prefix.load(a), &prefix.reward(b), budget, p, settings)?.map_or(f64::NEG_INFINITY, |br| br.upper))
    };
    let evaluate = |tau: usize, best: &mut Search| -> Result<f64> {
        let Some(br) = knapsack_value(&prefix.load(tau), &prefix.reward(tau), budget, p, settings)? else {
            return Ok(f64::NEG_INFINITY);
        };
        if br.lower > best.value {
            best.value = br.lower;
            best.x = br.x;
            best.tau = tau;
        }
        Ok(br.upper)
    };
    if horizon == 0 {
        return Ok(best);
    }
    evaluate(horizon, &mut best)?;
    let mut heap = BinaryHeap::new();
    heap.push(Node { upper: bound(1, horizon)?, a: 1, b: horizon });
    let mut residual = f64::NEG_INFINITY;
    let slack = |v: f64| settings.tolerance * v.abs().max(1.0);
    while let Some(node) = heap.pop() {
        if node.upper <= best.value + slack(best.value) {
            residual = residual.max(node.upper);
            break;
        }
        if node.a == node.b {
            residual = residual.max(evaluate(node.a, &mut best)?);
            continue;
        }
        let mid = (node.a + node.b) / 2;
        evaluate(mid, &mut best)?;
        evaluate(node.b, &mut best)?;
        for (a, b) in [(node.a, mid), (mid + 1, node.b)] {
            let u = bound(a, b)?;
            if u > best.value + slack(best.value) {
                heap.push(Node { upper: u, a, b });
            } else {
                residual = residual.max(u);
            }
        }
    }
    best.upper = residual.max(best.value);
    Ok(best)
}

/// `max_x Σ_{t ≤ τ*(x)} r^(t)·x` where `τ*(x)` is the last step with
/// `‖Σ_{t ≤ τ} C^(t) x‖_p ≤ B`.
pub fn opt_bwk(steps: &[CostMatrix], p: Exponent, budget: f64) -> Result<OracleSolution> {
    opt_bwk_with(steps, p, budget, &OracleSettings::default())
}

pub fn opt_bwk_with(steps: &[CostMatrix], p: Exponent, budget: f64, settings: &OracleSettings) -> Result<OracleSolution> {
    if !(budget > 0.0) {
        return Err(invalid_input!("budget must be positive, got {budget}"));
    }
    let prefix = Prefix::from_steps(steps)?;
    let horizon = steps.len();
    let n = prefix.n();
    let search = knapsack_search(&prefix, horizon, p, budget, settings)?;
    let method = if p.is_infinite() || p == Exponent::Finite(1.0) { Method::LinearProgram } else { Method::FrankWolfe };
    let value_of = |x: &[f64]| {
        let tau = prefix.exhaustion(x, horizon, p, budget);
        (dot(&prefix.reward(tau), x), tau)
    };
    if n <= settings.grid_max_actions {
        let mut best = (f64::NEG_INFINITY, vec![0.0; n], 0);
        grid_points(n, settings.grid_resolution, |x| {
            let (v, tau) = value_of(x);
            if v > best.0 {
                best = (v, x.to_vec(), tau);
            }
        });
        let (gv, gx, gt) = best;
        let (sv, st) = value_of(&search.x);
        let (value, x, tau, method) = if gv >= sv { (gv, gx, gt, Method::Grid) } else { (sv, search.x, st, method) };
        return Ok(OracleSolution {
            x_star: distribution(&x),
            value,
            tau_star: Some(tau),
            method,
            certified_gap: (search.upper - value).max(0.0),
            stderr: None,
            lower_bound: None,
            alt_value: None,
        });
    }
    let (value, tau) = value_of(&search.x);
    Ok(OracleSolution {
        x_star: distribution(&search.x),
        value,
        tau_star: Some(tau),
        method,
        certified_gap: (search.upper - value).max(0.0),
        stderr: None,
        lower_bound: None,
        alt_value: None,
    })
}

/// Stochastic knapsack benchmark on expected loads. `value` is the per-step
/// form `T·max{E[r]·x : ‖E[C] x‖_p ≤ B/T}`; `alt_value` is the
/// exhaustion-time form `max_x E[r]·x·τ*(x)` over expected prefix loads.
pub fn opt_bwk_stochastic(spec: &StochasticSpec, horizon: usize, p: Exponent, budget: f64, settings: &OracleSettings) -> Result<OracleSolution> {
    if !(budget > 0.0) {
        return Err(invalid_input!("budget must be positive, got {budget}"));
    }
    if horizon == 0 {
        return Err(invalid_input!("horizon must be positive"));
    }
    let means = spec.mean_matrix();
    let reward: Vec<f64> = means.rewards().ok_or_else(|| invalid_input!("spec has no reward cells"))?.to_vec();
    let mean = LoadMatrix::from_cost(&means);
    let t = horizon as f64;
    let per_step = knapsack_value(&mean, &reward, budget / t, p, settings)?
        .ok_or_else(|| invalid_input!("no distribution fits the per-step budget"))?;
    // With a zero-cost action the per-step value v(c) is concave with
    // v(0) ≥ 0, so τ·v(B/τ) is nondecreasing in τ and peaks at τ = T.
    let has_free_action = (0..mean.n).any(|i| mean.column(i).iter().all(|&c| c == 0.0));
    let alt_value = if has_free_action {
        let prefix = Prefix::Mean { mean: &mean, reward: &reward };
        knapsack_value(&prefix.load(horizon), &prefix.reward(horizon), budget, p, settings)?
            .map_or(0.0, |br| br.lower)
    } else {
        knapsack_search(&Prefix::Mean { mean: &mean, reward: &reward }, horizon, p, budget, settings)?.value
    };
    let method = if p.is_infinite() || p == Exponent::Finite(1.0) { Method::LinearProgram } else { Method::FrankWolfe };
    Ok(OracleSolution {
        x_star: distribution(&per_step.x),
        value: t * per_step.lower,
        tau_star: Some(horizon),
        method,
        certified_gap: t * (per_step.upper - per_step.lower).max(0.0),
        stderr: None,
        lower_bound: None,
        alt_value: Some(alt_value),
    })
}
