//! Smooth surrogates for the `ℓ_p` norm and the composite `‖·‖_{p,r}` norm.
//!
//! For finite `p` the potential is
//!
//! ```text
//! Ψ(Λ) = (p/ε) · (‖1 + εΛ/p‖_p − 1)
//! ```
//!
//! and for `p = ∞` the log-sum-exp limit `(1/ε) · ln Σ_j exp(ε Λ_j)` is used
//! directly. The composite potential over a `(d+1)`-vector `(x_0, y)` is
//!
//! ```text
//! Ψ_{p,r}(x) = (1/δ) · ((1 + δ x_0)^r + ‖1_d + δ y‖_p^r)^{1/r} − 1/δ,   δ = ε/(p+r)
//! ```
//!
//! Every power is evaluated as `exp(k · log1p(·))` and every sum of powers
//! through a max-shifted log-sum-exp, so exponents in the hundreds and loads
//! on the order of the horizon do not overflow. Gradients are returned with
//! strictly positive components.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid_input, Error, Result};

/// A norm exponent: a finite real `p ≥ 1`, or `∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "ExponentRepr", into = "ExponentRepr")
)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn finite(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(invalid_input!("norm exponent must be a finite real >= 1, got {p}"));
        }
        Ok(Exponent::Finite(p))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// The exponent as an `f64`, `f64::INFINITY` for `∞`.
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// Hölder conjugate `q` with `1/p + 1/q = 1`.
    pub fn dual(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Exponent::Infinity);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| invalid_input!("cannot parse norm exponent {s:?}"))?;
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else {
            Exponent::finite(p)
        }
    }
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
enum ExponentRepr {
    Number(f64),
    Text(alloc::string::String),
}

#[cfg(feature = "serde")]
impl TryFrom<ExponentRepr> for Exponent {
    type Error = Error;

    fn try_from(r: ExponentRepr) -> Result<Self> {
        match r {
            ExponentRepr::Number(p) => Exponent::finite(p),
            ExponentRepr::Text(s) => s.parse(),
        }
    }
}

#[cfg(feature = "serde")]
impl From<Exponent> for ExponentRepr {
    fn from(p: Exponent) -> Self {
        match p {
            Exponent::Finite(p) => ExponentRepr::Number(p),
            Exponent::Infinity => ExponentRepr::Text("inf".into()),
        }
    }
}

fn check_entries(v: &[f64]) -> Result<()> {
    for (j, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(invalid_input!("entry {j} is not finite ({x})"));
        }
        if x < 0.0 {
            return Err(invalid_input!("entry {j} is negative ({x})"));
        }
    }
    Ok(())
}

/// `ln Σ exp(a_j)`, shifted by the maximum. Returns `-∞` for an empty input.
pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = values.map(|a| libm::exp(a - m)).sum();
    m + libm::log(s)
}

/// Norm of a nonnegative vector without validation.
pub(crate) fn norm_of(p: Exponent, v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(0.0, f64::max);
    match p {
        Exponent::Infinity => m,
        Exponent::Finite(p) => {
            if m == 0.0 {
                return 0.0;
            }
            if p == 1.0 {
                return v.iter().sum();
            }
            let s: f64 = v.iter().map(|&x| libm::pow(x / m, p)).sum();
            m * libm::pow(s, 1.0 / p)
        }
    }
}

/// `‖v‖_p` for a nonnegative vector; `max_j v_j` when `p = ∞`.
pub fn lp_norm(p: Exponent, v: &[f64]) -> Result<f64> {
    check_entries(v)?;
    Ok(norm_of(p, v))
}

/// Composite norm `‖(v_0, ‖(v_1..v_d)‖_p)‖_r`. Coordinate 0 is the dummy resource.
pub fn lpr_norm(p: Exponent, r: Exponent, v: &[f64]) -> Result<f64> {
    if v.len() < 2 {
        return Err(invalid_input!(
            "composite norm needs at least 2 entries (dummy + 1), got {}",
            v.len()
        ));
    }
    check_entries(v)?;
    Ok(composite_norm_of(p, r, v))
}

pub(crate) fn composite_norm_of(p: Exponent, r: Exponent, v: &[f64]) -> f64 {
    let inner = norm_of(p, &v[1..]);
    norm_of(r, &[v[0], inner])
}

/// `‖1_d‖_p = d^{1/p}`.
pub fn ones_norm(p: Exponent, d: usize) -> f64 {
    match p {
        Exponent::Infinity => 1.0,
        Exponent::Finite(p) => libm::pow(d as f64, 1.0 / p),
    }
}

/// `p · (‖1_d‖_p − 1)`, which tends to `ln d` as `p → ∞`.
pub fn smoothing_width(p: Exponent, d: usize) -> f64 {
    let ln_d = libm::log(d as f64);
    match p {
        Exponent::Infinity => ln_d,
        Exponent::Finite(p) => p * libm::expm1(ln_d / p),
    }
}

/// Parameters of the smooth `ℓ_p` potential.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormParams {
    pub p: Exponent,
    pub d: usize,
    pub epsilon: f64,
}

impl NormParams {
    pub fn new(p: Exponent, d: usize, epsilon: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid_input!("dimension count must be positive"));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid_input!("smoothing parameter must be positive, got {epsilon}"));
        }
        if let Exponent::Finite(v) = p {
            Exponent::finite(v)?;
        }
        Ok(Self { p, d, epsilon })
    }

    /// Dual exponent `q = (1 − 1/p)^{-1}`.
    pub fn dual(&self) -> Exponent {
        self.p.dual()
    }

    pub fn ones_norm(&self) -> f64 {
        ones_norm(self.p, self.d)
    }

    /// Additive gap `(p/ε)(‖1‖_p − 1)` between `Ψ` and the norm; `ln d / ε` for `p = ∞`.
    pub fn additive_gap(&self) -> f64 {
        smoothing_width(self.p, self.d) / self.epsilon
    }

    fn check_load(&self, load: &[f64]) -> Result<()> {
        if load.len() != self.d {
            return Err(invalid_input!(
                "load has {} entries, expected d = {}",
                load.len(),
                self.d
            ));
        }
        check_entries(load)
    }

    /// `‖Λ‖_p` of a load vector of the right dimension.
    pub fn norm(&self, load: &[f64]) -> Result<f64> {
        self.check_load(load)?;
        Ok(norm_of(self.p, load))
    }

    /// `Ψ(Λ)`.
    pub fn psi(&self, load: &[f64]) -> Result<f64> {
        self.check_load(load)?;
        Ok(self.psi_unchecked(load))
    }

    pub(crate) fn psi_unchecked(&self, load: &[f64]) -> f64 {
        let eps = self.epsilon;
        match self.p {
            Exponent::Infinity => {
                let m = load.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = load.iter().map(|&x| libm::exp(eps * (x - m))).sum();
                m + libm::log(s) / eps
            }
            Exponent::Finite(p) => {
                let lse = log_sum_exp(load.iter().map(|&x| p * libm::log1p(eps * x / p)));
                (p / eps) * libm::expm1(lse / p)
            }
        }
    }

    /// `∇Ψ(Λ)`; every component lies in `(0, 1]`.
    pub fn psi_gradient(&self, load: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d];
        self.psi_gradient_into(load, &mut out)?;
        Ok(out)
    }

    pub fn psi_gradient_into(&self, load: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_load(load)?;
        if out.len() != self.d {
            return Err(invalid_input!("gradient buffer has {} entries, expected {}", out.len(), self.d));
        }
        self.gradient_unchecked(load, out);
        Ok(())
    }

    pub(crate) fn gradient_unchecked(&self, load: &[f64], out: &mut [f64]) {
        let eps = self.epsilon;
        match self.p {
            Exponent::Infinity => {
                let m = load.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                for (o, &x) in out.iter_mut().zip(load) {
                    *o = libm::exp(eps * (x - m));
                    s += *o;
                }
                for o in out.iter_mut() {
                    *o /= s;
                }
            }
            Exponent::Finite(p) => {
                // ln g_j = (p-1) ln u_j - (1 - 1/p) ln Φ,   u_j = 1 + εΛ_j/p
                for (o, &x) in out.iter_mut().zip(load) {
                    *o = libm::log1p(eps * x / p);
                }
                let lse = log_sum_exp(out.iter().map(|&l| p * l));
                let damp = (1.0 - 1.0 / p) * lse;
                for o in out.iter_mut() {
                    *o = libm::exp((p - 1.0) * *o - damp);
                }
            }
        }
    }

    /// `Φ(Λ) = Σ_j (1 + εΛ_j/p)^p`, finite `p` only.
    pub fn phi(&self, load: &[f64]) -> Result<f64> {
        let p = self.finite_p()?;
        self.check_load(load)?;
        let eps = self.epsilon;
        Ok(load.iter().map(|&x| libm::exp(p * libm::log1p(eps * x / p))).sum())
    }

    /// `Φ(Λ + z) − Φ(Λ)` summed coordinatewise so that small increments keep
    /// full relative precision.
    pub fn phi_increment(&self, load: &[f64], z: &[f64]) -> Result<f64> {
        let p = self.finite_p()?;
        self.check_load(load)?;
        self.check_load(z)?;
        let eps = self.epsilon;
        Ok(load
            .iter()
            .zip(z)
            .map(|(&x, &dz)| {
                let u = 1.0 + eps * x / p;
                let base = libm::exp(p * libm::log1p(eps * x / p));
                base * libm::expm1(p * libm::log1p(eps * dz / (p * u)))
            })
            .sum())
    }

    fn finite_p(&self) -> Result<f64> {
        match self.p {
            Exponent::Finite(p) => Ok(p),
            Exponent::Infinity => Err(Error::Unsupported("Φ is only defined for finite p")),
        }
    }
}

/// Parameters of the composite potential `Ψ_{p,r}` over `d + 1` coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrNormParams {
    pub p: f64,
    pub r: f64,
    pub d: usize,
    pub epsilon: f64,
    pub delta: f64,
}

impl PrNormParams {
    pub fn new(p: Exponent, r: Exponent, d: usize, epsilon: f64) -> Result<Self> {
        let (Exponent::Finite(p), Exponent::Finite(r)) = (p, r) else {
            return Err(invalid_input!("the composite potential needs finite p and r"));
        };
        Exponent::finite(p)?;
        Exponent::finite(r)?;
        if d == 0 {
            return Err(invalid_input!("dimension count must be positive"));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid_input!("smoothing parameter must be positive, got {epsilon}"));
        }
        Ok(Self { p, r, d, epsilon, delta: epsilon / (p + r) })
    }

    pub fn inner(&self) -> Exponent {
        Exponent::Finite(self.p)
    }

    pub fn outer(&self) -> Exponent {
        Exponent::Finite(self.r)
    }

    /// `‖1_d‖_p` of the non-dummy block.
    pub fn ones_norm(&self) -> f64 {
        ones_norm(self.inner(), self.d)
    }

    /// Upper bound `(p + r)/ε · ‖1_d‖_p` on `Ψ_{p,r}(Λ) − ‖Λ‖_{p,r}`.
    pub fn additive_gap(&self) -> f64 {
        (self.p + self.r) / self.epsilon * self.ones_norm()
    }

    fn check_load(&self, load: &[f64]) -> Result<()> {
        if load.len() != self.d + 1 {
            return Err(invalid_input!(
                "composite load has {} entries, expected d + 1 = {}",
                load.len(),
                self.d + 1
            ));
        }
        check_entries(load)
    }

    pub fn norm(&self, load: &[f64]) -> Result<f64> {
        self.check_load(load)?;
        Ok(composite_norm_of(self.inner(), self.outer(), load))
    }

    /// `(r · ln(1 + δ x_0), (r/p) · ln Φ_p, ln Φ_{p,r})`.
    fn log_terms(&self, load: &[f64]) -> (f64, f64, f64) {
        let (p, r, delta) = (self.p, self.r, self.delta);
        let head = r * libm::log1p(delta * load[0]);
        let lse_p = log_sum_exp(load[1..].iter().map(|&y| p * libm::log1p(delta * y)));
        let tail = (r / p) * lse_p;
        let total = log_sum_exp([head, tail].into_iter());
        (head, lse_p, total)
    }

    /// `Ψ_{p,r}(Λ)` for a `(d+1)`-vector with the dummy resource at index 0.
    pub fn psi(&self, load: &[f64]) -> Result<f64> {
        self.check_load(load)?;
        Ok(self.psi_unchecked(load))
    }

    pub(crate) fn psi_unchecked(&self, load: &[f64]) -> f64 {
        let (_, _, total) = self.log_terms(load);
        libm::expm1(total / self.r) / self.delta
    }

    pub fn psi_gradient(&self, load: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d + 1];
        self.psi_gradient_into(load, &mut out)?;
        Ok(out)
    }

    pub fn psi_gradient_into(&self, load: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_load(load)?;
        if out.len() != self.d + 1 {
            return Err(invalid_input!("gradient buffer has {} entries, expected {}", out.len(), self.d + 1));
        }
        self.gradient_unchecked(load, out);
        Ok(())
    }

    pub(crate) fn gradient_unchecked(&self, load: &[f64], out: &mut [f64]) {
        let (p, r, delta) = (self.p, self.r, self.delta);
        let (_, lse_p, total) = self.log_terms(load);
        let denom = (1.0 - 1.0 / r) * total;
        out[0] = libm::exp((r - 1.0) * libm::log1p(delta * load[0]) - denom);
        let shared = (r / p - 1.0) * lse_p - denom;
        for (o, &y) in out[1..].iter_mut().zip(&load[1..]) {
            *o = libm::exp(shared + (p - 1.0) * libm::log1p(delta * y));
        }
    }

    /// `‖g‖_{q,s}` with `q`, `s` the conjugates of `p`, `r`.
    pub fn dual_norm(&self, g: &[f64]) -> Result<f64> {
        self.check_load(g)?;
        Ok(composite_norm_of(self.inner().dual(), self.outer().dual(), g))
    }
}
