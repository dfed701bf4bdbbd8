//! Randomised checks of the smooth potentials.

use olvc_core::{lp_norm, Exponent, NormParams, PrNormParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest `lhs − rhs` seen; positive values are violations.
    pub worst: f64,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        Self { name, trials: 0, failures: 0, worst: f64::NEG_INFINITY }
    }

    fn record(&mut self, excess: f64) {
        self.trials += 1;
        if excess > 0.0 {
            self.failures += 1;
        }
        self.worst = self.worst.max(excess);
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

const EXPONENTS: [Exponent; 7] = [
    Exponent::Finite(1.0),
    Exponent::Finite(2.0),
    Exponent::Finite(3.0),
    Exponent::Finite(5.0),
    Exponent::Finite(10.0),
    Exponent::Finite(50.0),
    Exponent::Infinity,
];

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], j: usize) -> f64 {
    let h = 1e-5;
    let (mut hi, mut lo) = (x.to_vec(), x.to_vec());
    hi[j] += h;
    lo[j] -= h;
    (f(&hi) - f(&lo)) / (2.0 * h)
}

/// Finite-difference errors are taken relative to the largest gradient entry:
/// a tiny entry next to large ones only measures the rounding of `Ψ`.
fn scale(g: &[f64]) -> f64 {
    g.iter().copied().fold(1e-3, f64::max)
}

/// Runs every check on `samples` random instances each.
pub fn verify_potentials(samples: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sandwich = CheckResult::new("additive-approximation");
    let mut dual = CheckResult::new("gradient-dual-norm");
    let mut stability = CheckResult::new("gradient-stability");
    let mut stability_exp = CheckResult::new("gradient-stability-exp");
    let mut increment = CheckResult::new("increment-linearisation");
    let mut monotone = CheckResult::new("monotonicity");
    let mut fd = CheckResult::new("finite-difference");
    let mut fd_composite = CheckResult::new("finite-difference-composite");
    let mut superadditive = CheckResult::new("phi-superadditivity");

    for _ in 0..samples {
        let p = EXPONENTS[rng.gen_range(0..EXPONENTS.len())];
        let d = rng.gen_range(1..=16);
        let eps = 1.0 - rng.gen::<f64>();
        let load: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..100.0)).collect();
        let z: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let np = NormParams::new(p, d, eps).expect("valid parameters");

        let norm = lp_norm(p, &load).unwrap();
        let psi = np.psi(&load).unwrap();
        let slack = 1e-9 * (1.0 + psi.abs());
        sandwich.record((norm - psi - slack).max(psi - norm - np.additive_gap() - slack));

        let g0 = np.psi_gradient(&load).unwrap();
        let qnorm = lp_norm(p.dual(), &g0).unwrap();
        let negative = if g0.iter().all(|&v| v > 0.0) { 0.0 } else { 1.0 };
        dual.record((qnorm - 1.0 - 1e-12).max(negative - 0.5));

        let moved = add(&load, &z);
        let g1 = np.psi_gradient(&moved).unwrap();
        let growth = g1.iter().zip(&g0).map(|(b, a)| b / a).fold(0.0, f64::max);
        stability.record(growth - (1.0 + eps) * (1.0 + 1e-12));
        stability_exp.record(growth - eps.exp() * (1.0 + 1e-12));

        let psi1 = np.psi(&moved).unwrap();
        let lin = dot(&g0, &z);
        increment.record(psi1 - psi - (1.0 + eps) * lin - slack);
        monotone.record(psi - psi1 - slack);

        let fd_load: Vec<f64> = (0..d).map(|_| rng.gen_range(0.001..20.0)).collect();
        let fd_eps = rng.gen_range(0.05..=1.0);
        let fd_p = EXPONENTS[[0, 1, 2, 3, 4, 6][rng.gen_range(0..6)]];
        let np = NormParams::new(fd_p, d, fd_eps).unwrap();
        let g = np.psi_gradient(&fd_load).unwrap();
        let err = (0..d)
            .map(|j| (central_difference(|x| np.psi(x).unwrap(), &fd_load, j) - g[j]).abs())
            .fold(0.0, f64::max);
        fd.record(err / scale(&g) - 1e-5);

        let inner = [1.0, 2.0, 3.0, 5.0, 10.0][rng.gen_range(0..5)];
        let outer = [1.0, 2.0, 3.0][rng.gen_range(0..3)];
        let pr = PrNormParams::new(Exponent::Finite(inner), Exponent::Finite(outer), d, fd_eps).unwrap();
        let cload: Vec<f64> = (0..=d).map(|_| rng.gen_range(0.001..20.0)).collect();
        let g = pr.psi_gradient(&cload).unwrap();
        let err = (0..=d)
            .map(|j| (central_difference(|x| pr.psi(x).unwrap(), &cload, j) - g[j]).abs())
            .fold(0.0, f64::max);
        fd_composite.record(err / scale(&g) - 1e-5);

        let fp = [1.0, 2.0, 3.0, 5.0, 10.0][rng.gen_range(0..5)];
        let np = NormParams::new(Exponent::Finite(fp), d, eps).unwrap();
        let k = rng.gen_range(1..=5);
        let base_load: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..10.0)).collect();
        let zs: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
        let base = np.phi(&base_load).unwrap();
        let separate: f64 = zs.iter().map(|z| np.phi(&add(&base_load, z)).unwrap() - base).sum();
        let joint = np.phi(&zs.iter().fold(base_load.clone(), |acc, z| add(&acc, z))).unwrap() - base;
        superadditive.record(separate - joint - 1e-9 * joint.abs().max(1.0));
    }
    vec![sandwich, dual, stability, stability_exp, increment, monotone, fd, fd_composite, superadditive]
}
