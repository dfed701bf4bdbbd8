use olvc_core::potential::smoothing_width;
use olvc_core::{lp_norm, lpr_norm, Exponent, NormParams, PrNormParams};
use proptest::prelude::*;

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        Just(Exponent::Finite(1.0)),
        Just(Exponent::Finite(2.0)),
        Just(Exponent::Finite(3.0)),
        Just(Exponent::Finite(5.0)),
        Just(Exponent::Finite(10.0)),
        Just(Exponent::Finite(50.0)),
        Just(Exponent::Infinity),
    ]
}

fn finite_exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(3.0), Just(5.0), Just(10.0)]
}

/// `(p, ε, Λ, z)` with `Λ ∈ [0,100]^d`, `z ∈ [0,1]^d`.
fn instance() -> impl Strategy<Value = (Exponent, f64, Vec<f64>, Vec<f64>)> {
    (exponent(), 1usize..=16, 0.001f64..=1.0).prop_flat_map(|(p, d, eps)| {
        (Just(p), Just(eps), prop::collection::vec(0.0f64..100.0, d), prop::collection::vec(0.0f64..1.0, d))
    })
}

fn composite_instance() -> impl Strategy<Value = (f64, f64, f64, Vec<f64>, Vec<f64>)> {
    (finite_exponent(), prop_oneof![Just(1.0), Just(2.0), Just(4.0), Just(10.0)], 1usize..=8, 0.01f64..=1.0)
        .prop_flat_map(|(p, r, d, eps)| {
            (
                Just(p),
                Just(r),
                Just(eps),
                prop::collection::vec(0.0f64..100.0, d + 1),
                prop::collection::vec(0.0f64..1.0, d + 1),
            )
        })
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn dual_norm(p: Exponent, g: &[f64]) -> f64 {
    lp_norm(p.dual(), g).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn psi_sandwiches_the_norm((p, eps, load, _z) in instance()) {
        let np = NormParams::new(p, load.len(), eps).unwrap();
        let norm = lp_norm(p, &load).unwrap();
        let psi = np.psi(&load).unwrap();
        let slack = 1e-9 * (1.0 + psi.abs());
        prop_assert!(norm <= psi + slack, "{norm} > {psi}");
        prop_assert!(psi <= norm + np.additive_gap() + slack);
    }

    #[test]
    fn gradient_lies_in_dual_ball((p, eps, load, _z) in instance()) {
        let np = NormParams::new(p, load.len(), eps).unwrap();
        let g = np.psi_gradient(&load).unwrap();
        prop_assert!(g.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-12));
        prop_assert!(dual_norm(p, &g) <= 1.0 + 1e-12);
    }

    /// The gradient grows by at most `e^ε` per coordinate under a unit step.
    #[test]
    fn gradient_stable_under_unit_steps((p, eps, load, z) in instance()) {
        let np = NormParams::new(p, load.len(), eps).unwrap();
        let g0 = np.psi_gradient(&load).unwrap();
        let g1 = np.psi_gradient(&add(&load, &z)).unwrap();
        let factor = eps.exp();
        for (a, b) in g0.iter().zip(&g1) {
            prop_assert!(*b <= factor * a * (1.0 + 1e-12) + 1e-12, "{b} vs {a}");
        }
    }

    /// Integrating the `e^{εs}` growth along the step gives
    /// `Ψ(Λ+z) − Ψ(Λ) ≤ (e^ε − 1)/ε · ⟨z, ∇Ψ(Λ)⟩ ≤ (1+ε)⟨z, ∇Ψ(Λ)⟩`.
    #[test]
    fn increment_bounded_by_linearisation((p, eps, load, z) in instance()) {
        let np = NormParams::new(p, load.len(), eps).unwrap();
        let g = np.psi_gradient(&load).unwrap();
        let lin: f64 = g.iter().zip(&z).map(|(a, b)| a * b).sum();
        let inc = np.psi(&add(&load, &z)).unwrap() - np.psi(&load).unwrap();
        prop_assert!(inc >= lin - 1e-9 * (1.0 + np.psi(&load).unwrap()));
        prop_assert!(inc <= (1.0 + eps) * lin + 1e-9 * (1.0 + np.psi(&load).unwrap()));
    }

    #[test]
    fn psi_is_monotone((p, eps, load, z) in instance()) {
        let np = NormParams::new(p, load.len(), eps).unwrap();
        prop_assert!(np.psi(&add(&load, &z)).unwrap() >= np.psi(&load).unwrap());
    }

    #[test]
    fn phi_increments_are_superadditive(
        p in finite_exponent(),
        eps in 0.001f64..=1.0,
        d in 1usize..=16,
        k in 1usize..=5,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let np = NormParams::new(Exponent::Finite(p), d, eps).unwrap();
        let load: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..10.0)).collect();
        let zs: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
        let base = np.phi(&load).unwrap();
        let separate: f64 = zs.iter().map(|z| np.phi(&add(&load, z)).unwrap() - base).sum();
        let sum = zs.iter().fold(load.clone(), |acc, z| add(&acc, z));
        let joint = np.phi(&sum).unwrap() - base;
        prop_assert!(separate <= joint + 1e-9 * joint.abs().max(1.0), "{separate} > {joint}");
    }

    #[test]
    fn composite_sandwich_and_dual_norm((p, r, eps, load, _z) in composite_instance()) {
        let d = load.len() - 1;
        let pr = PrNormParams::new(Exponent::Finite(p), Exponent::Finite(r), d, eps).unwrap();
        let norm = pr.norm(&load).unwrap();
        let psi = pr.psi(&load).unwrap();
        let slack = 1e-9 * (1.0 + psi);
        prop_assert!(norm <= psi + slack);
        prop_assert!(psi <= norm + (p + r) / eps * lp_norm(Exponent::Finite(p), &vec![1.0; d]).unwrap() + slack);
        let g = pr.psi_gradient(&load).unwrap();
        prop_assert!(g.iter().all(|&v| v > 0.0));
        prop_assert!(pr.dual_norm(&g).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn composite_gradient_stability((p, r, eps, load, z) in composite_instance()) {
        let d = load.len() - 1;
        let pr = PrNormParams::new(Exponent::Finite(p), Exponent::Finite(r), d, eps).unwrap();
        let g0 = pr.psi_gradient(&load).unwrap();
        let g1 = pr.psi_gradient(&add(&load, &z)).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            prop_assert!(*b <= (1.0 + 4.0 * eps) * a * (1.0 + 1e-12));
        }
        prop_assert!(pr.psi(&add(&load, &z)).unwrap() >= pr.psi(&load).unwrap());
    }
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], j: usize) -> f64 {
    let h = 1e-5;
    let mut hi = x.to_vec();
    let mut lo = x.to_vec();
    hi[j] += h;
    lo[j] -= h;
    (f(&hi) - f(&lo)) / (2.0 * h)
}

#[test]
fn gradients_match_central_differences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let exps = [1.0, 2.0, 3.0, 5.0, 10.0];
    for _ in 0..1000 {
        let d = rng.gen_range(1..=8);
        let eps = rng.gen_range(0.05..=1.0);
        let p = if rng.gen_bool(0.2) { Exponent::Infinity } else { Exponent::Finite(exps[rng.gen_range(0..5)]) };
        let load: Vec<f64> = (0..d).map(|_| rng.gen_range(0.001..20.0)).collect();
        let np = NormParams::new(p, d, eps).unwrap();
        let g = np.psi_gradient(&load).unwrap();
        for j in 0..d {
            let fd = central_difference(|x| np.psi(x).unwrap(), &load, j);
            assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3), "{p} {j}: {fd} vs {}", g[j]);
        }

        let pin = exps[rng.gen_range(0..5)];
        let r = [1.0, 2.0, 3.0][rng.gen_range(0..3)];
        let pr = PrNormParams::new(Exponent::Finite(pin), Exponent::Finite(r), d, eps).unwrap();
        let cload: Vec<f64> = (0..=d).map(|_| rng.gen_range(0.001..20.0)).collect();
        let g = pr.psi_gradient(&cload).unwrap();
        for j in 0..=d {
            let fd = central_difference(|x| pr.psi(x).unwrap(), &cload, j);
            assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3), "composite {j}: {fd} vs {}", g[j]);
        }
    }
}

/// The softmax gradient can grow by `e^ε`, not `1 + ε`: a unit step on a
/// coordinate far below the maximum multiplies its weight by `e^ε`.
#[test]
fn softmax_gradient_growth_reaches_exp_epsilon() {
    let np = NormParams::new(Exponent::Infinity, 2, 1.0).unwrap();
    let g0 = np.psi_gradient(&[0.0, 100.0]).unwrap();
    let g1 = np.psi_gradient(&[1.0, 100.0]).unwrap();
    let ratio = g1[0] / g0[0];
    assert!((ratio - 1f64.exp()).abs() < 1e-9);
    assert!(ratio > 2.0);
}

#[test]
fn large_finite_exponent_gradient_growth_exceeds_one_plus_epsilon() {
    let np = NormParams::new(Exponent::Finite(50.0), 2, 1.0).unwrap();
    let g0 = np.psi_gradient(&[0.0, 100.0]).unwrap();
    let g1 = np.psi_gradient(&[1.0, 100.0]).unwrap();
    let ratio = g1[0] / g0[0];
    assert!(ratio > 2.0 && ratio <= 1f64.exp());
}

#[test]
fn zero_load_closed_forms() {
    for d in 1..=16 {
        for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Finite(7.0), Exponent::Infinity] {
            let np = NormParams::new(p, d, 0.5).unwrap();
            let psi = np.psi(&vec![0.0; d]).unwrap();
            assert!((psi - smoothing_width(p, d) / 0.5).abs() <= 1e-12 * (1.0 + psi));
        }
    }
}

#[test]
fn composite_norm_dummy_dominates() {
    let v = [10.0, 3.0, 4.0];
    assert_eq!(lpr_norm(Exponent::Finite(2.0), Exponent::Infinity, &v).unwrap(), 10.0);
}
