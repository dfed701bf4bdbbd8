use olvc_core::baseline::{greedy_scores, naive_baseline};
use olvc_core::bwk::{run_bwk, BwkConfig, BwkState, BwkVariant};
use olvc_core::checks;
use olvc_core::environment::{
    record, CellDist, CostMatrix, Environment, PhasedHalvingEnv, PhasedHalvingSpec, StochasticEnv, StochasticSpec, TraceEnv,
};
use olvc_core::olvc::{benchmark_gradient_sides, run_olvc, surrogate_costs, EpsilonRule, OlvcConfig};
use olvc_core::oracle::opt_olvc_adversarial;
use olvc_core::{Exponent, Feedback, LearnerState, NormParams};
use proptest::prelude::*;

fn random_spec(d: usize, n: usize, salt: u64, rewards: bool) -> StochasticSpec {
    let q = |i: usize| ((i as u64 * 2654435761 + salt * 97) % 1000) as f64 / 1000.0;
    let costs = (0..d * n)
        .map(|i| if i % 3 == 0 { CellDist::Uniform { a: 0.0, b: q(i) } } else { CellDist::Bernoulli { q: q(i) } })
        .collect();
    let rewards = rewards.then(|| (0..n).map(|i| CellDist::Bernoulli { q: q(i + 1000) }).collect());
    StochasticSpec::new(d, n, costs, rewards).unwrap()
}

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        Just(Exponent::Finite(1.0)),
        Just(Exponent::Finite(2.0)),
        Just(Exponent::Finite(4.0)),
        Just(Exponent::Infinity)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn olvc_full_feedback_invariants(p in exponent(), d in 1usize..6, n in 1usize..6, salt in 0u64..1000, seed in 0u64..1000) {
        let t = 400;
        let spec = random_spec(d, n, salt, false);
        let config = OlvcConfig::new(p, d, n, t, Feedback::Full, EpsilonRule::StochasticDefault).with_diagnostics(true);
        let mut env = StochasticEnv::new(spec.clone(), t, seed);
        let trace = run_olvc(&config, &mut env, seed).unwrap();
        prop_assert!(checks::step_increments(&trace));
        prop_assert!(checks::telescoped(&trace));
        prop_assert!(checks::surrogate_range(&trace));
        prop_assert!(checks::load_accounting(&trace));

        // Load from the recorded matrices and plays.
        let mut load = vec![0.0; d];
        for r in &trace.records {
            let c = r.costs.as_ref().unwrap();
            for j in 0..d {
                load[j] += (0..n).map(|i| c.get(j, i) * r.play[i]).sum::<f64>();
            }
        }
        for (a, b) in load.iter().zip(&trace.summary.final_load) {
            prop_assert!((a - b).abs() <= 1e-9);
        }

        // Benchmark inequality at the offline optimum.
        let steps: Vec<CostMatrix> = trace.records.iter().map(|r| r.costs.clone().unwrap()).collect();
        let opt = opt_olvc_adversarial(&steps, p).unwrap();
        prop_assert!(benchmark_gradient_sides(&trace, &opt.x_star).unwrap().holds(t));

        let mut again = StochasticEnv::new(spec, t, seed);
        prop_assert_eq!(run_olvc(&config, &mut again, seed).unwrap(), trace);
    }

    #[test]
    fn olvc_bandit_incurs_sampled_columns(p in exponent(), salt in 0u64..1000, seed in 0u64..1000) {
        let (d, n, t) = (3, 4, 300);
        let spec = random_spec(d, n, salt, false);
        let config = OlvcConfig::new(p, d, n, t, Feedback::Bandit, EpsilonRule::StochasticDefault).with_diagnostics(true);
        let trace = run_olvc(&config, &mut StochasticEnv::new(spec, t, seed), seed).unwrap();
        for r in &trace.records {
            let i = r.action.unwrap();
            prop_assert_eq!(&r.incurred, &r.costs.as_ref().unwrap().column(i).to_vec());
        }
        prop_assert!(checks::step_increments(&trace));
        prop_assert!(checks::surrogate_range(&trace));
    }

    #[test]
    fn bwk_invariants(p in exponent(), stochastic in any::<bool>(), salt in 0u64..1000, seed in 0u64..1000, budget in 5.0f64..80.0) {
        let (d, n, t) = (3, 4, 300);
        let p = if stochastic && p.is_infinite() { Exponent::Finite(3.0) } else { p };
        let mut spec = random_spec(d, n, salt, true);
        // Last action is the null action.
        let mut costs = spec.costs().to_vec();
        let mut rewards = spec.reward_cells().unwrap().to_vec();
        costs[(n - 1) * d..].fill(CellDist::Constant { v: 0.0 });
        rewards[n - 1] = CellDist::Constant { v: 0.0 };
        spec = StochasticSpec::new(d, n, costs, Some(rewards)).unwrap();
        let variant = if stochastic { BwkVariant::Stochastic } else { BwkVariant::Adversarial };
        let budget = budget.max(BwkConfig::minimum_adversarial_budget(p, d));
        let config = BwkConfig::new(p, d, n, t, budget, variant, n - 1).with_opt(0.5 * t as f64);
        let params = config.params().unwrap();
        let trace = run_bwk(&config, &mut StochasticEnv::new(spec, t, seed), seed).unwrap();
        prop_assert!(checks::reward_range(&trace, params.reward_bound));
        prop_assert!(checks::budget_safety(&trace, budget));
        prop_assert!(checks::step_increments(&trace));
        prop_assert!(checks::load_accounting(&trace));
        prop_assert!(trace.summary.stop_time.unwrap_or(t) <= t);
        prop_assert!(trace.records.len() == t);
    }
}

#[test]
fn stochastic_dummy_load_is_exact() {
    let spec = random_spec(2, 3, 5, true);
    let mut costs = spec.costs().to_vec();
    let mut rewards = spec.reward_cells().unwrap().to_vec();
    costs[4..].fill(CellDist::Constant { v: 0.0 });
    rewards[2] = CellDist::Constant { v: 0.0 };
    let spec = StochasticSpec::new(2, 3, costs, Some(rewards)).unwrap();
    let (t, b) = (700, 1e6);
    let config = BwkConfig::new(Exponent::Finite(2.0), 2, 3, t, b, BwkVariant::Stochastic, 2).with_opt(100.0);
    let mut state = BwkState::new(&config, config.params().unwrap(), 1).unwrap();
    let mut env = StochasticEnv::new(spec, t, 1);
    for step in 1..=t {
        state.step(&env.next_step(&[]).unwrap()).unwrap();
        assert_eq!(state.dummy_load(step), step as f64 * b / t as f64);
        assert!(state.budget_norm() >= state.dummy_load(step));
    }
    assert!(state.stopped());
    assert_eq!(state.stop_time(), Some(t));
}

#[test]
fn zero_rewards_accrue_nothing() {
    let step = CostMatrix::from_columns(&[vec![0.5, 0.2], vec![0.1, 0.9], vec![0.0, 0.0]], Some(vec![0.0, 0.0, 0.0])).unwrap();
    for variant in [BwkVariant::Adversarial, BwkVariant::Stochastic] {
        let config = BwkConfig::new(Exponent::Finite(2.0), 2, 3, 50, 10.0, variant, 2).with_opt(3.0);
        let mut env = TraceEnv::new(2, 3, vec![step.clone(); 50]).unwrap();
        assert_eq!(run_bwk(&config, &mut env, 0).unwrap().summary.total_reward, 0.0);
    }
}

#[test]
fn zero_multiplier_reduces_to_hedge_on_rewards() {
    let (t, n) = (200, 3);
    let spec = random_spec(2, n, 17, true);
    let mut costs = spec.costs().to_vec();
    let mut rewards = spec.reward_cells().unwrap().to_vec();
    costs[(n - 1) * 2..].fill(CellDist::Constant { v: 0.0 });
    rewards[n - 1] = CellDist::Constant { v: 0.0 };
    let spec = StochasticSpec::new(2, n, costs, Some(rewards)).unwrap();
    let mut config = BwkConfig::new(Exponent::Finite(2.0), 2, n, t, 1e6, BwkVariant::Adversarial, n - 1);
    config.lambda = Some(0.0);
    let trace = run_bwk(&config, &mut StochasticEnv::new(spec.clone(), t, 3), 3).unwrap();

    let mut hedge = LearnerState::new_full(n, t).unwrap();
    let mut env = StochasticEnv::new(spec, t, 3);
    for r in &trace.records {
        let c = env.next_step(&[]).unwrap();
        let x = hedge.next_distribution();
        for (a, b) in x.probabilities().iter().zip(&r.play) {
            assert!((a - b).abs() <= 1e-12);
        }
        let losses: Vec<f64> = (0..n).map(|i| (1.0 - c.reward(i)) / 2.0).collect();
        hedge.update_full(&losses).unwrap();
    }
}

#[test]
fn greedy_agrees_with_smoothed_surrogate_for_p_one() {
    let spec = random_spec(4, 3, 2, false);
    let mut env = StochasticEnv::new(spec, 20, 0);
    let np = NormParams::new(Exponent::Finite(1.0), 4, 0.3).unwrap();
    let load = [3.0, 0.5, 0.0, 7.0];
    for _ in 0..20 {
        let c = env.next_step(&[]).unwrap();
        let smooth = surrogate_costs(&np, &load, &c).unwrap();
        let greedy = greedy_scores(Exponent::Finite(1.0), &load, &c);
        for (a, b) in smooth.iter().zip(&greedy) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn greedy_and_smoothed_coincide_on_symmetric_instance() {
    let id = CostMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]], None).unwrap();
    let t = 100;
    let greedy = naive_baseline(&mut TraceEnv::new(2, 2, vec![id.clone(); t]).unwrap(), Exponent::Infinity, t).unwrap();
    let config = OlvcConfig::new(Exponent::Infinity, 2, 2, t, Feedback::Full, EpsilonRule::AdversarialFromOpt { opt: 50.0 });
    let smooth = run_olvc(&config, &mut TraceEnv::new(2, 2, vec![id; t]).unwrap(), 0).unwrap();
    assert_eq!(greedy.summary.final_norm, 50.0);
    assert!((smooth.summary.final_norm - 50.0).abs() < 1e-9);
}

#[test]
fn phased_halving_benchmark_loads_each_dimension_once() {
    for d in [4, 8, 16] {
        let spec = PhasedHalvingSpec::new(d, Exponent::Infinity, 64).unwrap();
        for seed in 0..5 {
            let mut env = PhasedHalvingEnv::new(spec.clone(), seed);
            let a = env.benchmark_action();
            let steps = record(&mut env, 64);
            let mut load = vec![0.0; d];
            for s in &steps {
                for (l, c) in load.iter_mut().zip(s.column(a)) {
                    *l += c;
                }
            }
            let l = spec.block_len() as f64;
            assert!(load.iter().all(|&v| v == 0.0 || v == l));
            assert!(load.contains(&l));
        }
    }
}

#[test]
fn olvc_runs_are_deterministic_per_seed() {
    let spec = PhasedHalvingSpec::new(8, Exponent::Infinity, 300).unwrap();
    let config = OlvcConfig::new(Exponent::Infinity, 8, spec.actions(), 300, Feedback::Bandit, EpsilonRule::Doubling { growth: 2.0 });
    let a = run_olvc(&config, &mut PhasedHalvingEnv::new(spec.clone(), 4), 4).unwrap();
    let b = run_olvc(&config, &mut PhasedHalvingEnv::new(spec, 4), 4).unwrap();
    assert_eq!(a, b);
    assert!(checks::telescoped(&a));
}
