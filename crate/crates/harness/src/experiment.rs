//! Executes the (seed × variant) run matrix of a configuration.

use std::path::Path;

use olvc_core::bwk::{run_bwk, run_bwk_guessing, BwkConfig, BwkVariant};
use olvc_core::environment::{record, Environment};
use olvc_core::olvc::{doubling_kappa, benchmark_gradient_diagnostic, run_olvc, EpsilonRule, OlvcConfig};
use olvc_core::oracle::{
    opt_bwk_stochastic, opt_bwk_with, opt_olvc_adversarial_with, opt_olvc_stochastic, phased_halving_benchmark,
    phased_halving_bwk_benchmark,
};
use olvc_core::potential::smoothing_width;
use olvc_core::{baseline, checks, ones_norm, Exponent, LearnerState, OracleSolution, RunTrace};
use rayon::prelude::*;

use crate::config::{EnvInstance, EpsilonSetting, ExperimentConfig, OptSetting, Problem, Variant};
use crate::report::{mean_stderr, Aggregate, Bound, Ratio, Report, RunRow};
use crate::{HarnessError, Result};

/// Multiplier of the adversarial load and knapsack guarantees, fixed
/// empirically since the asymptotic statements leave it open.
pub const ADVERSARIAL_CONSTANT: f64 = 8.0;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    /// Replaces the configured seed list.
    pub seed: Option<u64>,
}

fn oracle_for(config: &ExperimentConfig, env: &EnvInstance, seed: u64) -> Result<OracleSolution> {
    let (p, horizon) = (config.p, config.horizon);
    let settings = &config.oracle.settings;
    let recorded = || -> Result<Vec<_>> { Ok(record(&mut env.build(horizon, seed)?, horizon)) };
    let solution = match (config.problem, env) {
        (Problem::Olvc, EnvInstance::Stochastic(spec)) => {
            opt_olvc_stochastic(spec, horizon, p, config.oracle.mc_samples, seed, settings)
        }
        (Problem::Olvc, EnvInstance::PhasedHalving { spec, .. }) if config.oracle.closed_form => {
            phased_halving_benchmark(spec, &spec.coins(seed))
        }
        (Problem::Olvc, _) => opt_olvc_adversarial_with(&recorded()?, p, settings, None),
        (Problem::Bwk, EnvInstance::Stochastic(spec)) => {
            opt_bwk_stochastic(spec, horizon, p, config.budget.unwrap_or(0.0), settings)
        }
        (Problem::Bwk, EnvInstance::PhasedHalving { spec, .. }) if config.oracle.closed_form => {
            phased_halving_bwk_benchmark(spec, &spec.coins(seed), config.budget.unwrap_or(0.0))
        }
        (Problem::Bwk, _) => opt_bwk_with(&recorded()?, p, config.budget.unwrap_or(0.0), settings),
    };
    solution.map_err(HarnessError::Oracle)
}

/// Whether every seed shares one benchmark.
fn seed_independent(env: &EnvInstance) -> bool {
    matches!(env, EnvInstance::Stochastic(_) | EnvInstance::Trace(_))
}

fn min_p_log(p: Exponent, d: usize) -> f64 {
    let log = (d as f64).log2() + 1.0;
    match p {
        Exponent::Finite(p) => p.min(log),
        Exponent::Infinity => log,
    }
}

struct Outcome {
    trace: RunTrace,
    checks: Vec<(&'static str, bool)>,
    theorem: Option<Bound>,
    epsilon: f64,
    regret_bound: f64,
    r_outer: Option<f64>,
}

fn run_variant(
    config: &ExperimentConfig,
    env: &EnvInstance,
    variant: &Variant,
    seed: u64,
    oracle: &OracleSolution,
) -> Result<Outcome> {
    let (p, horizon) = (config.p, config.horizon);
    let (d, n) = (env.dimensions(), env.actions());
    let ones = ones_norm(p, d);
    let opt = oracle.value;
    let mut source = env.build(horizon, seed)?;
    match variant {
        Variant::Greedy { .. } => {
            let trace = baseline::naive_baseline(&mut source, p, horizon)?;
            let checks = vec![("load-accounting", checks::load_accounting(&trace))];
            Ok(Outcome { trace, checks, theorem: None, epsilon: 0.0, regret_bound: 0.0, r_outer: None })
        }
        Variant::Olvc { feedback, epsilon, failure_prob, .. } => {
            let rule = match *epsilon {
                EpsilonSetting::Explicit { epsilon } => EpsilonRule::Explicit { epsilon },
                // ε = min{1, ‖1‖/(5·OPT)} tends to 1 as OPT → 0.
                EpsilonSetting::FromOpt if opt > 0.0 => EpsilonRule::AdversarialFromOpt { opt },
                EpsilonSetting::FromOpt => EpsilonRule::Explicit { epsilon: 1.0 },
                EpsilonSetting::Doubling { growth } => EpsilonRule::Doubling { growth },
                EpsilonSetting::StochasticDefault => EpsilonRule::StochasticDefault,
            };
            let doubling = matches!(rule, EpsilonRule::Doubling { .. });
            let mut cfg = OlvcConfig::new(p, d, n, horizon, *feedback, rule).with_diagnostics(config.diagnostics);
            cfg.failure_prob = *failure_prob;
            let trace = run_olvc(&cfg, &mut source, seed)?;
            let regret_bound = LearnerState::new(*feedback, n, horizon, *failure_prob)?.regret_bound(*failure_prob);
            let mut list = vec![
                ("step-increment", checks::step_increments(&trace)),
                ("telescoped-increment", checks::telescoped(&trace)),
                ("surrogate-range", checks::surrogate_range(&trace)),
                ("load-accounting", checks::load_accounting(&trace)),
            ];
            if config.diagnostics && !doubling {
                list.push(("benchmark-gradient", benchmark_gradient_diagnostic(&trace, &oracle.x_star)?));
            }
            let norm = trace.summary.final_norm;
            let theorem = if let EpsilonRule::Doubling { growth } = rule {
                Some(Bound::at_most(norm, 4.0 * growth * doubling_kappa(p, d) * opt))
            } else if env.is_stochastic() {
                None
            } else {
                let k = ADVERSARIAL_CONSTANT;
                Some(Bound::at_most(norm, k * min_p_log(p, d) * opt + k * ones * regret_bound))
            };
            let epsilon = trace.records.first().map_or(0.0, |r| r.epsilon);
            Ok(Outcome { trace, checks: list, theorem, epsilon, regret_bound, r_outer: None })
        }
        Variant::Bwk { variant: kind, feedback, opt: opt_setting, lambda, failure_prob, .. } => {
            let budget = config.budget.unwrap_or(0.0);
            let null = source.null_action().ok_or_else(|| {
                HarnessError::Core(olvc_core::Error::InvalidConfig("environment has no null action".into()))
            })?;
            let mut cfg = BwkConfig::new(p, d, n, horizon, budget, *kind, null);
            cfg.feedback = *feedback;
            cfg.failure_prob = *failure_prob;
            cfg.lambda = *lambda;
            cfg.diagnostics = config.diagnostics;
            let trace = match opt_setting {
                OptSetting::Oracle => run_bwk(&cfg.clone().with_opt(opt), &mut source, seed)?,
                OptSetting::Value { value } => run_bwk(&cfg.clone().with_opt(*value), &mut source, seed)?,
                OptSetting::Guess => run_bwk_guessing(&cfg, &mut source, seed)?,
            };
            let params = match opt_setting {
                OptSetting::Oracle => cfg.params_for(opt)?,
                OptSetting::Value { value } => cfg.params_for(*value)?,
                OptSetting::Guess => cfg.params_for(2f64.powi(trace.records.first().map_or(0, |r| r.phase) as i32))?,
            };
            let regret_bound = LearnerState::new(*feedback, n, horizon, *failure_prob)?.regret_bound(*failure_prob);
            let list = vec![
                ("step-increment", checks::step_increments(&trace)),
                ("reward-range", checks::reward_range(&trace, params.reward_bound)),
                ("budget-safety", checks::budget_safety(&trace, budget)),
                ("load-accounting", checks::load_accounting(&trace)),
            ];
            let theorem = match (kind, opt_setting) {
                (BwkVariant::Adversarial, OptSetting::Oracle | OptSetting::Value { .. }) => {
                    let shrink = match p {
                        Exponent::Finite(p) => p.min((d as f64).ln()),
                        Exponent::Infinity => (d as f64).ln(),
                    }
                    .max(1.0);
                    let rhs = opt / (20.0 * shrink) - ADVERSARIAL_CONSTANT * (opt * ones / budget) * regret_bound;
                    Some(Bound::at_least(trace.summary.total_reward, rhs))
                }
                _ => None,
            };
            Ok(Outcome { trace, checks: list, theorem, epsilon: params.epsilon, regret_bound, r_outer: params.r_outer })
        }
    }
}

fn stochastic_theorem(config: &ExperimentConfig, variant: &Variant, rows: &[&RunRow], opt: &OracleSolution) -> Option<Bound> {
    let values: Vec<f64> = rows.iter().map(|r| r.alg_value).collect();
    let (mean, se) = mean_stderr(&values);
    let first = rows.first()?;
    let (p, d) = (config.p, first.d);
    let ones = ones_norm(p, d);
    match variant {
        Variant::Olvc { epsilon, .. } if !matches!(epsilon, EpsilonSetting::Doubling { .. }) => {
            let eps = first.epsilon;
            let noise = 2.0 * (se * se + opt.stderr.unwrap_or(0.0).powi(2)).sqrt();
            let rhs = (1.0 + eps) * opt.value + ones * first.regret_bound + 2.0 * smoothing_width(p, d) / eps + noise;
            Some(Bound::at_most(mean, rhs))
        }
        Variant::Bwk { variant: BwkVariant::Stochastic, opt: OptSetting::Oracle | OptSetting::Value { .. }, .. } => {
            let (Exponent::Finite(pf), Some(r)) = (p, first.r_outer) else { return None };
            let budget = config.budget?;
            let factor = 1.0 - ((pf + r) * ones / budget).sqrt() - (2f64.powf(1.0 / r) - 1.0) - ones / budget * first.regret_bound;
            Some(Bound::at_least(mean, opt.value * factor - 2.0 * se))
        }
        _ => None,
    }
}

/// Runs every (seed × variant) pair of `config`, read from `path`.
pub fn run_experiment(config: &ExperimentConfig, path: &Path, options: &RunOptions) -> Result<Report> {
    let mut config = config.clone();
    if let Some(seed) = options.seed {
        config.seeds = vec![seed];
    }
    let env = config.resolve(path)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = options.jobs {
            b = b.num_threads(j.max(1));
        }
        b.build().map_err(|e| HarnessError::Core(olvc_core::Error::InvalidConfig(e.to_string())))?
    };

    let instance_seeds: Vec<Option<u64>> =
        if seed_independent(&env) { vec![None] } else { config.seeds.iter().map(|&s| Some(s)).collect() };
    let oracles: Vec<(Option<u64>, OracleSolution)> = pool.install(|| {
        instance_seeds
            .par_iter()
            .map(|s| oracle_for(&config, &env, s.unwrap_or(config.seeds[0])).map(|o| (*s, o)))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let oracle_of = |seed: u64| &oracles.iter().find(|(s, _)| s.map_or(true, |s| s == seed)).unwrap().1;

    let tasks: Vec<(u64, &Variant)> =
        config.seeds.iter().flat_map(|&s| config.variants.iter().map(move |v| (s, v))).collect();
    let outcomes: Vec<Result<RunRow>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(seed, variant)| {
                let oracle = oracle_of(seed);
                let out = run_variant(&config, &env, variant, seed, oracle)?;
                let alg_value = match config.problem {
                    Problem::Olvc => out.trace.summary.final_norm,
                    Problem::Bwk => out.trace.summary.total_reward,
                };
                let tau = match config.problem {
                    Problem::Olvc => None,
                    Problem::Bwk => Some(out.trace.summary.stop_time.unwrap_or(out.trace.records.len())),
                };
                Ok(RunRow {
                    experiment: config.name.clone(),
                    seed,
                    variant: variant.label(),
                    horizon: config.horizon,
                    n: env.actions(),
                    d: env.dimensions(),
                    p: config.p,
                    alg_value,
                    opt_value: Some(oracle.value),
                    ratio: Ratio::new(config.problem, alg_value, Some(oracle.value)),
                    regret_empirical: out.trace.summary.regret_empirical,
                    tau,
                    checks: out.checks,
                    theorem: out.theorem,
                    epsilon: out.epsilon,
                    regret_bound: out.regret_bound,
                    r_outer: out.r_outer,
                    phase: out.trace.records.last().map_or(0, |r| r.phase),
                })
            })
            .collect()
    });
    let rows: Vec<RunRow> = outcomes.into_iter().collect::<Result<_>>()?;

    let aggregates = config
        .variants
        .iter()
        .map(|v| {
            let label = v.label();
            let mine: Vec<&RunRow> = rows.iter().filter(|r| r.variant == label).collect();
            let values: Vec<f64> = mine.iter().map(|r| r.alg_value).collect();
            let (alg_mean, alg_stderr) = mean_stderr(&values);
            let opts: Vec<f64> = mine.iter().filter_map(|r| r.opt_value).collect();
            let opt_value = (!opts.is_empty()).then(|| opts.iter().sum::<f64>() / opts.len() as f64);
            let ratio_mean = if mine.iter().any(|r| r.ratio == Ratio::Undefined) {
                Ratio::Undefined
            } else {
                let rs: Vec<f64> = mine.iter().filter_map(|r| r.ratio.value()).collect();
                if rs.is_empty() {
                    Ratio::Missing
                } else {
                    Ratio::Value(rs.iter().sum::<f64>() / rs.len() as f64)
                }
            };
            let theorem = if env.is_stochastic() { stochastic_theorem(&config, v, &mine, &oracles[0].1) } else { None };
            let theorem_ok = match theorem {
                Some(b) => Some(b.holds),
                None if mine.iter().any(|r| r.theorem.is_some()) => {
                    Some(mine.iter().all(|r| r.theorem.map_or(true, |b| b.holds)))
                }
                None => None,
            };
            Aggregate {
                experiment: config.name.clone(),
                variant: label,
                runs: mine.len(),
                alg_mean,
                alg_stderr,
                opt_value,
                ratio_mean,
                theorem,
                theorem_ok,
                bound_ok: mine.iter().all(|r| r.bound_ok()) && theorem_ok != Some(false),
            }
        })
        .collect();

    Ok(Report { experiment: config.name.clone(), problem: config.problem, rows, aggregates, oracles })
}

/// Loads, runs and writes a configuration; returns the report and the CSV paths.
pub fn run_config_file(path: &Path, out_dir: &Path, options: &RunOptions) -> Result<(Report, [std::path::PathBuf; 2])> {
    let config = ExperimentConfig::load(path)?;
    let report = run_experiment(&config, path, options)?;
    let target = out_dir.join(config.output.clone().unwrap_or_else(|| format!("{}.csv", config.name).into()));
    let written = report.write(&target)?;
    Ok((report, written))
}
