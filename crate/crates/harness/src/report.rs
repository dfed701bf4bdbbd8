//! Per-run rows, per-variant aggregates and their CSV rendering.

use std::fmt::{self, Write as _};
use std::path::Path;

use olvc_core::{Exponent, OracleSolution};

use crate::config::Problem;
use crate::{HarnessError, Result};

pub const RUN_HEADER: &str = "experiment,seed,variant,T,n,d,p,alg_value,opt_value,ratio,regret_empirical,tau,bound_ok";
pub const AGGREGATE_HEADER: &str = "experiment,variant,runs,alg_mean,alg_stderr,opt_value,ratio_mean,theorem_ok,bound_ok";

/// Competitive ratio, oriented so that 1 is optimal and larger is worse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ratio {
    Value(f64),
    /// The benchmark is zero.
    Undefined,
    /// No benchmark was computed.
    Missing,
}

impl Ratio {
    /// `alg/opt` for load minimisation, `opt/alg` for reward maximisation.
    pub fn new(problem: Problem, alg: f64, opt: Option<f64>) -> Self {
        match opt {
            None => Ratio::Missing,
            Some(o) if o == 0.0 => Ratio::Undefined,
            Some(o) => match problem {
                Problem::Olvc => Ratio::Value(alg / o),
                Problem::Bwk if alg == 0.0 => Ratio::Value(f64::INFINITY),
                Problem::Bwk => Ratio::Value(o / alg),
            },
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Value(v) => Some(v),
            _ => None,
        }
    }
}

/// 17 significant digits.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Value(v) => f.write_str(&float(*v)),
            Ratio::Undefined => f.write_str("UNDEFINED"),
            Ratio::Missing => f.write_str("NA"),
        }
    }
}

/// A checked inequality `lhs ≤ rhs` (or `≥` for rewards).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Bound {
    pub fn at_most(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, holds: lhs <= rhs }
    }

    pub fn at_least(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, holds: lhs >= rhs }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub experiment: String,
    pub seed: u64,
    pub variant: String,
    pub horizon: usize,
    pub n: usize,
    pub d: usize,
    pub p: Exponent,
    /// Final load norm, or total reward.
    pub alg_value: f64,
    pub opt_value: Option<f64>,
    pub ratio: Ratio,
    pub regret_empirical: f64,
    pub tau: Option<usize>,
    /// Named structural checks on the trace.
    pub checks: Vec<(&'static str, bool)>,
    /// The per-run guarantee, where one applies to a single run.
    pub theorem: Option<Bound>,
    /// Smoothing of the first step.
    pub epsilon: f64,
    /// The learner's theoretical regret bound.
    pub regret_bound: f64,
    /// Outer exponent of the composite norm, for stochastic knapsacks.
    pub r_outer: Option<f64>,
    /// Number of doubling phases or the OPT bucket used.
    pub phase: usize,
}

impl RunRow {
    pub fn checks_ok(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    pub fn bound_ok(&self) -> bool {
        self.checks_ok() && self.theorem.map_or(true, |b| b.holds)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub experiment: String,
    pub variant: String,
    pub runs: usize,
    pub alg_mean: f64,
    pub alg_stderr: f64,
    pub opt_value: Option<f64>,
    pub ratio_mean: Ratio,
    /// Guarantee on the mean (stochastic) or on every run (adversarial).
    pub theorem: Option<Bound>,
    pub theorem_ok: Option<bool>,
    pub bound_ok: bool,
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: String,
    pub problem: Problem,
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<Aggregate>,
    /// Benchmarks by seed; `None` when one benchmark serves every seed.
    pub oracles: Vec<(Option<u64>, OracleSolution)>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.aggregates.iter().all(|a| a.bound_ok)
    }

    pub fn oracle_for(&self, seed: u64) -> Option<&OracleSolution> {
        self.oracles.iter().find(|(s, _)| s.map_or(true, |s| s == seed)).map(|(_, o)| o)
    }

    pub fn rows_of<'a>(&'a self, variant: &'a str) -> impl Iterator<Item = &'a RunRow> + 'a {
        self.rows.iter().filter(move |r| r.variant == variant)
    }

    pub fn aggregate(&self, variant: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.variant == variant)
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from(RUN_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.experiment,
                r.seed,
                r.variant,
                r.horizon,
                r.n,
                r.d,
                r.p,
                float(r.alg_value),
                r.opt_value.map_or("NA".into(), float),
                r.ratio,
                float(r.regret_empirical),
                r.tau.map_or("NA".into(), |t| t.to_string()),
                r.bound_ok()
            )
            .unwrap();
        }
        out
    }

    pub fn aggregates_csv(&self) -> String {
        let mut out = String::from(AGGREGATE_HEADER);
        out.push('\n');
        for a in &self.aggregates {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                a.experiment,
                a.variant,
                a.runs,
                float(a.alg_mean),
                float(a.alg_stderr),
                a.opt_value.map_or("NA".into(), float),
                a.ratio_mean,
                a.theorem_ok.map_or("NA".into(), |b| b.to_string()),
                a.bound_ok
            )
            .unwrap();
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>-aggregates.csv`, returning both paths.
    pub fn write(&self, runs_path: &Path) -> Result<[std::path::PathBuf; 2]> {
        let stem = runs_path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        let agg_path = runs_path.with_file_name(format!("{stem}-aggregates.csv"));
        if let Some(dir) = runs_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
        }
        for (path, text) in [(runs_path, self.runs_csv()), (agg_path.as_path(), self.aggregates_csv())] {
            std::fs::write(path, text).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        }
        Ok([runs_path.to_path_buf(), agg_path])
    }
}
