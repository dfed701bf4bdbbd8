use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use olvc_core::environment::record;
use olvc_core::oracle::{opt_bwk, opt_olvc_adversarial};
use olvc_core::Exponent;
use olvc_harness::config::EnvSpec;
use olvc_harness::experiment::{run_config_file, RunOptions};
use olvc_harness::tracefile::{read_trace, write_trace};
use olvc_harness::verify::verify_potentials;
use olvc_harness::{HarnessError, Result};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "olvc", version, about = "Online learning with vector costs: experiments, benchmarks and checks")]
struct Cli {
    /// Overrides the seed list of a config (or seeds `record` and `verify-potentials`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV reports.
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compute the offline benchmark of a trace file.
    Oracle {
        trace: PathBuf,
        #[arg(long, value_parser = parse_exponent)]
        p: Exponent,
        /// Knapsack budget; switches to the reward benchmark.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Record an environment into a trace file.
    Record {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomised checks of the smooth potentials.
    VerifyPotentials {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

fn parse_exponent(s: &str) -> std::result::Result<Exponent, String> {
    s.parse().map_err(|e: olvc_core::Error| e.to_string())
}

/// Input of `record`: an environment plus the horizon to draw.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordSpec {
    horizon: usize,
    /// Only the phased-halving instance depends on it.
    #[serde(default)]
    p: Option<Exponent>,
    environment: EnvSpec,
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn execute(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Run { config, jobs } => {
            let options = RunOptions { jobs: *jobs, seed: cli.seed };
            let (report, written) = run_config_file(config, &cli.out_dir, &options)?;
            for a in &report.aggregates {
                println!(
                    "{} {}: runs={} mean={} ratio={} theorem={} bound_ok={}",
                    a.experiment,
                    a.variant,
                    a.runs,
                    a.alg_mean,
                    a.ratio_mean,
                    a.theorem_ok.map_or("NA".into(), |b| b.to_string()),
                    a.bound_ok
                );
            }
            for w in &written {
                println!("wrote {}", w.display());
            }
            Ok(report.passed())
        }
        Command::Oracle { trace, p, budget } => {
            let t = read_trace(trace)?;
            let solution = match budget {
                Some(b) => opt_bwk(&t.steps, *p, *b),
                None => opt_olvc_adversarial(&t.steps, *p),
            }
            .map_err(HarnessError::Oracle)?;
            println!("x*=({})", list(solution.x_star.probabilities()));
            println!("OPT={}", solution.value);
            println!("method={}", solution.method);
            println!("certified_gap={}", solution.certified_gap);
            println!("tau={}", solution.tau_star.map_or("NA".into(), |t| t.to_string()));
            Ok(true)
        }
        Command::Record { spec, out } => {
            let text = std::fs::read_to_string(spec).map_err(|source| HarnessError::Io { path: spec.clone(), source })?;
            let rs: RecordSpec = serde_json::from_str(&text).map_err(|e| HarnessError::Config {
                path: spec.clone(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
            let base = spec.parent().unwrap_or(Path::new("."));
            let env = rs.environment.resolve(rs.p.unwrap_or(Exponent::Infinity), rs.horizon, base)?;
            let mut source = env.build(rs.horizon, cli.seed.unwrap_or(0))?;
            let steps = record(&mut source, rs.horizon);
            if steps.len() < rs.horizon {
                return Err(HarnessError::Exhausted { steps: steps.len(), horizon: rs.horizon });
            }
            let target = cli.out_dir.join(out);
            write_trace(&target, env.dimensions(), env.actions(), &steps)?;
            println!("wrote {} steps to {}", steps.len(), target.display());
            Ok(true)
        }
        Command::VerifyPotentials { samples } => {
            let results = verify_potentials(*samples, cli.seed.unwrap_or(0));
            for r in &results {
                println!(
                    "{}: {} ({} trials, {} failures, worst excess {:e})",
                    r.name,
                    if r.passed() { "PASS" } else { "FAIL" },
                    r.trials,
                    r.failures,
                    r.worst
                );
            }
            Ok(results.iter().all(|r| r.passed()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
