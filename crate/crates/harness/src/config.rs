//! JSON experiment configurations.

use std::path::{Path, PathBuf};

use olvc_core::bwk::BwkVariant;
use olvc_core::environment::{
    CellDist, Environment, GreedyTrapEnv, PhasedHalvingEnv, PhasedHalvingSpec, StochasticEnv, StochasticSpec, TraceEnv,
};
use olvc_core::{Exponent, Feedback, OracleSettings};
use serde::{Deserialize, Serialize};

use crate::tracefile::{read_trace, Trace};
use crate::{read_file, HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Olvc,
    Bwk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    /// I.i.d. draws; cells are listed column by column.
    Stochastic {
        d: usize,
        n: usize,
        costs: Vec<CellDist>,
        #[serde(default)]
        rewards: Option<Vec<CellDist>>,
    },
    PhasedHalving {
        d: usize,
        /// Adds the reward row and the null action.
        #[serde(default)]
        rewards: bool,
    },
    GreedyTrap {
        d: usize,
        load_gap: f64,
    },
    Trace {
        path: PathBuf,
    },
}

/// A fully resolved environment description.
#[derive(Clone, Debug)]
pub enum EnvInstance {
    Stochastic(StochasticSpec),
    PhasedHalving { spec: PhasedHalvingSpec, rewards: bool },
    GreedyTrap { d: usize, load_gap: f64 },
    Trace(Trace),
}

impl EnvInstance {
    pub fn dimensions(&self) -> usize {
        match self {
            EnvInstance::Stochastic(s) => s.d(),
            EnvInstance::PhasedHalving { spec, .. } => spec.d(),
            EnvInstance::GreedyTrap { d, .. } => *d,
            EnvInstance::Trace(t) => t.d,
        }
    }

    pub fn actions(&self) -> usize {
        match self {
            EnvInstance::Stochastic(s) => s.n(),
            EnvInstance::PhasedHalving { spec, rewards } => spec.actions() + usize::from(*rewards),
            EnvInstance::GreedyTrap { .. } => 2,
            EnvInstance::Trace(t) => t.n,
        }
    }

    pub fn has_rewards(&self) -> bool {
        match self {
            EnvInstance::Stochastic(s) => s.reward_cells().is_some(),
            EnvInstance::PhasedHalving { rewards, .. } => *rewards,
            EnvInstance::GreedyTrap { .. } => false,
            EnvInstance::Trace(t) => t.has_rewards(),
        }
    }

    /// Whether every seed sees the same cost distribution.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, EnvInstance::Stochastic(_))
    }

    pub fn build(&self, horizon: usize, seed: u64) -> Result<Box<dyn Environment + Send>> {
        Ok(match self {
            EnvInstance::Stochastic(s) => Box::new(StochasticEnv::new(s.clone(), horizon, seed)),
            EnvInstance::PhasedHalving { spec, rewards: false } => Box::new(PhasedHalvingEnv::new(spec.clone(), seed)),
            EnvInstance::PhasedHalving { spec, rewards: true } => Box::new(PhasedHalvingEnv::with_rewards(spec.clone(), seed)),
            EnvInstance::GreedyTrap { d, load_gap } => Box::new(GreedyTrapEnv::new(*d, *load_gap, horizon, seed)?),
            EnvInstance::Trace(t) => Box::new(TraceEnv::new(t.d, t.n, t.steps.clone())?),
        })
    }
}

impl EnvSpec {
    /// Resolves the description; relative trace paths are taken from `base`.
    pub fn resolve(&self, p: Exponent, horizon: usize, base: &Path) -> Result<EnvInstance> {
        Ok(match self {
            EnvSpec::Stochastic { d, n, costs, rewards } => {
                EnvInstance::Stochastic(StochasticSpec::new(*d, *n, costs.clone(), rewards.clone())?)
            }
            EnvSpec::PhasedHalving { d, rewards } => {
                EnvInstance::PhasedHalving { spec: PhasedHalvingSpec::new(*d, p, horizon)?, rewards: *rewards }
            }
            EnvSpec::GreedyTrap { d, load_gap } => {
                GreedyTrapEnv::new(*d, *load_gap, horizon, 0)?;
                EnvInstance::GreedyTrap { d: *d, load_gap: *load_gap }
            }
            EnvSpec::Trace { path } => EnvInstance::Trace(read_trace(&base.join(path))?),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsilonSetting {
    Explicit { epsilon: f64 },
    /// Tuned from the oracle's benchmark value.
    FromOpt,
    Doubling { growth: f64 },
    StochasticDefault,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptSetting {
    Oracle,
    Value { value: f64 },
    /// Draws an OPT bucket at random.
    Guess,
}

fn default_failure_prob() -> f64 {
    0.05
}

fn default_feedback() -> Feedback {
    Feedback::Full
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case", deny_unknown_fields)]
pub enum Variant {
    Olvc {
        #[serde(default)]
        name: Option<String>,
        #[serde(default = "default_feedback")]
        feedback: Feedback,
        epsilon: EpsilonSetting,
        #[serde(default = "default_failure_prob")]
        failure_prob: f64,
    },
    Greedy {
        #[serde(default)]
        name: Option<String>,
    },
    Bwk {
        #[serde(default)]
        name: Option<String>,
        variant: BwkVariant,
        #[serde(default = "default_feedback")]
        feedback: Feedback,
        opt: OptSetting,
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default = "default_failure_prob")]
        failure_prob: f64,
    },
}

impl Variant {
    pub fn label(&self) -> String {
        let feedback = |f: &Feedback| match f {
            Feedback::Full => "full",
            Feedback::Bandit => "bandit",
        };
        match self {
            Variant::Olvc { name: Some(n), .. } | Variant::Greedy { name: Some(n) } | Variant::Bwk { name: Some(n), .. } => n.clone(),
            Variant::Olvc { feedback: f, .. } => format!("olvc-{}", feedback(f)),
            Variant::Greedy { .. } => "greedy".into(),
            Variant::Bwk { feedback: f, .. } => format!("bwk-{}", feedback(f)),
        }
    }
}

fn default_mc_samples() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(flatten)]
    pub settings: OracleSettings,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Use the phased-halving benchmark action's load as OPT.
    #[serde(default)]
    pub closed_form: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { settings: OracleSettings::default(), mc_samples: default_mc_samples(), closed_form: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: Problem,
    pub p: Exponent,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub environment: EnvSpec,
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Keep gradients so the benchmark inequality can be checked per run.
    #[serde(default)]
    pub diagnostics: bool,
    /// CSV destination, relative to the output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn invalid(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::Config { path: path.to_path_buf(), line: 0, column: 0, message: message.into() }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_file(path)?, path)
    }

    /// Checks internal consistency and resolves the environment.
    pub fn resolve(&self, path: &Path) -> Result<EnvInstance> {
        if self.seeds.is_empty() {
            return Err(invalid(path, "at least one seed is required"));
        }
        if self.variants.is_empty() {
            return Err(invalid(path, "at least one variant is required"));
        }
        if self.horizon == 0 {
            return Err(invalid(path, "horizon must be positive"));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let env = self.environment.resolve(self.p, self.horizon, base)?;
        if let EnvInstance::Trace(t) = &env {
            if t.steps.len() < self.horizon {
                return Err(invalid(path, format!("trace has {} steps, horizon is {}", t.steps.len(), self.horizon)));
            }
        }
        for v in &self.variants {
            let ok = match (self.problem, v) {
                (Problem::Olvc, Variant::Olvc { .. } | Variant::Greedy { .. }) => true,
                (Problem::Bwk, Variant::Bwk { .. }) => true,
                _ => false,
            };
            if !ok {
                return Err(invalid(path, format!("variant `{}` does not fit problem {:?}", v.label(), self.problem)));
            }
        }
        if self.problem == Problem::Bwk {
            match self.budget {
                Some(b) if b > 0.0 => {}
                _ => return Err(invalid(path, "knapsack experiments need a positive budget")),
            }
            if !env.has_rewards() {
                return Err(invalid(path, "knapsack experiments need an environment with rewards"));
            }
        }
        let mut labels: Vec<String> = self.variants.iter().map(Variant::label).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.variants.len() {
            return Err(invalid(path, "variant names must be distinct"));
        }
        Ok(env)
    }
}
