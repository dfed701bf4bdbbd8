//! Online learning with vector costs under ℓ_p objectives, and bandits with
//! knapsacks under ℓ_p budgets, both driven by smooth potentials of the
//! accumulated load.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod bwk;
pub mod checks;
pub mod environment;
pub mod error;
pub mod learner;
pub mod olvc;
pub mod oracle;
pub mod potential;
pub mod rng;
mod simplex;
pub mod trace;

pub use error::{Error, Result};
pub use learner::{ActionDistribution, Feedback, LearnerState};
pub use potential::{lp_norm, lpr_norm, ones_norm, Exponent, NormParams, PrNormParams};
pub use oracle::{Method, OracleSettings, OracleSolution};
pub use trace::{RunSummary, RunTrace, StepRecord};
