//! Experiment orchestration for the factored-MDP learners: seeded runs,
//! regret accounting, CSV results, manifests, audits and SVG plots.

pub mod aggregate;
pub mod audit;
pub mod config;
pub mod error;
pub mod experiment;
pub mod files;
pub mod plot;

pub use config::{AgentSpec, RunConfig};
pub use error::{HarnessError, Result};
pub use experiment::{optimal_gain, run_experiment, ExperimentReport};
