//! Regret minimization in factored MDPs whose transition structure is unknown.
//!
//! The crate covers factored spaces and models, scope-indexed estimators,
//! consistent-scope elimination, extended value iteration over optimistic
//! models, the learning loops, and benchmark environments.

pub mod agents;
pub mod environments;
pub mod error;
pub mod estimator;
pub mod io;
pub mod model;
pub mod optimistic;
pub mod planner;
pub mod space;
pub mod structure;
pub mod tabular;

pub use error::{FmdpError, Result};
pub use model::{Fmdp, RewardFactor, RewardTable, StepRecord, TransitionFactor};
pub use space::{FactorSpace, Scope};
