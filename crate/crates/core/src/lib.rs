//! Distributional reward estimation for cooperative multi-agent reinforcement
//! learning, with particle environments and an experiment driver.

pub mod aggregation;
pub mod checks;
pub mod config;
pub mod env;
pub mod error;
pub mod estimator;
pub mod exp;
pub mod nn;
pub mod trainer;
pub mod uncertainty;

pub use config::{ConfigOverrides, EstimatorKind, RewardScope, RunConfig};
pub use error::{Error, Result};
