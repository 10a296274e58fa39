//! Experiment harness for flow-generated VQE parameters: run configs, mode
//! dispatch, metrics streams and reports.

pub mod config;
pub mod cost;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod metrics;
pub mod run;

pub use config::{Mode, RunConfig};
pub use error::{HarnessError, Result};
pub use run::{run, RunArtifacts, Summary};
