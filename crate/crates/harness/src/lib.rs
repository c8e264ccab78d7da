//! Command-line orchestration for OTD experiments: configuration, seeded
//! single and ensemble runs, record and snapshot persistence, the
//! statistics and DMD pipelines, and the invariant check suite.

pub mod check;
pub mod config;
pub mod dmd_cmd;
pub mod error;
pub mod records;
pub mod run;
pub mod snapshot;
pub mod stats_cmd;

pub use config::{parse_config, ModelKind, RunConfig};
pub use error::HarnessError;
