//! Experiment configuration, seeded dispatch, CSV and metadata emission,
//! and report aggregation.
//!
//! A run is fully determined by its effective config: every stochastic
//! component draws from streams keyed by `(seed, id)`, and parallel results
//! are reduced in sorted key order, so CSV bytes do not depend on thread
//! scheduling.

mod config;
mod report;
mod run;

pub use config::{
    apply_override, load_config, load_distribution_file, ExperimentConfig, ExperimentKind,
    InstanceSpec, LoadedConfig, OracleConfig, Overrides, SeedSpec,
};
pub use report::{
    loglog_slope, summarize, ComplexityNote, CsvSchema, Report, SlopeFit, SummaryRow,
};
pub use run::{run, write_omerm_log, RunMetadata, RunOutcome, Timing};

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("run {key} failed: {message}")]
    Runtime { key: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for bad configs or inputs, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Schema { .. } => 2,
            Self::Runtime { .. } | Self::Io { .. } => 3,
        }
    }
}
