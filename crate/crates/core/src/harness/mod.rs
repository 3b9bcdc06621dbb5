//! Experiment driver: runs every (policy, seed) pair from a TOML config,
//! writes one CSV per run plus a per-interaction summary, and re-checks the
//! written results.

mod config;
mod run;
mod summarize;

pub use config::{ArmSpaceConfig, EnvironmentConfig, ExperimentConfig, PolicyEntry, RunTask, DEFAULT_CONFIG_TOML};
pub use run::{run_experiment, run_file_name, ExperimentReport, FailureKind, RunResult, MANIFEST_FILE, SUMMARY_FILE};
pub use summarize::{summarize, PolicySummary, SummaryReport, Violation};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {detail}", path.display())]
    Data { path: PathBuf, detail: String },
    #[error("environment error: {0}")]
    Environment(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }

    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } | HarnessError::Data { .. } => 2,
            HarnessError::Environment(_) => 3,
        }
    }
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for one value).
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}
