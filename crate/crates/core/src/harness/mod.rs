//! Experiment plumbing: configuration, single runs, sweeps, dataset and
//! result files, plot scripts.

mod check;
mod config;
mod dataset;
mod plot;
mod run;
mod sweep;

pub use check::{run_checks, CheckLine, CheckOptions, CheckReport};
pub use config::{parse_pairs, ConfigError, ExperimentConfig, NoiseModel, KEYS};
pub use dataset::{dataset_header, read_dataset, write_dataset};
pub use plot::{emit_plot_script, PlotKind};
pub use run::{
    generate, run_experiment, write_run, write_weights, GeneratedData, ResultRow, RunResult,
    RunStatus, StageCounters, CSV_COLUMNS,
};
pub use sweep::{sweep, write_sweep, SweepGrid, SweepOutcome, TrendPoint};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}:{line}: {reason}")]
    Format { path: PathBuf, line: usize, reason: String },
    #[error("{path}: missing columns {}", missing.join(", "))]
    MissingColumns { path: PathBuf, missing: Vec<String> },
    #[error("{0}: no data rows")]
    EmptyCsv(PathBuf),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    pub(crate) fn stage(stage: &'static str, e: impl std::fmt::Display) -> Self {
        HarnessError::Stage { stage, message: e.to_string() }
    }

    /// Process exit code: 2 for invalid input, 3 for a failed stage or I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::MissingColumns { .. } | HarnessError::EmptyCsv(_) | HarnessError::Format { .. } => 2,
            HarnessError::Io { .. } | HarnessError::Stage { .. } => 3,
        }
    }
}
