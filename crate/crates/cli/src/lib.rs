//! Experiment orchestration for the `ragbench` command.

pub mod config;
pub mod providers;
pub mod record;
pub mod report;
pub mod runner;
pub mod sweep;

use ragbench_core::bench::BenchError;
use ragbench_core::pipelines::PipelineError;
use thiserror::Error;

pub use config::{ExperimentConfig, SweepConfig};
pub use record::ResultRecord;
pub use report::{emit_report, ReportFormat};
pub use runner::run_experiment;
pub use sweep::sweep;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("provider failure: {0}")]
    Provider(String),
    #[error("nothing to report")]
    EmptyInput,
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Provider(_) => EXIT_PROVIDER,
            Self::Pipeline(
                PipelineError::Gateway(_) | PipelineError::LmFailure(_) | PipelineError::SummarizerFailure(_),
            ) => EXIT_PROVIDER,
            _ => EXIT_CONFIG,
        }
    }
}

/// Exit status for a finished run.
pub fn record_exit_code(record: &ResultRecord) -> i32 {
    if record.has_provider_failures() {
        EXIT_PROVIDER
    } else if !record.skipped.is_empty() {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}
