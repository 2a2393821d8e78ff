//! Experiment driver: training runs, greedy evaluation, and (guidance x seed) sweeps.

mod config;
mod metrics;
mod run;
mod sweep;

use thiserror::Error;

use crate::env::EnvError;
use crate::neural::NetError;
use crate::ppo::PpoError;

pub use config::{EnvKind, ExperimentConfig, CONFIG_KEYS};
pub use metrics::{read_metrics, EpisodeWindow, MetricsRow, MetricsWriter, METRICS_HEADER, RETURN_WINDOW};
pub use run::{
    eval_command, evaluate, train_command, train_with_progress, EvalSummary, TrainOutcome,
    CHECKPOINT_FILE, CONFIG_FILE, METRICS_FILE,
};
pub use sweep::{sweep_command, GuidanceSummary, SweepCell, SweepOutcome, SUMMARY_FILE};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("checkpoint does not fit the environment: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
