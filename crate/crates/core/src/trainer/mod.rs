//! Momentum-SGD training, evaluation and the four-scenario experiment.

mod config;
mod data;
mod experiment;
mod optim;
mod synthetic;
mod train;

use thiserror::Error;

pub use config::{Decoder, TrainConfig};
pub use data::{
    feature_cache_path, filter_feasible, load_dataset, split_dataset, Dataset, DropReason,
    DroppedRow, Split, Utterance, MIN_SPLIT_ROWS,
};
pub use experiment::{
    relative_improvement, render_table, run_experiment_matrix, ExperimentConfig,
    ExperimentReport, Improvement, ScenarioResult, TABLE_COLUMNS,
};
pub use optim::{momentum_step, OptimizerState, StepOutcome};
pub use synthetic::{synthetic_corpus, synthetic_items, SyntheticItem, SyntheticSpec};
pub use train::{
    evaluate, metrics_csv, train, train_epoch, transcribe, write_metrics_csv, EpochStats,
    EvalStats, MetricsRow, TrainOutcome, METRICS_HEADER,
};

use crate::ctc::CtcError;
use crate::frontend::FrontendError;
use crate::network::NetworkError;
use crate::text_labels::TextError;
use crate::transfer::TransferError;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset has {found} usable rows, at least {min} needed")]
    TooFewRows { found: usize, min: usize },
    #[error("{0} is empty")]
    EmptyData(&'static str),
    #[error("utterance {0} has no CTC alignment")]
    Infeasible(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Ctc(#[from] CtcError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
