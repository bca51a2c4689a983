//! Checkpoint files and cross-alphabet weight transfer.
//!
//! A transfer copies every recurrent (`layer*`) tensor from a source model
//! into a freshly initialized target model. The dense head is always
//! reinitialized because its row count is the alphabet size.

mod checkpoint;
mod surgery;

use thiserror::Error;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, Checkpoint, CheckpointTensor,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION, PAYLOAD_ALIGN,
};
pub use surgery::{
    check_compatible, transfer_weights, verify_transfer, LayerDeviation, TransferReport,
    VerifyMode, VerifyReport,
};

use crate::network::NetworkError;
use crate::text_labels::TextError;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated in {0}")]
    Truncated(&'static str),
    #[error("checkpoint header: {0}")]
    Header(String),
    #[error("tensor {tensor}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        tensor: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("payload holds {found} bytes, tensor table needs {expected}")]
    ByteCount { expected: usize, found: usize },
    #[error("incompatible {field}: source {source_value}, target {target_value}")]
    Incompatible {
        field: &'static str,
        source_value: String,
        target_value: String,
    },
    #[error("transfer verification failed at {layer} (first differing tensor: {tensor}), max deviation {deviation:e}")]
    VerificationFailed {
        layer: String,
        tensor: String,
        deviation: f64,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Text(#[from] TextError),
}
