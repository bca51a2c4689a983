//! Connectionist temporal classification.
//!
//! Inputs are `T × C` matrices of per-frame log-probabilities whose last
//! column is the blank. Everything runs in `f64` log space.

mod decode;
mod loss;
mod metrics;

use thiserror::Error;

pub use decode::{beam_search_decode, collapse_path, exhaustive_decode, greedy_decode};
pub use loss::{
    alpha_beta, ctc_forward_backward, ctc_loss_bruteforce, extend_with_blanks, AlphaBeta,
    CtcResult, ExtendedLabels, BRUTE_FORCE_MAX_PATHS,
};
pub use metrics::{corpus_ler, edit_distance, label_error_rate, LerAccumulator};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CtcError {
    #[error("row {row} is not a log-probability distribution (log-sum {log_sum})")]
    InvalidDistribution { row: usize, log_sum: f64 },
    #[error("label {label} at position {position} is not a symbol class (blank is {blank})")]
    InvalidLabel {
        label: usize,
        position: usize,
        blank: usize,
    },
    #[error("need at least one frame and two classes, got {frames}x{classes}")]
    EmptyInput { frames: usize, classes: usize },
    #[error("brute-force enumeration of {classes}^{frames} paths exceeds the limit")]
    TooLarge { frames: usize, classes: usize },
    #[error("reference sequence is empty")]
    EmptyReference,
    #[error("beam width must be at least 1")]
    ZeroBeamWidth,
}
