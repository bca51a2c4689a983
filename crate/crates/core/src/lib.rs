//! Train CTC recurrent speech recognizers and transfer their recurrent layers
//! between alphabets.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`text_labels`] | Alphabets, transcript normalization, label ids |
//! | [`frontend`] | WAV input, resampling, MFCC features, manifests |
//! | [`network`] | LSTM / BiLSTM stack, forward pass and BPTT |
//! | [`ctc`] | CTC loss and gradient, greedy and beam decoding, LER |
//! | [`transfer`] | Checkpoints and recurrent-layer weight transfer |
//! | [`trainer`] | Momentum SGD training, evaluation, experiment matrix |

pub mod ctc;
pub mod frontend;
pub mod network;
pub mod tensor;
pub mod text_labels;
pub mod trainer;
pub mod transfer;

pub use tensor::{Matrix, Real};
