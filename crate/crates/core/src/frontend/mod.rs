//! Audio ingestion and feature extraction.
//!
//! WAV PCM16 mono in, 16 kHz resampling, MFCC features out. Also holds the
//! dataset manifest format and the on-disk feature cache.

mod audio;
mod cache;
mod manifest;
mod mfcc;

use thiserror::Error;

pub use audio::{load_wav, parse_wav, resample, resampled_len, wav_bytes, write_wav, AudioClip};
pub use cache::{
    decode_cache, encode_cache, read_feature_cache, write_feature_cache, CACHE_MAGIC, CACHE_VERSION,
};
pub use manifest::{
    duration_filter, read_manifest, write_manifest, ManifestRow, MAX_DURATION_S,
};
pub use mfcc::{
    dct_matrix, feature_normalize, frame_count, hz_to_mel, log_mel_energies, mel_filterbank,
    mel_to_hz, mfcc, FeatureConfig, FeatureMatrix, MelFilterbank, LOG_FLOOR,
};

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a RIFF/WAVE file")]
    NotWave,
    #[error("audio format {0} unsupported (only PCM)")]
    NotPcm(u16),
    #[error("channels={0} unsupported")]
    UnsupportedChannels(u16),
    #[error("bits_per_sample={0} unsupported (only 16-bit)")]
    UnsupportedBitDepth(u16),
    #[error("truncated WAV file: {0}")]
    Truncated(&'static str),
    #[error("missing {0} chunk")]
    MissingChunk(&'static str),
    #[error("invalid audio: {0}")]
    InvalidAudio(String),
    #[error("clip has {samples} samples, shorter than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("clip sample rate {clip} Hz differs from feature config rate {config} Hz")]
    RateMismatch { clip: u32, config: u32 },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("feature cache: {0}")]
    Cache(String),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("manifest row {index} ({audio}) has no duration_s")]
    MissingDuration { index: usize, audio: String },
}
