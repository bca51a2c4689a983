//! Feature cache file: `"MFCC"`, then little-endian `u32` version, frame
//! count `T` and dimension `F`, then `T·F` little-endian `f32` values in
//! time-major order.

use std::path::Path;

use super::{FeatureConfig, FeatureMatrix, FrontendError};
use crate::tensor::Matrix;

pub const CACHE_MAGIC: &[u8; 4] = b"MFCC";
pub const CACHE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_cache(values: &Matrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + values.as_slice().len() * 4);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(values.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(values.cols() as u32).to_le_bytes());
    for &v in values.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_cache(bytes: &[u8]) -> Result<Matrix<f64>, FrontendError> {
    if bytes.len() < HEADER_LEN {
        return Err(FrontendError::Cache("truncated header".into()));
    }
    if &bytes[0..4] != CACHE_MAGIC {
        return Err(FrontendError::Cache("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != CACHE_VERSION {
        return Err(FrontendError::Cache(format!("unsupported version {version}")));
    }
    let (t, f) = (word(8) as usize, word(12) as usize);
    let expected = t
        .checked_mul(f)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FrontendError::Cache("size overflow".into()))?;
    if bytes.len() - HEADER_LEN != expected {
        return Err(FrontendError::Cache(format!(
            "payload holds {} bytes, header declares {t}x{f} floats",
            bytes.len() - HEADER_LEN
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Ok(Matrix::from_vec(t, f, data))
}

pub fn write_feature_cache(path: impl AsRef<Path>, fm: &FeatureMatrix) -> Result<(), FrontendError> {
    std::fs::write(path, encode_cache(&fm.values))?;
    Ok(())
}

/// Reads a cache file. The header does not record the front-end settings, so
/// the caller supplies the config the cache was built with.
pub fn read_feature_cache(
    path: impl AsRef<Path>,
    config: &FeatureConfig,
) -> Result<FeatureMatrix, FrontendError> {
    let values = decode_cache(&std::fs::read(path)?)?;
    Ok(FeatureMatrix {
        values,
        config: config.clone(),
    })
}
