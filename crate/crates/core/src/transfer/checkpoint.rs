//! Binary layout:
//!
//! ```text
//! "CTCX" | u32 version | u64 header length | JSON header | zero padding to 64
//! | f32 LE payloads in table order
//! ```
//!
//! Offsets in the tensor table are relative to the payload start.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TransferError;
use crate::network::{expected_tensors, ModelConfig, ModelParams};
use crate::text_labels::Alphabet;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CTCX";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const PAYLOAD_ALIGN: usize = 64;

const PREAMBLE_LEN: usize = 4 + 4 + 8;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// In-memory form of a checkpoint file.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub alphabet_name: String,
    /// Symbol inventory, so custom alphabets survive without a side file.
    pub alphabet_symbols: Option<String>,
    pub tensors: Vec<CheckpointTensor>,
}

#[derive(Serialize, Deserialize)]
struct TableEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    alphabet_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alphabet_symbols: Option<String>,
    tensors: Vec<TableEntry>,
}

fn padded(n: usize) -> usize {
    n.div_ceil(PAYLOAD_ALIGN) * PAYLOAD_ALIGN
}

fn check_table(config: &ModelConfig, table: &[(String, Vec<usize>)]) -> Result<(), TransferError> {
    let expected = expected_tensors(config);
    for (i, (name, shape)) in expected.iter().enumerate() {
        match table.get(i) {
            None => return Err(TransferError::Header(format!("tensor table lacks {name}"))),
            Some((n, _)) if n != name => {
                return Err(TransferError::Header(format!(
                    "tensor {i} is {n}, expected {name}"
                )))
            }
            Some((_, s)) if s != shape => {
                return Err(TransferError::ShapeMismatch {
                    tensor: name.clone(),
                    expected: shape.clone(),
                    found: s.clone(),
                })
            }
            _ => {}
        }
    }
    if table.len() > expected.len() {
        return Err(TransferError::Header(format!(
            "unexpected tensor {}",
            table[expected.len()].0
        )));
    }
    Ok(())
}

impl Checkpoint {
    pub fn from_params(
        params: &ModelParams<f32>,
        config: &ModelConfig,
        alphabet: &Alphabet,
    ) -> Result<Self, TransferError> {
        config.validate()?;
        params.check_shapes(config)?;
        Ok(Self {
            format_version: CHECKPOINT_VERSION,
            config: config.clone(),
            alphabet_name: alphabet.name().to_string(),
            alphabet_symbols: Some(alphabet.symbols().iter().collect()),
            tensors: params
                .tensors()
                .into_iter()
                .map(|t| CheckpointTensor {
                    name: t.name,
                    shape: t.shape,
                    data: t.data.to_vec(),
                })
                .collect(),
        })
    }

    pub fn tensor(&self, name: &str) -> Option<&CheckpointTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// The alphabet the model was trained with.
    pub fn alphabet(&self) -> Result<Alphabet, TransferError> {
        Ok(match &self.alphabet_symbols {
            Some(s) => Alphabet::new(self.alphabet_name.clone(), s.chars().collect())?,
            None => Alphabet::builtin(&self.alphabet_name)?,
        })
    }

    /// Parameters for the stored config.
    pub fn params(&self) -> Result<ModelParams<f32>, TransferError> {
        self.params_for(&self.config)
    }

    /// Parameters checked against the shapes `expected` implies. The first
    /// tensor whose shape differs is named in the error.
    pub fn params_for(&self, expected: &ModelConfig) -> Result<ModelParams<f32>, TransferError> {
        expected.validate()?;
        let table: Vec<(String, Vec<usize>)> = self
            .tensors
            .iter()
            .map(|t| (t.name.clone(), t.shape.clone()))
            .collect();
        check_table(expected, &table)?;
        let mut params = ModelParams::zeros(expected);
        for (dst, src) in params.tensors_mut().into_iter().zip(&self.tensors) {
            if dst.len() != src.data.len() {
                return Err(TransferError::ShapeMismatch {
                    tensor: src.name.clone(),
                    expected: src.shape.clone(),
                    found: vec![src.data.len()],
                });
            }
            dst.copy_from_slice(&src.data);
        }
        Ok(params)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, TransferError> {
        let mut offset = 0;
        let mut entries = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            entries.push(TableEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
                offset,
            });
            offset += t.data.len() * 4;
        }
        let header = Header {
            config: self.config.clone(),
            alphabet_name: self.alphabet_name.clone(),
            alphabet_symbols: self.alphabet_symbols.clone(),
            tensors: entries,
        };
        let json = serde_json::to_vec(&header).map_err(|e| TransferError::Header(e.to_string()))?;
        let payload_start = padded(PREAMBLE_LEN + json.len());
        let mut out = Vec::with_capacity(payload_start + offset);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.resize(payload_start, 0);
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses and validates a checkpoint. The header and tensor table are
    /// checked before any payload bytes are read.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TransferError> {
        if bytes.len() < 4 {
            return Err(TransferError::Truncated("magic"));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(TransferError::BadMagic);
        }
        if bytes.len() < PREAMBLE_LEN {
            return Err(TransferError::Truncated("preamble"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(TransferError::UnsupportedVersion(version));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|n| n.checked_add(PREAMBLE_LEN))
            .filter(|&end| end <= bytes.len())
            .ok_or(TransferError::Truncated("header"))?;
        let header: Header = serde_json::from_slice(&bytes[PREAMBLE_LEN..header_end])
            .map_err(|e| TransferError::Header(e.to_string()))?;
        header
            .config
            .validate()
            .map_err(|e| TransferError::Header(e.to_string()))?;
        let table: Vec<(String, Vec<usize>)> = header
            .tensors
            .iter()
            .map(|e| (e.name.clone(), e.shape.clone()))
            .collect();
        check_table(&header.config, &table)?;

        let mut expected_bytes = 0usize;
        for e in &header.tensors {
            if e.offset != expected_bytes {
                return Err(TransferError::Header(format!(
                    "tensor {} at offset {}, expected {}",
                    e.name, e.offset, expected_bytes
                )));
            }
            expected_bytes += e.shape.iter().product::<usize>() * 4;
        }
        let payload_start = padded(header_end);
        let found = bytes.len().saturating_sub(payload_start);
        if bytes.len() < payload_start || found < expected_bytes {
            return Err(TransferError::Truncated("payload"));
        }
        if found != expected_bytes {
            return Err(TransferError::ByteCount {
                expected: expected_bytes,
                found,
            });
        }

        let payload = &bytes[payload_start..];
        let tensors = header
            .tensors
            .into_iter()
            .map(|e| {
                let n: usize = e.shape.iter().product();
                let data = payload[e.offset..e.offset + 4 * n]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect();
                CheckpointTensor {
                    name: e.name,
                    shape: e.shape,
                    data,
                }
            })
            .collect();
        Ok(Self {
            format_version: version,
            config: header.config,
            alphabet_name: header.alphabet_name,
            alphabet_symbols: header.alphabet_symbols,
            tensors,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TransferError> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        Ok(())
    }
}

pub fn save_checkpoint(
    params: &ModelParams<f32>,
    config: &ModelConfig,
    alphabet: &Alphabet,
    path: impl AsRef<Path>,
) -> Result<(), TransferError> {
    Checkpoint::from_params(params, config, alphabet)?.write(path)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, TransferError> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

/// Loads parameters, their config and the alphabet name.
pub fn load_checkpoint(
    path: impl AsRef<Path>,
) -> Result<(ModelParams<f32>, ModelConfig, String), TransferError> {
    let ck = read_checkpoint(path)?;
    let params = ck.params()?;
    Ok((params, ck.config, ck.alphabet_name))
}
