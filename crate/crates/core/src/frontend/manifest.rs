use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FrontendError;

/// Clips longer than this are dropped during preparation.
pub const MAX_DURATION_S: f64 = 15.0;

/// One JSON Lines manifest entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub audio: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

impl ManifestRow {
    pub fn new(audio: impl Into<String>, text: impl Into<String>, duration_s: f64) -> Self {
        Self {
            audio: audio.into(),
            text: text.into(),
            duration_s: Some(duration_s),
        }
    }
}

/// Keeps rows no longer than [`MAX_DURATION_S`] (the boundary is kept),
/// preserving order.
pub fn duration_filter(rows: Vec<ManifestRow>) -> Result<Vec<ManifestRow>, FrontendError> {
    let mut kept = Vec::with_capacity(rows.len());
    for (index, row) in rows.into_iter().enumerate() {
        let d = row.duration_s.ok_or_else(|| FrontendError::MissingDuration {
            index,
            audio: row.audio.clone(),
        })?;
        if d <= MAX_DURATION_S {
            kept.push(row);
        }
    }
    Ok(kept)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>, FrontendError> {
    let file = std::fs::File::open(path)?;
    let mut rows = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| FrontendError::Manifest {
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_manifest(path: impl AsRef<Path>, rows: &[ManifestRow]) -> Result<(), FrontendError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in rows {
        let line = serde_json::to_string(row).expect("manifest rows always serialize");
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}
