use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::TrainerError;
use crate::frontend::{feature_normalize, read_feature_cache, FeatureConfig, FeatureMatrix, ManifestRow};
use crate::tensor::Matrix;
use crate::text_labels::{encode, normalize_transcript, Alphabet, LabelSeq};

/// Smallest dataset [`split_dataset`] accepts.
pub const MIN_SPLIT_ROWS: usize = 10;

/// One training example: normalized features and target labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub text: String,
    pub labels: LabelSeq,
    /// `T × F`, standardized per utterance.
    pub features: Matrix<f32>,
}

impl Utterance {
    /// Standardizes raw features and encodes `text`.
    pub fn from_raw(
        id: impl Into<String>,
        text: &str,
        raw: &FeatureMatrix,
        alphabet: &Alphabet,
    ) -> Result<Self, TrainerError> {
        Ok(Self {
            id: id.into(),
            text: text.to_string(),
            labels: encode(text, alphabet)?,
            features: feature_normalize(raw).values.cast(),
        })
    }

    pub fn frames(&self) -> usize {
        self.features.rows()
    }

    /// Whether some CTC alignment of the labels fits in the frame count.
    pub fn is_feasible(&self) -> bool {
        self.labels.min_frames() <= self.frames()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum DropReason {
    EmptyTranscript,
    Infeasible { frames: usize, needed: usize },
    Features { message: String },
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DropReason::EmptyTranscript => write!(f, "empty transcript"),
            DropReason::Infeasible { frames, needed } => {
                write!(f, "ctc-infeasible: {needed} frames needed, {frames} available")
            }
            DropReason::Features { message } => write!(f, "features: {message}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DroppedRow {
    pub id: String,
    pub reason: DropReason,
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub utterances: Vec<Utterance>,
    pub dropped: Vec<DroppedRow>,
}

/// Location of the feature cache for a manifest audio path.
pub fn feature_cache_path(features_dir: &Path, audio: &str) -> PathBuf {
    let stem = Path::new(audio)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| audio.to_string());
    features_dir.join(format!("{stem}.mfcc"))
}

/// Drops empty and CTC-infeasible utterances, logging each one.
pub fn filter_feasible(utterances: Vec<Utterance>) -> Dataset {
    let mut out = Dataset::default();
    for u in utterances {
        let reason = if u.labels.is_empty() {
            Some(DropReason::EmptyTranscript)
        } else if !u.is_feasible() {
            Some(DropReason::Infeasible {
                frames: u.frames(),
                needed: u.labels.min_frames(),
            })
        } else {
            None
        };
        match reason {
            Some(reason) => {
                log::warn!("excluding {}: {reason}", u.id);
                out.dropped.push(DroppedRow { id: u.id, reason });
            }
            None => out.utterances.push(u),
        }
    }
    out
}

/// Loads cached features for each manifest row, normalizing transcripts and
/// filtering rows that cannot be trained on.
pub fn load_dataset(
    rows: &[ManifestRow],
    features_dir: &Path,
    alphabet: &Alphabet,
    feature_cfg: &FeatureConfig,
) -> Result<Dataset, TrainerError> {
    let mut loaded = Vec::with_capacity(rows.len());
    let mut failed = Vec::new();
    for row in rows {
        let path = feature_cache_path(features_dir, &row.audio);
        let text = normalize_transcript(&row.text, alphabet);
        let raw = read_feature_cache(&path, feature_cfg)
            .map_err(|e| format!("{}: {e}", path.display()))
            .and_then(|raw| {
                if raw.dim() == feature_cfg.n_mfcc {
                    Ok(raw)
                } else {
                    Err(format!(
                        "{}: {} coefficients per frame, config says {}",
                        path.display(),
                        raw.dim(),
                        feature_cfg.n_mfcc
                    ))
                }
            });
        match raw {
            Ok(raw) => loaded.push(Utterance::from_raw(row.audio.clone(), &text, &raw, alphabet)?),
            Err(message) => {
                let reason = DropReason::Features { message };
                log::warn!("excluding {}: {reason}", row.audio);
                failed.push(DroppedRow {
                    id: row.audio.clone(),
                    reason,
                });
            }
        }
    }
    let mut ds = filter_feasible(loaded);
    ds.dropped.extend(failed);
    Ok(ds)
}

/// Train, validation and test partitions.
pub type Split<T> = (Vec<T>, Vec<T>, Vec<T>);

/// Seeded shuffle, then `⌊p·n⌋` items for validation and test each, with the
/// remainder going to training.
pub fn split_dataset<T: Clone>(
    items: &[T],
    split: [f64; 3],
    seed: u64,
) -> Result<Split<T>, TrainerError> {
    let n = items.len();
    if n < MIN_SPLIT_ROWS {
        return Err(TrainerError::TooFewRows {
            found: n,
            min: MIN_SPLIT_ROWS,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // Products such as 0.7·10 can land just below the integer.
    let count = |p: f64| ((p * n as f64) + 1e-9).floor() as usize;
    let n_val = count(split[1]);
    let n_test = count(split[2]);
    let n_train = n - n_val - n_test;
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_val]),
        pick(&order[n_train + n_val..]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::write_feature_cache;
    use proptest::prelude::*;

    #[test]
    fn reference_split_sizes() {
        let rows: Vec<usize> = (0..100).collect();
        let (a, b, c) = split_dataset(&rows, [0.8, 0.1, 0.1], 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (80, 10, 10));
        let rows: Vec<usize> = (0..12).collect();
        let (a, b, c) = split_dataset(&rows, [0.8, 0.1, 0.1], 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (10, 1, 1));
        assert!(matches!(
            split_dataset(&rows[..9], [0.8, 0.1, 0.1], 1),
            Err(TrainerError::TooFewRows { found: 9, .. })
        ));
    }

    proptest! {
        #[test]
        fn split_is_a_deterministic_partition(n in 10usize..200, seed: u64) {
            let rows: Vec<usize> = (0..n).collect();
            let (a, b, c) = split_dataset(&rows, [0.8, 0.1, 0.1], seed).unwrap();
            let again = split_dataset(&rows, [0.8, 0.1, 0.1], seed).unwrap();
            prop_assert_eq!(&(a.clone(), b.clone(), c.clone()), &again);
            let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, rows);
            prop_assert_eq!(b.len(), n / 10);
            prop_assert_eq!(c.len(), n / 10);
        }
    }

    #[test]
    fn loading_filters_and_reports() {
        let dir = tempfile::tempdir().unwrap();
        let alphabet = Alphabet::builtin("kk").unwrap();
        let fc = FeatureConfig::default();
        let feats = |t: usize| FeatureMatrix {
            values: Matrix::from_fn(t, 13, |r, c| (r * 13 + c) as f64),
            config: fc.clone(),
        };
        write_feature_cache(dir.path().join("a.mfcc"), &feats(10)).unwrap();
        write_feature_cache(dir.path().join("b.mfcc"), &feats(2)).unwrap();
        write_feature_cache(dir.path().join("c.mfcc"), &feats(5)).unwrap();
        let rows = vec![
            ManifestRow::new("wav/a.wav", "Абай!", 1.0),
            ManifestRow::new("wav/b.wav", "алла", 1.0),
            ManifestRow::new("wav/c.wav", "123", 1.0),
            ManifestRow::new("wav/missing.wav", "ал", 1.0),
            ManifestRow::new("wav/d.wav", "ал", 1.0),
        ];
        write_feature_cache(
            dir.path().join("d.mfcc"),
            &FeatureMatrix {
                values: Matrix::zeros(6, 20),
                config: fc.clone(),
            },
        )
        .unwrap();
        let ds = load_dataset(&rows, dir.path(), &alphabet, &fc).unwrap();
        assert_eq!(ds.utterances.len(), 1);
        assert_eq!(ds.utterances[0].text, "абай");
        assert_eq!(ds.utterances[0].frames(), 10);
        let reasons: Vec<(&str, &DropReason)> =
            ds.dropped.iter().map(|d| (d.id.as_str(), &d.reason)).collect();
        assert_eq!(reasons[0], ("wav/b.wav", &DropReason::Infeasible { frames: 2, needed: 5 }));
        assert_eq!(reasons[1], ("wav/c.wav", &DropReason::EmptyTranscript));
        assert!(matches!(reasons[2], ("wav/missing.wav", DropReason::Features { .. })));
        assert!(matches!(reasons[3], ("wav/d.wav", DropReason::Features { .. })));
    }
}
