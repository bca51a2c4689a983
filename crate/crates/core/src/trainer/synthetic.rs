//! Deterministic synthetic corpora for desk-scale experiments.
//!
//! Each symbol owns a prototype feature vector derived from
//! `(prototype_seed, symbol)`, so two alphabets generated with the same seed
//! share the prototypes of their common symbols. An utterance renders each
//! symbol as a few noisy copies of its prototype, with silence frames at the
//! edges and between some neighbours (always between identical ones).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{TrainerError, Utterance};
use crate::frontend::{FeatureConfig, FeatureMatrix};
use crate::tensor::Matrix;
use crate::text_labels::Alphabet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub feature_dim: usize,
    pub prototype_seed: u64,
    pub prototype_scale: f64,
    pub noise_std: f64,
    pub min_frames_per_symbol: usize,
    pub max_frames_per_symbol: usize,
    /// Chance of a silence frame between two distinct symbols.
    pub gap_probability: f64,
    pub max_edge_silence: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub min_word_len: usize,
    pub max_word_len: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            feature_dim: 13,
            prototype_seed: 7,
            prototype_scale: 1.0,
            noise_std: 0.3,
            min_frames_per_symbol: 2,
            max_frames_per_symbol: 4,
            gap_probability: 0.25,
            max_edge_silence: 3,
            min_words: 1,
            max_words: 3,
            min_word_len: 2,
            max_word_len: 5,
        }
    }
}

/// Key for the silence prototype; never a valid `char`.
const SILENCE_KEY: u64 = 0x1_0000_0000;

fn prototype(spec: &SyntheticSpec, key: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.prototype_seed);
    rng.set_stream(key);
    (0..spec.feature_dim)
        .map(|_| spec.prototype_scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), TrainerError> {
        let ok = self.feature_dim > 0
            && self.min_frames_per_symbol >= 1
            && self.min_frames_per_symbol <= self.max_frames_per_symbol
            && (0.0..=1.0).contains(&self.gap_probability)
            && self.noise_std >= 0.0
            && self.min_words >= 1
            && self.min_words <= self.max_words
            && self.min_word_len >= 1
            && self.min_word_len <= self.max_word_len;
        if ok {
            Ok(())
        } else {
            Err(TrainerError::InvalidConfig(format!("bad synthetic spec {self:?}")))
        }
    }

    /// Prototype vector for `symbol`.
    pub fn symbol_prototype(&self, symbol: char) -> Vec<f64> {
        prototype(self, u64::from(u32::from(symbol)))
    }

    pub fn silence_prototype(&self) -> Vec<f64> {
        prototype(self, SILENCE_KEY)
    }

    /// Random transcript of words drawn from the alphabet's letters.
    pub fn random_text(&self, alphabet: &Alphabet, rng: &mut impl Rng) -> String {
        let letters: Vec<char> = alphabet.letters().collect();
        let words = rng.random_range(self.min_words..=self.max_words);
        (0..words)
            .map(|_| {
                let len = rng.random_range(self.min_word_len..=self.max_word_len);
                (0..len).map(|_| letters[rng.random_range(0..letters.len())]).collect::<String>()
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Raw (unnormalized) features for `text`.
    pub fn render(&self, text: &str, rng: &mut impl Rng) -> Matrix<f64> {
        let silence = self.silence_prototype();
        let mut frames: Vec<Vec<f64>> = Vec::new();
        let mut push = |proto: &[f64], rng: &mut dyn rand::RngCore| {
            frames.push(
                proto
                    .iter()
                    .map(|&p| p + self.noise_std * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
        };
        for _ in 0..rng.random_range(1..=self.max_edge_silence.max(1)) {
            push(&silence, rng);
        }
        let symbols: Vec<char> = text.chars().collect();
        for (i, &c) in symbols.iter().enumerate() {
            if i > 0 && (symbols[i - 1] == c || rng.random_bool(self.gap_probability)) {
                push(&silence, rng);
            }
            let proto = self.symbol_prototype(c);
            for _ in 0..rng.random_range(self.min_frames_per_symbol..=self.max_frames_per_symbol) {
                push(&proto, rng);
            }
        }
        for _ in 0..rng.random_range(1..=self.max_edge_silence.max(1)) {
            push(&silence, rng);
        }
        Matrix::from_rows(&frames)
    }
}

/// A raw synthetic example, as written to a feature cache.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticItem {
    pub id: String,
    pub text: String,
    pub features: Matrix<f64>,
}

/// `count` random utterances over `alphabet`, deterministic in `seed`.
pub fn synthetic_items(
    alphabet: &Alphabet,
    spec: &SyntheticSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<SyntheticItem>, TrainerError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|i| {
            let text = spec.random_text(alphabet, &mut rng);
            let features = spec.render(&text, &mut rng);
            SyntheticItem {
                id: format!("utt{i:04}"),
                text,
                features,
            }
        })
        .collect())
}

/// Like [`synthetic_items`], normalized and encoded for training.
pub fn synthetic_corpus(
    alphabet: &Alphabet,
    spec: &SyntheticSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<Utterance>, TrainerError> {
    let config = FeatureConfig {
        n_mfcc: spec.feature_dim,
        ..FeatureConfig::default()
    };
    synthetic_items(alphabet, spec, count, seed)?
        .into_iter()
        .map(|item| {
            let raw = FeatureMatrix {
                values: item.features,
                config: config.clone(),
            };
            Utterance::from_raw(item.id, &item.text, &raw, alphabet)
        })
        .collect()
}
