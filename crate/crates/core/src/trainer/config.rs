use serde::{Deserialize, Serialize};

use super::TrainerError;
use crate::ctc::{beam_search_decode, greedy_decode};
use crate::tensor::Matrix;

/// Decoder used for epoch-level LER.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Decoder {
    Greedy,
    Beam { width: usize },
}

impl Decoder {
    pub fn decode(&self, log_probs: &Matrix<f64>) -> Vec<usize> {
        match *self {
            Decoder::Greedy => greedy_decode(log_probs),
            Decoder::Beam { width } => {
                beam_search_decode(log_probs, width).expect("width checked by TrainConfig::validate")
            }
        }
    }
}

/// Optimization settings. [`Default`] gives the reference recipe: learning
/// rate 0.0005, momentum 0.9, batches of 4, 500 epochs, keep probability 0.5,
/// an 80/10/10 split and global-norm clipping at 5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_keep: f64,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    /// `None` disables clipping.
    pub grad_clip_norm: Option<f64>,
    pub seed: u64,
    pub eval_decoder: Decoder,
    /// Reuse the same dropout masks every epoch.
    pub fixed_dropout_seed: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0005,
            momentum: 0.9,
            batch_size: 4,
            epochs: 500,
            dropout_keep: 0.5,
            split: [0.8, 0.1, 0.1],
            grad_clip_norm: Some(5.0),
            seed: 0,
            eval_decoder: Decoder::Greedy,
            fixed_dropout_seed: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        let bad = |m: String| Err(TrainerError::InvalidConfig(m));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate {} must be finite and non-negative", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return bad(format!("dropout_keep {} outside (0, 1]", self.dropout_keep));
        }
        if self.split.iter().any(|&p| !(0.0..=1.0).contains(&p))
            || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(format!("split {:?} must be fractions summing to 1", self.split));
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return bad(format!("grad_clip_norm {c} must be positive"));
            }
        }
        if let Decoder::Beam { width: 0 } = self.eval_decoder {
            return bad("beam width must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_recipe() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 0.0005);
        assert_eq!(c.momentum, 0.9);
        assert_eq!(c.batch_size, 4);
        assert_eq!(c.epochs, 500);
        assert_eq!(c.dropout_keep, 0.5);
        assert_eq!(c.split, [0.8, 0.1, 0.1]);
        assert_eq!(c.grad_clip_norm, Some(5.0));
        assert_eq!(c.eval_decoder, Decoder::Greedy);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let with = |f: fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            c.validate()
        };
        assert!(with(|c| c.split = [0.8, 0.1, 0.2]).is_err());
        assert!(with(|c| c.momentum = 1.0).is_err());
        assert!(with(|c| c.batch_size = 0).is_err());
        assert!(with(|c| c.learning_rate = f64::NAN).is_err());
        assert!(with(|c| c.dropout_keep = 0.0).is_err());
        assert!(with(|c| c.grad_clip_norm = Some(0.0)).is_err());
        assert!(with(|c| c.eval_decoder = Decoder::Beam { width: 0 }).is_err());
        assert!(with(|c| c.learning_rate = 0.0).is_ok());
    }
}
