use std::collections::BTreeMap;

use serde::Serialize;

use super::{Checkpoint, TransferError};
use crate::network::{init_params, is_recurrent_tensor, recurrent_outputs, ModelConfig, ModelParams};
use crate::tensor::Matrix;
use crate::text_labels::Alphabet;

/// Which tensors were copied and which were freshly initialized.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TransferReport {
    pub copied: Vec<String>,
    pub reinitialized: Vec<String>,
    /// Reason per reinitialized tensor.
    pub skipped_reason: BTreeMap<String, String>,
}

/// Rejects transfers between stacks that differ in anything but the head.
pub fn check_compatible(source: &ModelConfig, target: &ModelConfig) -> Result<(), TransferError> {
    fn field<T: PartialEq + ToString>(name: &'static str, s: T, t: T) -> Result<(), TransferError> {
        if s == t {
            Ok(())
        } else {
            Err(TransferError::Incompatible {
                field: name,
                source_value: s.to_string(),
                target_value: t.to_string(),
            })
        }
    }
    field("hidden", source.hidden, target.hidden)?;
    field("num_layers", source.num_layers, target.num_layers)?;
    field("bidirectional", source.bidirectional, target.bidirectional)?;
    field("feature_dim", source.feature_dim, target.feature_dim)
}

/// Builds a target model whose recurrent tensors are copied verbatim from
/// `source` and whose dense head is initialized as [`init_params`] would with
/// `seed`. Source dense tensors are never read.
pub fn transfer_weights(
    source: &Checkpoint,
    target_cfg: &ModelConfig,
    target_alphabet: &Alphabet,
    seed: u64,
) -> Result<(ModelParams<f32>, TransferReport), TransferError> {
    if target_cfg.num_classes != target_alphabet.num_classes() {
        return Err(TransferError::Incompatible {
            field: "num_classes",
            source_value: format!("{} (alphabet {})", target_alphabet.num_classes(), target_alphabet.name()),
            target_value: target_cfg.num_classes.to_string(),
        });
    }
    check_compatible(&source.config, target_cfg)?;
    let mut cfg = target_cfg.clone();
    cfg.seed = seed;
    let mut params: ModelParams<f32> = init_params(&cfg)?;

    // Resolve every copy before touching the target so a mismatch leaves
    // nothing half-written.
    let mut plan = Vec::new();
    let mut report = TransferReport::default();
    for view in params.tensors() {
        if is_recurrent_tensor(&view.name) {
            let src = source.tensor(&view.name).ok_or_else(|| {
                TransferError::Header(format!("source lacks recurrent tensor {}", view.name))
            })?;
            if src.shape != view.shape || src.data.len() != view.data.len() {
                return Err(TransferError::ShapeMismatch {
                    tensor: view.name.clone(),
                    expected: view.shape.clone(),
                    found: src.shape.clone(),
                });
            }
            plan.push((view.name.clone(), &src.data));
            report.copied.push(view.name);
        } else {
            let source_rows = source.config.num_classes;
            let target_rows = cfg.num_classes;
            let reason = if source_rows != target_rows {
                format!("output dimension mismatch: source {source_rows} ≠ target {target_rows}")
            } else {
                format!("output head reinitialized (source {source_rows} = target {target_rows})")
            };
            report.skipped_reason.insert(view.name.clone(), reason);
            report.reinitialized.push(view.name);
        }
    }
    for (name, data) in plan {
        params
            .tensor_mut(&name)
            .expect("name comes from the target tensor list")
            .copy_from_slice(data);
    }
    Ok((params, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    /// Any deviation is an error.
    Strict,
    /// Deviations are reported, not rejected (the target has trained since).
    PostTraining,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerDeviation {
    pub layer: String,
    pub max_abs_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub max_abs_deviation: f64,
    pub layers: Vec<LayerDeviation>,
    /// First recurrent tensor whose values differ bitwise, if any.
    pub first_divergent_tensor: Option<String>,
    pub probes: usize,
}

/// Runs both recurrent stacks in eval mode on every probe and compares the
/// per-layer hidden outputs.
pub fn verify_transfer(
    source_params: &ModelParams<f32>,
    source_cfg: &ModelConfig,
    transferred: &ModelParams<f32>,
    target_cfg: &ModelConfig,
    probes: &[Matrix<f32>],
    mode: VerifyMode,
) -> Result<VerifyReport, TransferError> {
    check_compatible(source_cfg, target_cfg)?;
    let first_divergent_tensor = source_params
        .tensors()
        .into_iter()
        .zip(transferred.tensors())
        .filter(|(s, _)| is_recurrent_tensor(&s.name))
        .find(|(s, t)| {
            s.data.len() != t.data.len()
                || s.data.iter().zip(t.data).any(|(a, b)| a.to_bits() != b.to_bits())
        })
        .map(|(s, _)| s.name);

    let mut per_layer = vec![0.0f64; source_cfg.num_layers];
    for probe in probes {
        let a = recurrent_outputs(source_params, source_cfg, probe)?;
        let b = recurrent_outputs(transferred, target_cfg, probe)?;
        for (dev, (x, y)) in per_layer.iter_mut().zip(a.iter().zip(&b)) {
            let bitwise_equal = x
                .as_slice()
                .iter()
                .zip(y.as_slice())
                .all(|(p, q)| p.to_bits() == q.to_bits());
            let d = if bitwise_equal { 0.0 } else { x.max_abs_diff(y).max(f64::MIN_POSITIVE) };
            *dev = dev.max(d);
        }
    }
    let layers: Vec<LayerDeviation> = per_layer
        .iter()
        .enumerate()
        .map(|(i, &d)| LayerDeviation {
            layer: format!("layer{}", i + 1),
            max_abs_deviation: d,
        })
        .collect();
    let max_abs_deviation = per_layer.iter().copied().fold(0.0, f64::max);
    let report = VerifyReport {
        max_abs_deviation,
        layers,
        first_divergent_tensor,
        probes: probes.len(),
    };
    if mode == VerifyMode::Strict
        && (max_abs_deviation > 0.0 || report.first_divergent_tensor.is_some())
    {
        let tensor = report
            .first_divergent_tensor
            .clone()
            .unwrap_or_else(|| "none".to_string());
        let layer = match &report.first_divergent_tensor {
            Some(t) => t.split('.').next().unwrap_or("layer?").to_string(),
            None => report
                .layers
                .iter()
                .find(|l| l.max_abs_deviation > 0.0)
                .map_or_else(|| "layer?".to_string(), |l| l.layer.clone()),
        };
        return Err(TransferError::VerificationFailed {
            layer,
            tensor,
            deviation: max_abs_deviation,
        });
    }
    Ok(report)
}
