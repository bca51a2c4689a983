use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NetworkError;
use crate::tensor::{Matrix, Real};

/// Architecture and regularization settings for the recurrent stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: usize,
    pub num_layers: usize,
    pub bidirectional: bool,
    pub dropout_keep: f64,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Two 128-unit unidirectional layers with dropout keep 0.5.
    pub fn new(feature_dim: usize, num_classes: usize) -> Self {
        Self {
            hidden: 128,
            num_layers: 2,
            bidirectional: false,
            dropout_keep: 0.5,
            feature_dim,
            num_classes,
            seed: 0,
        }
    }

    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Width of each layer's output (and of the dense head's input).
    pub fn layer_output_dim(&self) -> usize {
        self.hidden * self.directions()
    }

    pub fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.feature_dim
        } else {
            self.layer_output_dim()
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.hidden == 0 || self.num_layers == 0 || self.feature_dim == 0 {
            return Err(NetworkError::InvalidConfig(
                "hidden, num_layers and feature_dim must be positive".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(NetworkError::InvalidConfig(
                "need at least one symbol plus the blank".into(),
            ));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(NetworkError::InvalidConfig(format!(
                "dropout_keep {} outside (0, 1]",
                self.dropout_keep
            )));
        }
        Ok(())
    }
}

/// One LSTM direction. Gate blocks are stacked `[input, forget, cell, output]`
/// along the rows of every tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerParams<S> {
    /// `4H × D`
    pub w_input: Matrix<S>,
    /// `4H × H`
    pub w_recurrent: Matrix<S>,
    /// `4H`
    pub bias: Vec<S>,
}

impl<S: Real> LstmLayerParams<S> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            w_input: Matrix::zeros(4 * hidden, input),
            w_recurrent: Matrix::zeros(4 * hidden, hidden),
            bias: vec![S::zero(); 4 * hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_recurrent.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.cols()
    }
}

/// A recurrent layer: forward direction plus the backward one for BiLSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<S> {
    pub fwd: LstmLayerParams<S>,
    pub bwd: Option<LstmLayerParams<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<S> {
    pub layers: Vec<LayerParams<S>>,
    /// `C × R`
    pub dense_w: Matrix<S>,
    /// `C`
    pub dense_b: Vec<S>,
}

/// Borrowed view of one named tensor.
#[derive(Debug)]
pub struct TensorView<'a, S> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [S],
}

fn direction_tag(backward: bool) -> &'static str {
    if backward {
        "bwd"
    } else {
        "fwd"
    }
}

fn lstm_views<'a, S>(
    out: &mut Vec<TensorView<'a, S>>,
    prefix: String,
    p: &'a LstmLayerParams<S>,
) where
    S: Real,
{
    out.push(TensorView {
        name: format!("{prefix}.w_input"),
        shape: p.w_input.shape().to_vec(),
        data: p.w_input.as_slice(),
    });
    out.push(TensorView {
        name: format!("{prefix}.w_recurrent"),
        shape: p.w_recurrent.shape().to_vec(),
        data: p.w_recurrent.as_slice(),
    });
    out.push(TensorView {
        name: format!("{prefix}.bias"),
        shape: vec![p.bias.len()],
        data: &p.bias,
    });
}

/// True for tensors that belong to the recurrent stack (`layer*`).
pub fn is_recurrent_tensor(name: &str) -> bool {
    name.starts_with("layer")
}

/// Canonical tensor names and shapes for `cfg`, in storage order.
pub fn expected_tensors(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let h = cfg.hidden;
    let mut out = Vec::new();
    for layer in 0..cfg.num_layers {
        let d = cfg.layer_input_dim(layer);
        for dir in 0..cfg.directions() {
            let prefix = format!("layer{}.{}", layer + 1, direction_tag(dir == 1));
            out.push((format!("{prefix}.w_input"), vec![4 * h, d]));
            out.push((format!("{prefix}.w_recurrent"), vec![4 * h, h]));
            out.push((format!("{prefix}.bias"), vec![4 * h]));
        }
    }
    out.push(("dense.w".to_string(), vec![cfg.num_classes, cfg.layer_output_dim()]));
    out.push(("dense.b".to_string(), vec![cfg.num_classes]));
    out
}

impl<S: Real> ModelParams<S> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let layers = (0..cfg.num_layers)
            .map(|l| {
                let d = cfg.layer_input_dim(l);
                LayerParams {
                    fwd: LstmLayerParams::zeros(cfg.hidden, d),
                    bwd: cfg
                        .bidirectional
                        .then(|| LstmLayerParams::zeros(cfg.hidden, d)),
                }
            })
            .collect();
        Self {
            layers,
            dense_w: Matrix::zeros(cfg.num_classes, cfg.layer_output_dim()),
            dense_b: vec![S::zero(); cfg.num_classes],
        }
    }

    /// Named tensors in canonical order (`layer{n}.{fwd,bwd}.*`, then `dense.*`).
    pub fn tensors(&self) -> Vec<TensorView<'_, S>> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            lstm_views(&mut out, format!("layer{}.fwd", i + 1), &layer.fwd);
            if let Some(bwd) = &layer.bwd {
                lstm_views(&mut out, format!("layer{}.bwd", i + 1), bwd);
            }
        }
        out.push(TensorView {
            name: "dense.w".into(),
            shape: self.dense_w.shape().to_vec(),
            data: self.dense_w.as_slice(),
        });
        out.push(TensorView {
            name: "dense.b".into(),
            shape: vec![self.dense_b.len()],
            data: &self.dense_b,
        });
        out
    }

    /// Mutable slices in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [S]> {
        let mut out: Vec<&mut [S]> = Vec::new();
        for layer in &mut self.layers {
            let dirs = std::iter::once(&mut layer.fwd).chain(layer.bwd.as_mut());
            for p in dirs {
                out.push(p.w_input.as_mut_slice());
                out.push(p.w_recurrent.as_mut_slice());
                out.push(&mut p.bias);
            }
        }
        out.push(self.dense_w.as_mut_slice());
        out.push(&mut self.dense_b);
        out
    }

    /// Mutable access to a tensor by canonical name.
    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [S]> {
        let index = self.tensors().iter().position(|t| t.name == name)?;
        self.tensors_mut().into_iter().nth(index)
    }

    pub fn tensor(&self, name: &str) -> Option<&[S]> {
        self.tensors()
            .into_iter()
            .find(|t| t.name == name)
            .map(|t| t.data)
    }

    /// Checks that every tensor has the shape `cfg` implies.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<(), NetworkError> {
        let expected = expected_tensors(cfg);
        let actual = self.tensors();
        if expected.len() != actual.len() {
            return Err(NetworkError::ShapeMismatch(format!(
                "expected {} tensors, found {}",
                expected.len(),
                actual.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(&actual) {
            if *name != t.name || *shape != t.shape {
                return Err(NetworkError::ShapeMismatch(format!(
                    "tensor {} has shape {:?}, expected {name} with shape {shape:?}",
                    t.name, t.shape
                )));
            }
        }
        Ok(())
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn cast<T: Real>(&self) -> ModelParams<T> {
        let cast_lstm = |p: &LstmLayerParams<S>| LstmLayerParams {
            w_input: p.w_input.cast(),
            w_recurrent: p.w_recurrent.cast(),
            bias: p.bias.iter().map(|v| T::from_f64(v.as_f64())).collect(),
        };
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    fwd: cast_lstm(&l.fwd),
                    bwd: l.bwd.as_ref().map(cast_lstm),
                })
                .collect(),
            dense_w: self.dense_w.cast(),
            dense_b: self.dense_b.iter().map(|v| T::from_f64(v.as_f64())).collect(),
        }
    }

    /// `self += other · scale`
    pub fn add_scaled(&mut self, other: &Self, scale: S) {
        let others = other.tensors();
        for (dst, src) in self.tensors_mut().into_iter().zip(others) {
            for (d, &s) in dst.iter_mut().zip(src.data) {
                *d += s * scale;
            }
        }
    }

    pub fn scale(&mut self, factor: S) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// Euclidean norm over every parameter, accumulated in `f64`.
    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v.as_f64() * v.as_f64())
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

fn glorot_fill<S: Real>(rng: &mut ChaCha8Rng, data: &mut [S], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in data {
        *v = S::from_f64(limit * (2.0 * rng.random::<f64>() - 1.0));
    }
}

/// Random initialization, deterministic in `cfg.seed`.
///
/// Weights are drawn from `U(±√(6/(fan_in+fan_out)))` per tensor, biases are
/// zero except the forget-gate block which starts at 1. Tensors are filled in
/// canonical order, so the dense head always consumes the same random stream
/// position for a given architecture.
pub fn init_params<S: Real>(cfg: &ModelConfig) -> Result<ModelParams<S>, NetworkError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::<S>::zeros(cfg);
    let h = cfg.hidden;
    for layer in &mut params.layers {
        let dirs = std::iter::once(&mut layer.fwd).chain(layer.bwd.as_mut());
        for p in dirs {
            let d = p.input_dim();
            glorot_fill(&mut rng, p.w_input.as_mut_slice(), d, 4 * h);
            glorot_fill(&mut rng, p.w_recurrent.as_mut_slice(), h, 4 * h);
            for b in &mut p.bias[h..2 * h] {
                *b = S::one();
            }
        }
    }
    glorot_fill(
        &mut rng,
        params.dense_w.as_mut_slice(),
        cfg.layer_output_dim(),
        cfg.num_classes,
    );
    Ok(params)
}
