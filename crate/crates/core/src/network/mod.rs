//! Stacked LSTM / BiLSTM acoustic model with a dense output head.
//!
//! Per step: `i, f, o = σ(·)`, `g = tanh(·)`, `c = f⊙c' + i⊙g`,
//! `h = o⊙tanh(c)`, zero initial state. Bidirectional layers concatenate the
//! forward and time-reversed outputs as `[fwd | bwd]`. In training mode each
//! layer's output passes through inverted dropout. The head produces raw
//! logits; [`log_softmax`] turns them into per-frame log-distributions.

mod params;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use params::{
    expected_tensors, init_params, is_recurrent_tensor, LayerParams, LstmLayerParams,
    ModelConfig, ModelParams, TensorView,
};

use crate::tensor::{Matrix, Real};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("forward cache does not match: {0}")]
    CacheMismatch(String),
}

#[inline]
fn sigmoid<S: Real>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Activations of one direction of one layer, indexed by original time.
#[derive(Clone, Debug)]
struct DirectionCache<S> {
    /// `T × 4H`, post-activation gates `[i, f, g, o]`.
    gates: Matrix<S>,
    /// `T × H` cell states.
    cells: Matrix<S>,
    /// `T × H` values of `tanh(c)`.
    tanh_cells: Matrix<S>,
    /// `T × H` hidden outputs.
    hidden: Matrix<S>,
}

#[derive(Clone, Debug)]
struct LayerCache<S> {
    /// Layer input after the previous layer's dropout.
    input: Matrix<S>,
    fwd: DirectionCache<S>,
    bwd: Option<DirectionCache<S>>,
    /// Concatenated hidden outputs before dropout.
    output: Matrix<S>,
    /// Scaled dropout mask (`0` or `1/keep`), training mode only.
    mask: Option<Matrix<S>>,
    /// Output after dropout; feeds the next layer or the head.
    dropped: Matrix<S>,
}

/// Everything [`backward`] needs from a [`forward`] call.
#[derive(Clone, Debug)]
pub struct ForwardCache<S> {
    layers: Vec<LayerCache<S>>,
    train_mode: bool,
    frames: usize,
    fingerprint: (usize, usize, bool, usize, usize),
}

fn fingerprint(cfg: &ModelConfig) -> (usize, usize, bool, usize, usize) {
    (
        cfg.hidden,
        cfg.num_layers,
        cfg.bidirectional,
        cfg.feature_dim,
        cfg.num_classes,
    )
}

impl<S: Real> ForwardCache<S> {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn train_mode(&self) -> bool {
        self.train_mode
    }

    /// Per-layer hidden outputs (`T × R`, before dropout).
    pub fn layer_outputs(&self) -> Vec<&Matrix<S>> {
        self.layers.iter().map(|l| &l.output).collect()
    }
}

fn run_direction<S: Real>(p: &LstmLayerParams<S>, input: &Matrix<S>, reverse: bool) -> DirectionCache<S> {
    let t_len = input.rows();
    let h = p.hidden();
    let mut cache = DirectionCache {
        gates: Matrix::zeros(t_len, 4 * h),
        cells: Matrix::zeros(t_len, h),
        tanh_cells: Matrix::zeros(t_len, h),
        hidden: Matrix::zeros(t_len, h),
    };
    let mut h_prev = vec![S::zero(); h];
    let mut c_prev = vec![S::zero(); h];
    let mut z = vec![S::zero(); 4 * h];
    for step in 0..t_len {
        let t = if reverse { t_len - 1 - step } else { step };
        z.copy_from_slice(&p.bias);
        p.w_input.matvec_acc(input.row(t), &mut z);
        p.w_recurrent.matvec_acc(&h_prev, &mut z);
        for (j, v) in z.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&j) {
                v.tanh()
            } else {
                sigmoid(*v)
            };
        }
        let (gi, rest) = z.split_at(h);
        let (gf, rest) = rest.split_at(h);
        let (gg, go) = rest.split_at(h);
        for k in 0..h {
            let c = gf[k] * c_prev[k] + gi[k] * gg[k];
            let tc = c.tanh();
            c_prev[k] = c;
            h_prev[k] = go[k] * tc;
            cache.tanh_cells.set(t, k, tc);
        }
        cache.gates.row_mut(t).copy_from_slice(&z);
        cache.cells.row_mut(t).copy_from_slice(&c_prev);
        cache.hidden.row_mut(t).copy_from_slice(&h_prev);
    }
    cache
}

fn check_input<S: Real>(cfg: &ModelConfig, params: &ModelParams<S>, features: &Matrix<S>) -> Result<(), NetworkError> {
    cfg.validate()?;
    if features.rows() == 0 {
        return Err(NetworkError::ShapeMismatch("input has no frames".into()));
    }
    if features.cols() != cfg.feature_dim {
        return Err(NetworkError::ShapeMismatch(format!(
            "input has {} features per frame, model expects {}",
            features.cols(),
            cfg.feature_dim
        )));
    }
    params.check_shapes(cfg)
}

/// Runs the recurrent stack and the dense head.
///
/// Returns `T × C` logits (no softmax) and the activation cache. Dropout masks
/// are drawn from `dropout_seed` only when `train_mode` is set; evaluation
/// output does not depend on the seed.
pub fn forward<S: Real>(
    params: &ModelParams<S>,
    cfg: &ModelConfig,
    features: &Matrix<S>,
    train_mode: bool,
    dropout_seed: u64,
) -> Result<(Matrix<S>, ForwardCache<S>), NetworkError> {
    check_input(cfg, params, features)?;
    let t_len = features.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    let keep = cfg.dropout_keep;
    let mut layers: Vec<LayerCache<S>> = Vec::with_capacity(cfg.num_layers);
    let mut input = features.clone();
    for lp in &params.layers {
        let fwd = run_direction(&lp.fwd, &input, false);
        let bwd = lp.bwd.as_ref().map(|b| run_direction(b, &input, true));
        let h = cfg.hidden;
        let width = cfg.layer_output_dim();
        let mut output = Matrix::zeros(t_len, width);
        for t in 0..t_len {
            let row = output.row_mut(t);
            row[..h].copy_from_slice(fwd.hidden.row(t));
            if let Some(b) = &bwd {
                row[h..].copy_from_slice(b.hidden.row(t));
            }
        }
        let (mask, dropped) = if train_mode && keep < 1.0 {
            let scale = S::from_f64(1.0 / keep);
            let mask = Matrix::from_fn(t_len, width, |_, _| {
                if rng.random::<f64>() < keep {
                    scale
                } else {
                    S::zero()
                }
            });
            let mut dropped = output.clone();
            for (d, &m) in dropped.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *d *= m;
            }
            (Some(mask), dropped)
        } else {
            (None, output.clone())
        };
        let next_input = dropped.clone();
        layers.push(LayerCache {
            input,
            fwd,
            bwd,
            output,
            mask,
            dropped,
        });
        input = next_input;
    }

    let mut logits = Matrix::zeros(t_len, cfg.num_classes);
    for t in 0..t_len {
        let row = logits.row_mut(t);
        row.copy_from_slice(&params.dense_b);
        params.dense_w.matvec_acc(input.row(t), row);
    }
    Ok((
        logits,
        ForwardCache {
            layers,
            train_mode,
            frames: t_len,
            fingerprint: fingerprint(cfg),
        },
    ))
}

/// Eval-mode hidden outputs of every recurrent layer (`T × R` each).
pub fn recurrent_outputs<S: Real>(
    params: &ModelParams<S>,
    cfg: &ModelConfig,
    features: &Matrix<S>,
) -> Result<Vec<Matrix<S>>, NetworkError> {
    let (_, cache) = forward(params, cfg, features, false, 0)?;
    Ok(cache.layers.into_iter().map(|l| l.output).collect())
}

/// Row-wise log-softmax with max subtraction.
pub fn log_softmax<S: Real>(logits: &Matrix<S>) -> Matrix<S> {
    let mut out = logits.clone();
    for t in 0..out.rows() {
        let row = out.row_mut(t);
        let m = row.iter().copied().fold(S::neg_infinity(), S::max);
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<S>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

fn backprop_direction<S: Real>(
    p: &LstmLayerParams<S>,
    input: &Matrix<S>,
    cache: &DirectionCache<S>,
    d_hidden: &Matrix<S>,
    reverse: bool,
    grads: &mut LstmLayerParams<S>,
    d_input: &mut Matrix<S>,
) {
    let t_len = input.rows();
    let h = p.hidden();
    let one = S::one();
    let mut dh_next = vec![S::zero(); h];
    let mut dc_next = vec![S::zero(); h];
    let mut dz = vec![S::zero(); 4 * h];
    for step in (0..t_len).rev() {
        let t = if reverse { t_len - 1 - step } else { step };
        let prev = (step > 0).then(|| if reverse { t + 1 } else { t - 1 });
        let gates = cache.gates.row(t);
        let tc = cache.tanh_cells.row(t);
        let dh_out = d_hidden.row(t);
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let dh = dh_out[k] + dh_next[k];
            let dc = dc_next[k] + dh * o * (one - tc[k] * tc[k]);
            let c_prev = prev.map_or(S::zero(), |tp| cache.cells.get(tp, k));
            dz[k] = dc * g * i * (one - i);
            dz[h + k] = dc * c_prev * f * (one - f);
            dz[2 * h + k] = dc * i * (one - g * g);
            dz[3 * h + k] = dh * tc[k] * o * (one - o);
            dc_next[k] = dc * f;
        }
        grads.w_input.outer_acc(&dz, input.row(t));
        if let Some(tp) = prev {
            grads.w_recurrent.outer_acc(&dz, cache.hidden.row(tp));
        }
        for (b, &d) in grads.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        p.w_input.matvec_t_acc(&dz, d_input.row_mut(t));
        dh_next.iter_mut().for_each(|v| *v = S::zero());
        p.w_recurrent.matvec_t_acc(&dz, &mut dh_next);
    }
}

/// Backpropagation through time.
///
/// Given `∂L/∂logits` for the logits returned by the matching [`forward`]
/// call, returns `∂L/∂θ` for every parameter (same layout as the params),
/// including the effect of that call's dropout masks.
pub fn backward<S: Real>(
    params: &ModelParams<S>,
    cfg: &ModelConfig,
    cache: &ForwardCache<S>,
    dlogits: &Matrix<S>,
) -> Result<ModelParams<S>, NetworkError> {
    if cache.fingerprint != fingerprint(cfg) || cache.layers.len() != params.layers.len() {
        return Err(NetworkError::CacheMismatch(
            "cache was produced for a different architecture".into(),
        ));
    }
    params.check_shapes(cfg)?;
    if dlogits.shape() != [cache.frames, cfg.num_classes] {
        return Err(NetworkError::ShapeMismatch(format!(
            "dlogits is {:?}, expected [{}, {}]",
            dlogits.shape(),
            cache.frames,
            cfg.num_classes
        )));
    }
    let t_len = cache.frames;
    let h = cfg.hidden;
    let mut grads = ModelParams::<S>::zeros(cfg);

    let top = &cache.layers.last().expect("at least one layer").dropped;
    let mut d_out = Matrix::zeros(t_len, cfg.layer_output_dim());
    for t in 0..t_len {
        let dl = dlogits.row(t);
        grads.dense_w.outer_acc(dl, top.row(t));
        for (b, &d) in grads.dense_b.iter_mut().zip(dl) {
            *b += d;
        }
        params.dense_w.matvec_t_acc(dl, d_out.row_mut(t));
    }

    for (l, lc) in cache.layers.iter().enumerate().rev() {
        if let Some(mask) = &lc.mask {
            for (d, &m) in d_out.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *d *= m;
            }
        }
        let (d_fwd, d_bwd) = split_directions(&d_out, h, cfg.bidirectional);
        let mut d_input = Matrix::zeros(t_len, lc.input.cols());
        let lp = &params.layers[l];
        let gl = &mut grads.layers[l];
        backprop_direction(&lp.fwd, &lc.input, &lc.fwd, &d_fwd, false, &mut gl.fwd, &mut d_input);
        if let (Some(p), Some(c), Some(g), Some(d)) = (&lp.bwd, &lc.bwd, gl.bwd.as_mut(), &d_bwd) {
            backprop_direction(p, &lc.input, c, d, true, g, &mut d_input);
        }
        d_out = d_input;
    }
    Ok(grads)
}

fn split_directions<S: Real>(d: &Matrix<S>, h: usize, bidirectional: bool) -> (Matrix<S>, Option<Matrix<S>>) {
    if !bidirectional {
        return (d.clone(), None);
    }
    let t_len = d.rows();
    let fwd = Matrix::from_fn(t_len, h, |t, k| d.get(t, k));
    let bwd = Matrix::from_fn(t_len, h, |t, k| d.get(t, h + k));
    (fwd, Some(bwd))
}

#[cfg(test)]
mod tests;
