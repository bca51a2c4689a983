use super::CtcError;
use crate::tensor::{log_add, log_sum_exp, Matrix};

/// Largest `C^T` that [`ctc_loss_bruteforce`] will enumerate.
pub const BRUTE_FORCE_MAX_PATHS: u64 = 1_000_000;

const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

/// Target labels interleaved with blanks: `[b, l1, b, l2, …, b]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedLabels {
    pub seq: Vec<usize>,
    pub blank: usize,
}

impl ExtendedLabels {
    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    /// Whether an alignment may jump from position `s - 2` straight to `s`.
    fn can_skip_to(&self, s: usize) -> bool {
        s >= 2 && self.seq[s] != self.blank && self.seq[s] != self.seq[s - 2]
    }
}

pub fn extend_with_blanks(labels: &[usize], blank: usize) -> ExtendedLabels {
    let mut seq = Vec::with_capacity(2 * labels.len() + 1);
    seq.push(blank);
    for &l in labels {
        seq.push(l);
        seq.push(blank);
    }
    ExtendedLabels { seq, blank }
}

/// Log-space forward and backward variables.
///
/// `alpha[t][s]` covers frames `0..=t` including the emission at `t`;
/// `beta[t][s]` covers frames `t+1..T` and excludes the emission at `t`.
/// For every `t`, `logsumexp_s(alpha[t][s] + beta[t][s]) = log p(l|x)`.
#[derive(Clone, Debug)]
pub struct AlphaBeta {
    pub alpha: Matrix<f64>,
    pub beta: Matrix<f64>,
    pub log_likelihood: f64,
    pub extended: ExtendedLabels,
}

#[derive(Clone, Debug)]
pub struct CtcResult {
    /// `−log p(l|x)`; `+∞` when no alignment fits in `T` frames.
    pub neg_log_likelihood: f64,
    /// Gradient of the loss with respect to the pre-softmax logits.
    pub dlogits: Matrix<f64>,
    pub feasible: bool,
}

fn validate(log_probs: &Matrix<f64>, labels: &[usize]) -> Result<usize, CtcError> {
    let (frames, classes) = (log_probs.rows(), log_probs.cols());
    if frames == 0 || classes < 2 {
        return Err(CtcError::EmptyInput { frames, classes });
    }
    let blank = classes - 1;
    if let Some((position, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= blank) {
        return Err(CtcError::InvalidLabel {
            label,
            position,
            blank,
        });
    }
    for (row, r) in log_probs.row_iter().enumerate() {
        let log_sum = log_sum_exp(r);
        if !log_sum.is_finite()
            || (log_sum.abs() > DISTRIBUTION_TOLERANCE)
            || r.iter().any(|v| v.is_nan() || *v == f64::INFINITY)
        {
            return Err(CtcError::InvalidDistribution { row, log_sum });
        }
    }
    Ok(blank)
}

/// Computes the forward/backward lattices for `labels` under `log_probs`.
pub fn alpha_beta(log_probs: &Matrix<f64>, labels: &[usize]) -> Result<AlphaBeta, CtcError> {
    let blank = validate(log_probs, labels)?;
    let ext = extend_with_blanks(labels, blank);
    let t_len = log_probs.rows();
    let s_len = ext.len();
    let ninf = f64::NEG_INFINITY;

    let mut alpha = Matrix::from_vec(t_len, s_len, vec![ninf; t_len * s_len]);
    alpha.set(0, 0, log_probs.get(0, blank));
    if s_len > 1 {
        alpha.set(0, 1, log_probs.get(0, ext.seq[1]));
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut acc = alpha.get(t - 1, s);
            if s >= 1 {
                acc = log_add(acc, alpha.get(t - 1, s - 1));
            }
            if ext.can_skip_to(s) {
                acc = log_add(acc, alpha.get(t - 1, s - 2));
            }
            if acc > ninf {
                alpha.set(t, s, acc + log_probs.get(t, ext.seq[s]));
            }
        }
    }

    let mut beta = Matrix::from_vec(t_len, s_len, vec![ninf; t_len * s_len]);
    beta.set(t_len - 1, s_len - 1, 0.0);
    if s_len > 1 {
        beta.set(t_len - 1, s_len - 2, 0.0);
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let step = |s2: usize| beta.get(t + 1, s2) + log_probs.get(t + 1, ext.seq[s2]);
            let mut acc = step(s);
            if s + 1 < s_len {
                acc = log_add(acc, step(s + 1));
            }
            if s + 2 < s_len && ext.can_skip_to(s + 2) {
                acc = log_add(acc, step(s + 2));
            }
            beta.set(t, s, acc);
        }
    }

    let mut log_likelihood = alpha.get(t_len - 1, s_len - 1);
    if s_len > 1 {
        log_likelihood = log_add(log_likelihood, alpha.get(t_len - 1, s_len - 2));
    }
    Ok(AlphaBeta {
        alpha,
        beta,
        log_likelihood,
        extended: ext,
    })
}

/// CTC negative log-likelihood and its gradient with respect to the logits
/// that produced `log_probs` through a softmax:
/// `∂L/∂z[t][k] = y[t][k] − Σ_{s: l'_s = k} α_t(s)β_t(s) / p`.
///
/// Infeasible targets (more frames needed than available) return `+∞` with a
/// zero gradient and `feasible = false`.
pub fn ctc_forward_backward(log_probs: &Matrix<f64>, labels: &[usize]) -> Result<CtcResult, CtcError> {
    let ab = alpha_beta(log_probs, labels)?;
    let (t_len, classes) = (log_probs.rows(), log_probs.cols());
    if ab.log_likelihood == f64::NEG_INFINITY {
        return Ok(CtcResult {
            neg_log_likelihood: f64::INFINITY,
            dlogits: Matrix::zeros(t_len, classes),
            feasible: false,
        });
    }
    let log_p = ab.log_likelihood;
    let mut dlogits = Matrix::zeros(t_len, classes);
    for t in 0..t_len {
        let row = dlogits.row_mut(t);
        for (k, d) in row.iter_mut().enumerate() {
            *d = log_probs.get(t, k).exp();
        }
        for (s, &k) in ab.extended.seq.iter().enumerate() {
            let occupancy = ab.alpha.get(t, s) + ab.beta.get(t, s) - log_p;
            if occupancy > f64::NEG_INFINITY {
                row[k] -= occupancy.exp();
            }
        }
    }
    Ok(CtcResult {
        neg_log_likelihood: -log_p,
        dlogits,
        feasible: true,
    })
}

/// Reference CTC loss by enumerating all `C^T` frame paths and summing those
/// whose collapse equals `labels`.
pub fn ctc_loss_bruteforce(log_probs: &Matrix<f64>, labels: &[usize]) -> Result<f64, CtcError> {
    let blank = validate(log_probs, labels)?;
    let (t_len, classes) = (log_probs.rows(), log_probs.cols());
    let too_large = CtcError::TooLarge {
        frames: t_len,
        classes,
    };
    let total = (classes as u64)
        .checked_pow(u32::try_from(t_len).map_err(|_| too_large.clone())?)
        .ok_or(too_large.clone())?;
    if total > BRUTE_FORCE_MAX_PATHS {
        return Err(too_large);
    }

    let mut path = vec![0usize; t_len];
    let mut matching = Vec::new();
    let mut collapsed = Vec::with_capacity(t_len);
    for _ in 0..total {
        collapsed.clear();
        let mut prev = None;
        for &k in &path {
            if Some(k) != prev && k != blank {
                collapsed.push(k);
            }
            prev = Some(k);
        }
        if collapsed == labels {
            matching.push(path.iter().enumerate().map(|(t, &k)| log_probs.get(t, k)).sum::<f64>());
        }
        // Odometer increment.
        for slot in path.iter_mut().rev() {
            *slot += 1;
            if *slot < classes {
                break;
            }
            *slot = 0;
        }
    }
    Ok(-log_sum_exp(&matching))
}
