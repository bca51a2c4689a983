use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{AudioClip, FrontendError};
use crate::tensor::Matrix;

/// Floor applied to filterbank energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// MFCC front-end settings. The defaults are the classic 25 ms / 10 ms,
/// 26-filter, 13-coefficient ASR configuration at 16 kHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub sample_rate_hz: u32,
    pub preemphasis: f64,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub mel_fmin_hz: f64,
    pub mel_fmax_hz: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16000,
            preemphasis: 0.97,
            window_ms: 25.0,
            hop_ms: 10.0,
            fft_size: 512,
            n_mels: 26,
            n_mfcc: 13,
            mel_fmin_hz: 0.0,
            mel_fmax_hz: 8000.0,
        }
    }
}

impl FeatureConfig {
    pub fn window_samples(&self) -> usize {
        (self.sample_rate_hz as f64 * self.window_ms / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.sample_rate_hz as f64 * self.hop_ms / 1000.0).round() as usize
    }

    pub fn validate(&self) -> Result<(), FrontendError> {
        let bad = |m: String| Err(FrontendError::InvalidConfig(m));
        if self.sample_rate_hz == 0 {
            return bad("sample_rate_hz must be positive".into());
        }
        let window = self.window_samples();
        if window == 0 || self.hop_samples() == 0 {
            return bad("window and hop must span at least one sample".into());
        }
        if self.fft_size < window {
            return bad(format!(
                "fft_size {} is smaller than the {window}-sample window",
                self.fft_size
            ));
        }
        if self.n_mels == 0 || self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad(format!(
                "need 0 < n_mfcc ({}) <= n_mels ({})",
                self.n_mfcc, self.n_mels
            ));
        }
        if !(0.0..self.mel_fmax_hz).contains(&self.mel_fmin_hz)
            || self.mel_fmax_hz > self.sample_rate_hz as f64 / 2.0
        {
            return bad(format!(
                "mel range {}..{} Hz invalid for {} Hz audio",
                self.mel_fmin_hz, self.mel_fmax_hz, self.sample_rate_hz
            ));
        }
        Ok(())
    }
}

/// `T × n_mfcc` feature frames for one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix<f64>,
    pub config: FeatureConfig,
}

impl FeatureMatrix {
    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Number of full frames: `1 + ⌊(n − window) / hop⌋`, or 0 if `n < window`.
pub fn frame_count(n_samples: usize, window: usize, hop: usize) -> usize {
    if n_samples < window {
        0
    } else {
        1 + (n_samples - window) / hop
    }
}

/// Triangular filters over the `fft_size/2 + 1` power-spectrum bins.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    pub weights: Matrix<f64>,
    pub centers_hz: Vec<f64>,
}

/// Filters are evaluated at the exact bin frequencies (not snapped to bins),
/// peak weight 1 at each center.
pub fn mel_filterbank(cfg: &FeatureConfig) -> MelFilterbank {
    let n_bins = cfg.fft_size / 2 + 1;
    let mel_lo = hz_to_mel(cfg.mel_fmin_hz);
    let mel_hi = hz_to_mel(cfg.mel_fmax_hz);
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = cfg.sample_rate_hz as f64 / cfg.fft_size as f64;
    let weights = Matrix::from_fn(cfg.n_mels, n_bins, |m, k| {
        let f = k as f64 * bin_hz;
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        if f > left && f <= center {
            (f - left) / (center - left)
        } else if f > center && f < right {
            (right - f) / (right - center)
        } else {
            0.0
        }
    });
    MelFilterbank {
        weights,
        centers_hz: edges[1..=cfg.n_mels].to_vec(),
    }
}

/// Orthonormal DCT-II matrix of size `n × n`.
pub fn dct_matrix(n: usize) -> Matrix<f64> {
    Matrix::from_fn(n, n, |k, i| {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos()
    })
}

fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Log mel-filterbank energies, `T × n_mels`.
///
/// Pre-emphasis, framing without padding, Hamming window, zero-padded
/// `|FFT|²`, triangular mel filters, then `ln(max(e, 1e-10))`.
pub fn log_mel_energies(clip: &AudioClip, cfg: &FeatureConfig) -> Result<Matrix<f64>, FrontendError> {
    cfg.validate()?;
    if clip.sample_rate_hz() != cfg.sample_rate_hz {
        return Err(FrontendError::RateMismatch {
            clip: clip.sample_rate_hz(),
            config: cfg.sample_rate_hz,
        });
    }
    let window = cfg.window_samples();
    let hop = cfg.hop_samples();
    let x = clip.samples();
    let frames = frame_count(x.len(), window, hop);
    if frames == 0 {
        return Err(FrontendError::TooShort {
            samples: x.len(),
            window,
        });
    }

    let emphasized: Vec<f64> = (0..x.len())
        .map(|i| {
            let prev = if i == 0 { 0.0 } else { x[i - 1] as f64 };
            x[i] as f64 - cfg.preemphasis * prev
        })
        .collect();

    let win = hamming(window);
    let bank = mel_filterbank(cfg);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);
    let n_bins = cfg.fft_size / 2 + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut power = vec![0.0; n_bins];
    let mut out = Matrix::zeros(frames, cfg.n_mels);

    for t in 0..frames {
        let start = t * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = if i < window {
                Complex::new(emphasized[start + i] * win[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (p, b) in power.iter_mut().zip(&buf) {
            *p = b.norm_sqr();
        }
        let row = out.row_mut(t);
        for (m, r) in row.iter_mut().enumerate() {
            let e: f64 = bank
                .weights
                .row(m)
                .iter()
                .zip(&power)
                .map(|(w, p)| w * p)
                .sum();
            *r = e.max(LOG_FLOOR).ln();
        }
    }
    Ok(out)
}

/// MFCC features: log mel energies through an orthonormal DCT-II, first
/// `n_mfcc` coefficients kept.
pub fn mfcc(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix, FrontendError> {
    let log_mel = log_mel_energies(clip, cfg)?;
    let dct = dct_matrix(cfg.n_mels);
    let mut values = Matrix::zeros(log_mel.rows(), cfg.n_mfcc);
    for t in 0..log_mel.rows() {
        let src = log_mel.row(t);
        for (k, v) in values.row_mut(t).iter_mut().enumerate() {
            *v = dct.row(k).iter().zip(src).map(|(a, b)| a * b).sum();
        }
    }
    Ok(FeatureMatrix {
        values,
        config: cfg.clone(),
    })
}

/// Per-utterance, per-coefficient standardization to zero mean and unit
/// (population) variance. Constant columns, and every column of a single-frame
/// matrix, become zero.
pub fn feature_normalize(fm: &FeatureMatrix) -> FeatureMatrix {
    let rows = fm.values.rows();
    let cols = fm.values.cols();
    let mut out = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let column: Vec<f64> = (0..rows).map(|r| fm.values.get(r, c)).collect();
        let first = column.first().copied().unwrap_or(0.0);
        if rows < 2 || column.iter().all(|&v| v == first) {
            continue;
        }
        let mean = column.iter().sum::<f64>() / rows as f64;
        let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
        if var <= 1e-24 * mean.abs().max(1.0).powi(2) {
            continue;
        }
        let inv_std = 1.0 / var.sqrt();
        for (r, v) in column.iter().enumerate() {
            out.set(r, c, (v - mean) * inv_std);
        }
    }
    FeatureMatrix {
        values: out,
        config: fm.config.clone(),
    }
}
