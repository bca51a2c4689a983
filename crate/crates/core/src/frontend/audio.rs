use std::f64::consts::PI;
use std::path::Path;

use super::FrontendError;

/// Mono audio with amplitudes in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self, FrontendError> {
        if sample_rate_hz == 0 {
            return Err(FrontendError::InvalidAudio("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(FrontendError::InvalidAudio("clip has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(FrontendError::InvalidAudio(format!(
                "sample {i} is not finite"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

const WAVE_FORMAT_PCM: u16 = 1;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decodes a RIFF/WAVE PCM16 mono byte buffer.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, FrontendError> {
    if bytes.len() < 12 {
        return Err(if bytes.starts_with(b"RIFF") || bytes.is_empty() {
            FrontendError::Truncated("RIFF header")
        } else {
            FrontendError::NotWave
        });
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(FrontendError::NotWave);
    }

    let mut pos = 12;
    let mut fmt: Option<(u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(FrontendError::Truncated("fmt chunk"));
                }
                let mut format = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                if format == WAVE_FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(FrontendError::Truncated("fmt extension"));
                    }
                    // First two bytes of the sub-format GUID carry the format tag.
                    format = u16_at(bytes, body + 24);
                }
                if format != WAVE_FORMAT_PCM {
                    return Err(FrontendError::NotPcm(format));
                }
                if channels != 1 {
                    return Err(FrontendError::UnsupportedChannels(channels));
                }
                if bits != 16 {
                    return Err(FrontendError::UnsupportedBitDepth(bits));
                }
                fmt = Some((format, rate, channels));
            }
            b"data" => {
                let (_, rate, _) = fmt.ok_or(FrontendError::MissingChunk("fmt"))?;
                if body + size > bytes.len() {
                    return Err(FrontendError::Truncated("data chunk"));
                }
                if !size.is_multiple_of(2) {
                    return Err(FrontendError::Truncated("odd byte count in 16-bit data"));
                }
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
                    .collect();
                return AudioClip::new(samples, rate);
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = body + size + (size & 1);
    }
    Err(match fmt {
        None => FrontendError::MissingChunk("fmt"),
        Some(_) if pos != bytes.len() => FrontendError::Truncated("chunk header"),
        Some(_) => FrontendError::MissingChunk("data"),
    })
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, FrontendError> {
    parse_wav(&std::fs::read(path)?)
}

/// Encodes a clip as PCM16 mono WAV. Samples are clamped to `[-1, 1)`.
pub fn wav_bytes(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), FrontendError> {
    std::fs::write(path, wav_bytes(clip))?;
    Ok(())
}

const SINC_ZERO_CROSSINGS: f64 = 16.0;
const KAISER_BETA: f64 = 8.6;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser(u: f64) -> f64 {
    // u in [-1, 1]
    if u.abs() >= 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / bessel_i0(KAISER_BETA)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Sample count after [`resample`]: `round(n · target / source)`, at least 1
/// for non-empty input.
pub fn resampled_len(n: usize, source_hz: u32, target_hz: u32) -> usize {
    if source_hz == target_hz || n == 0 {
        return n;
    }
    ((n as u64 * target_hz as u64 + source_hz as u64 / 2) / source_hz as u64).max(1) as usize
}

/// Band-limited resampling with a Kaiser-windowed sinc kernel spanning
/// 16 zero crossings per side.
///
/// Output length is `round(n · target / source)`. Equal rates return the input
/// unchanged. When downsampling the kernel cutoff moves to the target Nyquist.
pub fn resample(clip: &AudioClip, target_hz: u32) -> Result<AudioClip, FrontendError> {
    if target_hz == 0 {
        return Err(FrontendError::InvalidAudio("target rate must be positive".into()));
    }
    let source_hz = clip.sample_rate_hz;
    if source_hz == target_hz {
        return Ok(clip.clone());
    }
    let n_in = clip.samples.len();
    let out_len = resampled_len(n_in, source_hz, target_hz);
    let step = source_hz as f64 / target_hz as f64;
    let cutoff = (target_hz as f64 / source_hz as f64).min(1.0);
    let half_width = SINC_ZERO_CROSSINGS / cutoff;

    let x = &clip.samples;
    let samples = (0..out_len)
        .map(|j| {
            let center = j as f64 * step;
            let lo = (center - half_width).ceil().max(0.0) as usize;
            let hi = ((center + half_width).floor() as usize).min(n_in - 1);
            let mut acc = 0.0;
            for (n, &xn) in x.iter().enumerate().take(hi + 1).skip(lo) {
                let d = center - n as f64;
                acc += xn as f64 * cutoff * sinc(cutoff * d) * kaiser(d / half_width);
            }
            acc as f32
        })
        .collect();
    AudioClip::new(samples, target_hz)
}
