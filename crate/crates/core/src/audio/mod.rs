//! Audio ingestion: decode WAV, downmix to mono, resample to the analysis rate.
//!
//! Every analysis stage consumes an [`AudioBuffer`]. The original file is never
//! modified; its path travels with the buffer so the final mux can use the
//! untouched audio.

pub mod wav;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default analysis sample rate in Hz.
pub const DEFAULT_ANALYSIS_RATE: u32 = 22_050;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed WAV: {0}")]
    Malformed(String),
    #[error("unsupported WAV encoding (format tag {format}, {bits} bits); expected 16-bit PCM or 32-bit float")]
    UnsupportedEncoding { format: u16, bits: u16 },
    #[error("audio has zero length")]
    ZeroLength,
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid time span [{start_s}, {end_s}]")]
    InvalidSpan { start_s: f64, end_s: f64 },
    #[error("span [{start_s}, {end_s}] exceeds buffer duration {duration_s}")]
    SpanOutOfRange {
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },
}

/// A half-open time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    start_s: f64,
    end_s: f64,
}

impl TimeSpan {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self, AudioError> {
        if !start_s.is_finite() || !end_s.is_finite() || start_s < 0.0 || end_s <= start_s {
            return Err(AudioError::InvalidSpan { start_s, end_s });
        }
        Ok(Self { start_s, end_s })
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn end_s(&self) -> f64 {
        self.end_s
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Immutable mono PCM. Cloning is cheap; samples are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Arc<[f32]>,
    sample_rate: u32,
    source: Option<PathBuf>,
}

impl AudioBuffer {
    /// Builds a buffer, clipping samples into [-1, 1].
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        if samples.is_empty() {
            return Err(AudioError::ZeroLength);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite { index });
        }
        let samples: Vec<f32> = samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect();
        Ok(Self {
            samples: samples.into(),
            sample_rate,
            source: None,
        })
    }

    pub fn with_source(mut self, path: impl Into<PathBuf>) -> Self {
        self.source = Some(path.into());
        self
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel_count(&self) -> u16 {
        1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Path of the file this buffer was decoded from, if any.
    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// Encodes the buffer as a mono 16-bit WAV.
    pub fn to_wav_bytes(&self) -> Vec<u8> {
        wav::encode_pcm16(&self.samples, self.sample_rate)
    }

    /// Returns the samples covered by `span`.
    ///
    /// Boundaries round to the nearest sample, so slicing a partition of the
    /// track yields pieces that share boundary indices exactly. The end may
    /// overshoot the duration by up to one millisecond (segment plans are
    /// stored at millisecond precision) and is clamped.
    pub fn slice_span(&self, span: TimeSpan) -> Result<AudioBuffer, AudioError> {
        let duration_s = self.duration_s();
        let slack = 1e-3 + 0.5 / self.sample_rate as f64;
        if span.start_s >= duration_s || span.end_s > duration_s + slack {
            return Err(AudioError::SpanOutOfRange {
                start_s: span.start_s,
                end_s: span.end_s,
                duration_s,
            });
        }
        let rate = self.sample_rate as f64;
        let start = ((span.start_s * rate).round() as usize).min(self.len());
        let end = ((span.end_s * rate).round() as usize).min(self.len());
        if end <= start {
            return Err(AudioError::InvalidSpan {
                start_s: span.start_s,
                end_s: span.end_s,
            });
        }
        if start == 0 && end == self.len() {
            return Ok(self.clone());
        }
        Ok(AudioBuffer {
            samples: self.samples[start..end].into(),
            sample_rate: self.sample_rate,
            source: self.source.clone(),
        })
    }
}

/// Linear-interpolation resampler.
///
/// The output has `round(len * to / from)` samples; output sample `i` reads the
/// input at position `i * from / to`. Adequate for feature extraction, not for
/// playback.
pub fn resample_linear(samples: &[f32], from: u32, to: u32) -> Vec<f32> {
    if from == to || samples.is_empty() {
        return samples.to_vec();
    }
    let out_len = ((samples.len() as f64) * to as f64 / from as f64).round() as usize;
    let step = from as f64 / to as f64;
    let last = samples.len() - 1;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let idx = pos.floor() as usize;
            if idx >= last {
                return samples[last];
            }
            let frac = (pos - idx as f64) as f32;
            samples[idx] * (1.0 - frac) + samples[idx + 1] * frac
        })
        .collect()
}

/// Decodes a WAV file into a mono buffer at `analysis_rate`.
pub fn load_audio(path: &Path, analysis_rate: u32) -> Result<AudioBuffer, AudioError> {
    if analysis_rate == 0 {
        return Err(AudioError::InvalidSampleRate);
    }
    let bytes = std::fs::read(path).map_err(|source| AudioError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    let buffer = decode_audio(&bytes, analysis_rate)?;
    Ok(buffer.with_source(path))
}

/// Same as [`load_audio`] for WAV bytes already in memory.
pub fn decode_audio(bytes: &[u8], analysis_rate: u32) -> Result<AudioBuffer, AudioError> {
    let data = wav::decode(bytes)?;
    if data.frames() == 0 {
        return Err(AudioError::ZeroLength);
    }
    let mono = data.downmix();
    let resampled = resample_linear(&mono, data.sample_rate, analysis_rate);
    AudioBuffer::new(resampled, analysis_rate)
}
