use serde::{Deserialize, Serialize};

use super::stft::LogSpectrogram;
use super::{SegmentationConfig, SegmentationError};
use crate::audio::AudioBuffer;

/// Per-frame onset strength. Value `i` describes time `i * hop_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetEnvelope {
    values: Vec<f32>,
    hop_s: f64,
}

impl OnsetEnvelope {
    pub fn new(values: Vec<f32>, hop_s: f64) -> Result<Self, SegmentationError> {
        if !(hop_s > 0.0 && hop_s.is_finite()) {
            return Err(SegmentationError::InvalidConfig(format!("hop {hop_s} s")));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SegmentationError::InvalidConfig(
                "onset envelope values must be finite and non-negative".into(),
            ));
        }
        Ok(Self { values, hop_s })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 * self.hop_s
    }
}

/// Half-wave rectified spectral flux of the log spectrogram, aggregated with
/// an L2 norm over bins. The first frame is 0.
pub fn compute_spectral_novelty(
    buffer: &AudioBuffer,
    config: &SegmentationConfig,
) -> Result<OnsetEnvelope, SegmentationError> {
    let spec = LogSpectrogram::compute(buffer, config.stft_window, config.stft_hop)?;
    Ok(onset_envelope(&spec))
}

pub(crate) fn onset_envelope(spec: &LogSpectrogram) -> OnsetEnvelope {
    let mut values = Vec::with_capacity(spec.n_frames());
    values.push(0.0);
    for t in 1..spec.n_frames() {
        let sq: f32 = spec
            .frame(t)
            .iter()
            .zip(spec.frame(t - 1))
            .map(|(cur, prev)| {
                let d = (cur - prev).max(0.0);
                d * d
            })
            .sum();
        values.push(sq.sqrt());
    }
    OnsetEnvelope {
        values,
        hop_s: spec.hop_s(),
    }
}

/// Contrast between the mean log spectrum of the `context` frames before `t`
/// and the `context` frames from `t` on, as an RMS over bins.
///
/// Unlike frame-to-frame flux this ignores recurring transients (a steady
/// beat looks the same on both sides) and peaks where the sustained timbre
/// changes. Frames without a full context on both sides are 0.
pub(crate) fn spectral_change(spec: &LogSpectrogram, context: usize) -> Vec<f32> {
    let n = spec.n_frames();
    let bins = spec.n_bins();
    let mut out = vec![0.0f32; n];
    if context == 0 || n < 2 * context + 1 {
        return out;
    }
    // Running per-bin sums over [t - context, t) and [t, t + context).
    let mut past = vec![0.0f64; bins];
    let mut future = vec![0.0f64; bins];
    for f in 0..context {
        for (acc, v) in past.iter_mut().zip(spec.frame(f)) {
            *acc += *v as f64;
        }
        for (acc, v) in future.iter_mut().zip(spec.frame(f + context)) {
            *acc += *v as f64;
        }
    }
    let scale = 1.0 / context as f64;
    for (t, slot) in out.iter_mut().enumerate().take(n - context + 1).skip(context) {
        if t > context {
            let leaving_past = spec.frame(t - context - 1);
            let moving = spec.frame(t - 1);
            let entering = spec.frame(t + context - 1);
            for b in 0..bins {
                past[b] += moving[b] as f64 - leaving_past[b] as f64;
                future[b] += entering[b] as f64 - moving[b] as f64;
            }
        }
        let sq: f64 = past
            .iter()
            .zip(&future)
            .map(|(p, f)| {
                let d = (f - p) * scale;
                d * d
            })
            .sum();
        *slot = (sq / bins as f64).sqrt() as f32;
    }
    out
}

/// `mean + k * std` of `values[t - window .. t]` (clamped at 0).
/// Returns `None` when no history is available.
pub(crate) fn trailing_threshold(values: &[f32], t: usize, window: usize, k: f64) -> Option<f64> {
    let start = t.saturating_sub(window);
    let hist = &values[start..t];
    if hist.is_empty() {
        return None;
    }
    let n = hist.len() as f64;
    let mean = hist.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = hist.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    Some(mean + k * var.sqrt())
}
