use std::f32::consts::PI;

use rustfft::{num_complex::Complex32, FftPlanner};

use super::SegmentationError;
use crate::audio::AudioBuffer;

/// Compression constant for `ln(1 + C * |X|)`. Magnitudes are divided by the
/// window sum and by the track's peak sample, so a full-scale sinusoid peaks
/// at 0.5 whatever the playback gain.
pub const LOG_COMPRESSION: f32 = 10.0;

/// Log-compressed magnitude spectrogram, frames centred on `t * hop`.
#[derive(Debug, Clone)]
pub struct LogSpectrogram {
    data: Vec<f32>,
    n_bins: usize,
    n_frames: usize,
    hop_s: f64,
}

impl LogSpectrogram {
    pub fn compute(buffer: &AudioBuffer, window: usize, hop: usize) -> Result<Self, SegmentationError> {
        if window < 2 || hop == 0 {
            return Err(SegmentationError::InvalidConfig(format!(
                "stft window {window} / hop {hop} invalid"
            )));
        }
        let samples = buffer.samples();
        if samples.len() <= window {
            return Err(SegmentationError::BufferTooShort {
                duration_s: buffer.duration_s(),
                needed_s: window as f64 / buffer.sample_rate() as f64,
            });
        }
        let hann: Vec<f32> = (0..window)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f32 / window as f32).cos())
            .collect();
        let n_bins = window / 2 + 1;
        let n_frames = 1 + samples.len() / hop;
        let fft = FftPlanner::<f32>::new().plan_fft_forward(window);
        let mut scratch = vec![Complex32::default(); fft.get_inplace_scratch_len()];
        let mut frame = vec![Complex32::default(); window];
        let mut data = Vec::with_capacity(n_frames * n_bins);
        let half = (window / 2) as isize;
        for t in 0..n_frames {
            let origin = (t * hop) as isize - half;
            for (i, slot) in frame.iter_mut().enumerate() {
                let idx = origin + i as isize;
                let s = if idx >= 0 && (idx as usize) < samples.len() {
                    samples[idx as usize]
                } else {
                    0.0
                };
                *slot = Complex32::new(s * hann[i], 0.0);
            }
            fft.process_with_scratch(&mut frame, &mut scratch);
            data.extend(frame[..n_bins].iter().map(|c| c.norm()));
        }
        let peak = samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
        let scale = if peak > 0.0 {
            LOG_COMPRESSION / (peak * hann.iter().sum::<f32>())
        } else {
            0.0
        };
        for v in &mut data {
            *v = (*v * scale).ln_1p();
        }
        Ok(Self {
            data,
            n_bins,
            n_frames,
            hop_s: hop as f64 / buffer.sample_rate() as f64,
        })
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }
}
