//! Editor-style segmentation: cut on a sustained spectral change, after a
//! fixed number of beats, or when a segment hits the maximum length.

use super::beats::{detect_beats, BeatGrid};
use super::novelty::{onset_envelope, spectral_change, trailing_threshold};
use super::plan::{to_ms, CutReason, SegmentMethod, SegmentPlan};
use super::stft::LogSpectrogram;
use super::{SegmentationConfig, SegmentationError};
use crate::audio::AudioBuffer;

/// Beats within this fraction of a beat period after a cut belong to the cut.
const BEAT_ATTACH_FRACTION: f64 = 0.25;

/// Intermediate curves, exposed for inspection and tests.
#[derive(Debug, Clone)]
pub struct RuleAnalysis {
    pub hop_s: f64,
    pub spectral_change: Vec<f32>,
    pub beats: Option<BeatGrid>,
}

/// Scans forward in time and cuts where, with at least `min_segment_s`
/// elapsed, the first of these holds: a spectral-change peak above the
/// adaptive threshold, `beats_per_cut` beats since the last cut, or
/// `max_rule_s` elapsed.
pub fn segment_rule_based(
    buffer: &AudioBuffer,
    config: &SegmentationConfig,
) -> Result<SegmentPlan, SegmentationError> {
    segment_rule_based_with_analysis(buffer, config).map(|(plan, _)| plan)
}

pub fn segment_rule_based_with_analysis(
    buffer: &AudioBuffer,
    config: &SegmentationConfig,
) -> Result<(SegmentPlan, RuleAnalysis), SegmentationError> {
    config.validate()?;
    let duration_s = buffer.duration_s();
    if duration_s < config.min_segment_s {
        return Err(SegmentationError::BufferTooShort {
            duration_s,
            needed_s: config.min_segment_s,
        });
    }
    let spec = LogSpectrogram::compute(buffer, config.stft_window, config.stft_hop)?;
    let hop_s = spec.hop_s();
    let frames_for = |secs: f64| ((secs / hop_s).round() as usize).max(1);

    // Beat-tracking failure only disables the beat rule.
    let beats = detect_beats(&onset_envelope(&spec), config.tempo_range_bpm).ok();
    let change = spectral_change(&spec, frames_for(config.change_context_s));
    let threshold_window = frames_for(config.novelty_window_s);
    let peak_radius = frames_for(config.change_context_s);

    let is_change_peak = |t: usize| -> bool {
        let v = change[t];
        if (v as f64) < config.change_floor {
            return false;
        }
        match trailing_threshold(&change, t, threshold_window, config.novelty_threshold_k) {
            Some(th) if v as f64 > th => {}
            _ => return false,
        }
        let left = &change[t.saturating_sub(peak_radius)..t];
        let right = &change[t + 1..(t + 1 + peak_radius).min(change.len())];
        left.iter().all(|&x| x < v) && right.iter().all(|&x| x <= v)
    };

    let beat_times = beats.as_ref().map(|b| b.beat_times_s()).unwrap_or(&[]);
    let attach = beats
        .as_ref()
        .map(|b| BEAT_ATTACH_FRACTION * b.period_s())
        .unwrap_or(0.0);
    let beats_since = |last_s: f64, now_s: f64| {
        beat_times
            .iter()
            .filter(|&&b| b > last_s + attach && b <= now_s + 1e-9)
            .count()
    };

    let track_ms = to_ms(duration_s);
    let max_ms = to_ms(config.max_rule_s);
    let mut cuts: Vec<(u64, CutReason)> = Vec::new();
    let mut last_ms = 0u64;
    for t in 1..spec.n_frames() {
        let now_s = t as f64 * hop_s;
        let now_ms = to_ms(now_s);
        if now_ms >= track_ms {
            break;
        }
        let last_s = last_ms as f64 / 1000.0;
        let elapsed = now_s - last_s;
        if elapsed < config.min_segment_s {
            continue;
        }
        let cut = if is_change_peak(t) {
            Some((now_ms, CutReason::SpectralChange))
        } else if beats.is_some() && beats_since(last_s, now_s) >= config.beats_per_cut as usize {
            Some((now_ms, CutReason::BeatCount))
        } else if elapsed >= config.max_rule_s {
            // Time-based: lands exactly at the limit rather than on a frame.
            let at = last_ms + max_ms;
            (at < track_ms).then_some((at, CutReason::MaxDuration))
        } else {
            None
        };
        if let Some((at, reason)) = cut {
            if at > last_ms {
                cuts.push((at, reason));
                last_ms = at;
            }
        }
    }
    let plan = SegmentPlan::from_cuts(&cuts, track_ms, SegmentMethod::RuleBased, config.seed)?;
    Ok((
        plan,
        RuleAnalysis {
            hop_s,
            spectral_change: change,
            beats,
        },
    ))
}
