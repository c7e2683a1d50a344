//! Splitting a track into an ordered, contiguous plan of segments.
//!
//! Two methods are available: [`segment_random`] draws segment lengths from a
//! seeded uniform distribution, and [`segment_rule_based`] imitates an editor
//! cutting on timbre changes, on the beat, or at a maximum shot length.

mod beats;
mod novelty;
mod plan;
mod random;
mod rules;
mod stft;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use beats::{detect_beats, BeatGrid};
pub use novelty::{compute_spectral_novelty, OnsetEnvelope};
pub use plan::{to_ms, CutReason, Segment, SegmentMethod, SegmentPlan};
pub use random::segment_random;
pub use rules::{segment_rule_based, segment_rule_based_with_analysis, RuleAnalysis};
pub use stft::LogSpectrogram;

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("invalid segmentation config: {0}")]
    InvalidConfig(String),
    #[error("track duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("buffer of {duration_s:.3} s is too short (need at least {needed_s:.3} s)")]
    BufferTooShort { duration_s: f64, needed_s: f64 },
    #[error("no detectable beats")]
    NoBeats,
    #[error("invalid segment plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub min_random_s: f64,
    pub max_random_s: f64,
    pub max_rule_s: f64,
    pub beats_per_cut: u32,
    pub min_segment_s: f64,
    /// Multiplier on the sliding-window standard deviation of the spectral
    /// change curve.
    pub novelty_threshold_k: f64,
    /// Length of the trailing window for the adaptive threshold.
    pub novelty_window_s: f64,
    /// Half-width of the before/after comparison in the spectral change curve.
    pub change_context_s: f64,
    /// Spectral-change values below this never cut, whatever the threshold.
    pub change_floor: f64,
    pub tempo_range_bpm: [f64; 2],
    pub stft_window: usize,
    pub stft_hop: usize,
    pub seed: u64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            min_random_s: 4.0,
            max_random_s: 8.0,
            max_rule_s: 7.0,
            beats_per_cut: 8,
            min_segment_s: 2.0,
            novelty_threshold_k: 3.0,
            novelty_window_s: 5.0,
            change_context_s: 1.0,
            change_floor: 0.005,
            tempo_range_bpm: [60.0, 200.0],
            stft_window: 2048,
            stft_hop: 512,
            seed: 0,
        }
    }
}

impl SegmentationConfig {
    /// Lists every violated constraint.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(self.min_random_s > 0.0 && self.min_random_s <= self.max_random_s) {
            p.push(format!(
                "need 0 < min_random_s ({}) <= max_random_s ({})",
                self.min_random_s, self.max_random_s
            ));
        }
        if !(self.min_segment_s > 0.0 && self.max_rule_s > self.min_segment_s) {
            p.push(format!(
                "need max_rule_s ({}) > min_segment_s ({}) > 0",
                self.max_rule_s, self.min_segment_s
            ));
        }
        if self.beats_per_cut == 0 {
            p.push("beats_per_cut must be at least 1".into());
        }
        if self.novelty_threshold_k.is_nan() || self.novelty_threshold_k < 0.0 {
            p.push("novelty_threshold_k must be non-negative".into());
        }
        if !(self.novelty_window_s > 0.0 && self.change_context_s > 0.0) {
            p.push("novelty_window_s and change_context_s must be positive".into());
        }
        let [lo, hi] = self.tempo_range_bpm;
        if !(lo > 0.0 && hi > lo) {
            p.push(format!("tempo range [{lo}, {hi}] must satisfy 0 < low < high"));
        }
        if self.stft_window < 2 || self.stft_hop == 0 || self.stft_hop > self.stft_window {
            p.push(format!(
                "stft window {} / hop {} invalid",
                self.stft_window, self.stft_hop
            ));
        }
        p
    }

    pub fn validate(&self) -> Result<(), SegmentationError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SegmentationError::InvalidConfig(problems.join("; ")))
        }
    }
}
