use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SegmentationError;
use crate::audio::TimeSpan;

/// Why a segment ends where it does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutReason {
    RandomLength,
    SpectralChange,
    BeatCount,
    MaxDuration,
    EndOfTrack,
}

impl CutReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            CutReason::RandomLength => "random_length",
            CutReason::SpectralChange => "spectral_change",
            CutReason::BeatCount => "beat_count",
            CutReason::MaxDuration => "max_duration",
            CutReason::EndOfTrack => "end_of_track",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMethod {
    Random,
    RuleBased,
}

/// Converts seconds to whole milliseconds.
pub fn to_ms(seconds: f64) -> u64 {
    (seconds * 1000.0).round().max(0.0) as u64
}

fn ms_to_s(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

/// One timed segment. Boundaries are held in whole milliseconds so that
/// adjacent segments share boundaries exactly and JSON round-trips losslessly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub index: usize,
    pub start_ms: u64,
    pub end_ms: u64,
    pub cut_reason: CutReason,
}

impl Segment {
    pub fn start_s(&self) -> f64 {
        ms_to_s(self.start_ms)
    }

    pub fn end_s(&self) -> f64 {
        ms_to_s(self.end_ms)
    }

    pub fn duration_s(&self) -> f64 {
        ms_to_s(self.end_ms - self.start_ms)
    }

    pub fn span(&self) -> TimeSpan {
        TimeSpan::new(self.start_s(), self.end_s()).expect("segment spans are validated at construction")
    }
}

/// Contiguous tiling of a track.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentPlan {
    segments: Vec<Segment>,
    track_duration_ms: u64,
    method: SegmentMethod,
    seed: u64,
}

impl SegmentPlan {
    /// Builds a plan from interior cut points (milliseconds, ascending) and
    /// their reasons. The final segment is always `EndOfTrack`.
    pub(crate) fn from_cuts(
        cuts: &[(u64, CutReason)],
        track_duration_ms: u64,
        method: SegmentMethod,
        seed: u64,
    ) -> Result<Self, SegmentationError> {
        let mut segments = Vec::with_capacity(cuts.len() + 1);
        let mut start = 0;
        for &(at, reason) in cuts {
            segments.push(Segment {
                index: segments.len(),
                start_ms: start,
                end_ms: at,
                cut_reason: reason,
            });
            start = at;
        }
        segments.push(Segment {
            index: segments.len(),
            start_ms: start,
            end_ms: track_duration_ms,
            cut_reason: CutReason::EndOfTrack,
        });
        Self::new(segments, track_duration_ms, method, seed)
    }

    /// Validates tiling and reason invariants.
    pub fn new(
        segments: Vec<Segment>,
        track_duration_ms: u64,
        method: SegmentMethod,
        seed: u64,
    ) -> Result<Self, SegmentationError> {
        let bad = |msg: String| Err(SegmentationError::InvalidPlan(msg));
        if segments.is_empty() {
            return bad("plan has no segments".into());
        }
        if segments[0].start_ms != 0 {
            return bad("first segment does not start at 0".into());
        }
        let last = segments.len() - 1;
        for (i, seg) in segments.iter().enumerate() {
            if seg.index != i {
                return bad(format!("segment {i} carries index {}", seg.index));
            }
            if seg.end_ms <= seg.start_ms {
                return bad(format!("segment {i} has non-positive duration"));
            }
            if i < last && segments[i + 1].start_ms != seg.end_ms {
                return bad(format!("gap or overlap after segment {i}"));
            }
            let is_end = seg.cut_reason == CutReason::EndOfTrack;
            if is_end != (i == last) {
                return bad(format!("segment {i} has misplaced reason {:?}", seg.cut_reason));
            }
        }
        if segments[last].end_ms != track_duration_ms {
            return bad("last segment does not end at the track duration".into());
        }
        Ok(Self {
            segments,
            track_duration_ms,
            method,
            seed,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn track_duration_s(&self) -> f64 {
        ms_to_s(self.track_duration_ms)
    }

    pub fn track_duration_ms(&self) -> u64 {
        self.track_duration_ms
    }

    pub fn method(&self) -> SegmentMethod {
        self.method
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn durations_s(&self) -> Vec<f64> {
        self.segments.iter().map(Segment::duration_s).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = PlanDoc {
            method: self.method,
            seed: self.seed,
            track_duration_s: self.track_duration_s(),
            segments: self
                .segments
                .iter()
                .map(|s| SegmentDoc {
                    index: s.index,
                    start_s: s.start_s(),
                    end_s: s.end_s(),
                    duration_s: s.duration_s(),
                    cut_reason: s.cut_reason,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("plan serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, SegmentationError> {
        let doc: PlanDoc =
            serde_json::from_str(text).map_err(|e| SegmentationError::InvalidPlan(e.to_string()))?;
        let segments = doc
            .segments
            .into_iter()
            .map(|s| Segment {
                index: s.index,
                start_ms: to_ms(s.start_s),
                end_ms: to_ms(s.end_s),
                cut_reason: s.cut_reason,
            })
            .collect();
        Self::new(segments, to_ms(doc.track_duration_s), doc.method, doc.seed)
    }

    /// Human-readable listing written next to the JSON.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let method = match self.method {
            SegmentMethod::Random => "random",
            SegmentMethod::RuleBased => "rule-based",
        };
        let _ = writeln!(
            out,
            "Segmentation: {method}, seed {}, {} segments, track {:.3} s",
            self.seed,
            self.segments.len(),
            self.track_duration_s()
        );
        for s in &self.segments {
            let _ = writeln!(
                out,
                "Segment {}: {:.3} - {:.3} s ({:.3} s) [{}]",
                s.index + 1,
                s.start_s(),
                s.end_s(),
                s.duration_s(),
                s.cut_reason.as_str()
            );
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct PlanDoc {
    method: SegmentMethod,
    seed: u64,
    track_duration_s: f64,
    segments: Vec<SegmentDoc>,
}

#[derive(Serialize, Deserialize)]
struct SegmentDoc {
    index: usize,
    start_s: f64,
    end_s: f64,
    duration_s: f64,
    cut_reason: CutReason,
}
