use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::plan::{to_ms, CutReason, SegmentMethod, SegmentPlan};
use super::{SegmentationConfig, SegmentationError};

/// Tiles `[0, track_duration_s]` with segments whose lengths are drawn
/// uniformly (at millisecond resolution) from
/// `[min_random_s, max_random_s]`. The remainder becomes the final segment.
pub fn segment_random(
    track_duration_s: f64,
    config: &SegmentationConfig,
) -> Result<SegmentPlan, SegmentationError> {
    config.validate()?;
    let total_ms = to_ms(track_duration_s);
    if !(track_duration_s > 0.0 && track_duration_s.is_finite()) || total_ms == 0 {
        return Err(SegmentationError::InvalidDuration(track_duration_s));
    }
    let min_ms = to_ms(config.min_random_s);
    let max_ms = to_ms(config.max_random_s);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cuts = Vec::new();
    let mut pos = 0u64;
    loop {
        let len = rng.random_range(min_ms..=max_ms);
        if pos + len >= total_ms {
            break;
        }
        pos += len;
        cuts.push((pos, CutReason::RandomLength));
    }
    SegmentPlan::from_cuts(&cuts, total_ms, SegmentMethod::Random, config.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> SegmentationConfig {
        SegmentationConfig {
            seed,
            ..SegmentationConfig::default()
        }
    }

    #[test]
    fn fixture_duration_tiles_with_bounded_lengths() {
        let plan = segment_random(44.01, &cfg(42)).unwrap();
        let durations = plan.durations_s();
        let sum: f64 = durations.iter().sum();
        assert!((sum - 44.01).abs() < 1e-9);
        for d in &durations[..durations.len() - 1] {
            assert!((4.0..=8.0).contains(d), "{d}");
        }
        assert_eq!(plan.segments().last().unwrap().cut_reason, CutReason::EndOfTrack);
    }

    #[test]
    fn shorter_than_minimum_is_one_segment() {
        let plan = segment_random(3.0, &cfg(1)).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!(plan.segments()[0].end_s(), 3.0);
        assert_eq!(plan.segments()[0].cut_reason, CutReason::EndOfTrack);
    }

    #[test]
    fn same_seed_same_plan() {
        let a = segment_random(123.4, &cfg(9)).unwrap();
        let b = segment_random(123.4, &cfg(9)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = segment_random(123.4, &cfg(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn non_positive_duration_rejected() {
        assert!(segment_random(0.0, &cfg(1)).is_err());
        assert!(segment_random(-2.0, &cfg(1)).is_err());
        assert!(segment_random(f64::NAN, &cfg(1)).is_err());
    }
}
