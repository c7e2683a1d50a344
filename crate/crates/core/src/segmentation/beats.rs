//! Tempo estimation by envelope autocorrelation and beat placement by dynamic
//! programming over the onset envelope.

use serde::{Deserialize, Serialize};

use super::novelty::OnsetEnvelope;
use super::SegmentationError;

/// Minimum normalised autocorrelation at the chosen lag for the envelope to
/// count as periodic.
const MIN_PERIODICITY: f64 = 0.1;
/// Centre of the log-tempo prior used to break octave ties.
const PRIOR_CENTER_BPM: f64 = 120.0;
/// Width of the log-tempo prior, in octaves.
const PRIOR_WIDTH_OCTAVES: f64 = 1.0;
/// Penalty on deviations from the tempo period between consecutive beats.
const TIGHTNESS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatGrid {
    beat_times_s: Vec<f64>,
    tempo_bpm: f64,
}

impl BeatGrid {
    pub fn new(beat_times_s: Vec<f64>, tempo_bpm: f64) -> Result<Self, SegmentationError> {
        if beat_times_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SegmentationError::InvalidConfig(
                "beat times must be strictly ascending".into(),
            ));
        }
        if !(tempo_bpm > 0.0 && tempo_bpm.is_finite()) {
            return Err(SegmentationError::InvalidConfig(format!("tempo {tempo_bpm}")));
        }
        Ok(Self {
            beat_times_s,
            tempo_bpm,
        })
    }

    pub fn beat_times_s(&self) -> &[f64] {
        &self.beat_times_s
    }

    pub fn tempo_bpm(&self) -> f64 {
        self.tempo_bpm
    }

    pub fn period_s(&self) -> f64 {
        60.0 / self.tempo_bpm
    }
}

fn autocorr(centered: &[f64], lag: usize) -> f64 {
    centered[..centered.len() - lag]
        .iter()
        .zip(&centered[lag..])
        .map(|(a, b)| a * b)
        .sum()
}

fn log_tempo_prior(bpm: f64) -> f64 {
    let octaves = (bpm / PRIOR_CENTER_BPM).log2() / PRIOR_WIDTH_OCTAVES;
    (-0.5 * octaves * octaves).exp()
}

/// Estimates the beat period in (fractional) frames.
fn estimate_period(env: &[f64], hop_s: f64, low: f64, high: f64) -> Result<f64, SegmentationError> {
    let n = env.len();
    let min_lag = ((60.0 / (high * hop_s)).floor() as usize).max(1);
    let max_lag = ((60.0 / (low * hop_s)).ceil() as usize).min(n / 2);
    if min_lag >= max_lag {
        return Err(SegmentationError::NoBeats);
    }
    let mean = env.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = env.iter().map(|v| v - mean).collect();
    let energy: f64 = centered.iter().map(|v| v * v).sum();
    if energy <= 1e-12 {
        return Err(SegmentationError::NoBeats);
    }
    let corr: Vec<f64> = (min_lag..=max_lag).map(|lag| autocorr(&centered, lag)).collect();
    let bpm_of = |lag: f64| 60.0 / (lag * hop_s);
    let (best_i, _) = corr
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r / energy * log_tempo_prior(bpm_of((min_lag + i) as f64))))
        .fold((0, f64::NEG_INFINITY), |acc, (i, w)| if w > acc.1 { (i, w) } else { acc });
    if corr[best_i] / energy < MIN_PERIODICITY {
        return Err(SegmentationError::NoBeats);
    }
    let mut lag = (min_lag + best_i) as f64;
    if best_i > 0 && best_i + 1 < corr.len() {
        let (a, b, c) = (corr[best_i - 1], corr[best_i], corr[best_i + 1]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-12 {
            lag += (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    Ok(lag)
}

/// Places beats so that they land on strong onsets while keeping spacing
/// close to `period` frames. Returns frame indices.
fn track_beats(score: &[f64], period: f64) -> Vec<usize> {
    let n = score.len();
    let far = (2.0 * period).round() as usize;
    let near = ((period / 2.0).round() as usize).max(1);
    let mut cum = vec![0.0f64; n];
    let mut back: Vec<Option<usize>> = vec![None; n];
    for t in 0..n {
        let mut best = f64::NEG_INFINITY;
        let mut arg = None;
        if t >= near {
            let lo = t.saturating_sub(far);
            for (tau, c) in cum.iter().enumerate().take(t - near + 1).skip(lo) {
                let ratio = (t - tau) as f64 / period;
                let v = c - TIGHTNESS * ratio.ln().powi(2);
                if v > best {
                    best = v;
                    arg = Some(tau);
                }
            }
        }
        if best > 0.0 {
            cum[t] = score[t] + best;
            back[t] = arg;
        } else {
            cum[t] = score[t];
        }
    }
    // Last beat: the final local maximum of the cumulative score that is not
    // far below the typical maximum.
    let maxima: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&t| cum[t] > cum[t - 1] && cum[t] >= cum[t + 1])
        .collect();
    if maxima.is_empty() {
        return Vec::new();
    }
    let mut vals: Vec<f64> = maxima.iter().map(|&t| cum[t]).collect();
    vals.sort_by(f64::total_cmp);
    let median = vals[vals.len() / 2];
    let Some(&last) = maxima.iter().rev().find(|&&t| cum[t] >= 0.5 * median) else {
        return Vec::new();
    };
    let mut beats = vec![last];
    let mut cur = last;
    while let Some(prev) = back[cur] {
        beats.push(prev);
        cur = prev;
    }
    beats.reverse();
    beats
}

/// Drops leading and trailing beats that sit on negligible onset strength.
fn trim_weak(beats: &mut Vec<usize>, env: &[f64]) {
    let local = |f: usize| {
        let lo = f.saturating_sub(1);
        let hi = (f + 2).min(env.len());
        env[lo..hi].iter().cloned().fold(0.0, f64::max)
    };
    if beats.is_empty() {
        return;
    }
    let mut strengths: Vec<f64> = beats.iter().map(|&b| local(b)).collect();
    strengths.sort_by(f64::total_cmp);
    let floor = 0.1 * strengths[strengths.len() / 2];
    while beats.first().is_some_and(|&b| local(b) < floor) {
        beats.remove(0);
    }
    while beats.last().is_some_and(|&b| local(b) < floor) {
        beats.pop();
    }
}

/// Tempo from beat times: least-squares slope of time against beat number,
/// where beat numbers count skipped beats via the median inter-beat interval.
fn regression_tempo(times: &[f64]) -> Option<f64> {
    if times.len() < 4 {
        return None;
    }
    let mut iois: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    iois.sort_by(f64::total_cmp);
    let median = iois[iois.len() / 2];
    let mut index = 0.0;
    let mut idx = vec![0.0];
    for w in times.windows(2) {
        index += ((w[1] - w[0]) / median).round().max(1.0);
        idx.push(index);
    }
    let n = times.len() as f64;
    let mx = idx.iter().sum::<f64>() / n;
    let my = times.iter().sum::<f64>() / n;
    let cov: f64 = idx.iter().zip(times).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = idx.iter().map(|x| (x - mx).powi(2)).sum();
    (var > 0.0).then(|| 60.0 * var / cov)
}

/// Estimates tempo within `tempo_range_bpm` and places beats.
pub fn detect_beats(
    envelope: &OnsetEnvelope,
    tempo_range_bpm: [f64; 2],
) -> Result<BeatGrid, SegmentationError> {
    let [low, high] = tempo_range_bpm;
    if !(low > 0.0 && high > low && high.is_finite()) {
        return Err(SegmentationError::InvalidConfig(format!(
            "tempo range [{low}, {high}]"
        )));
    }
    if envelope.is_empty() {
        return Err(SegmentationError::NoBeats);
    }
    let hop_s = envelope.hop_s();
    let env: Vec<f64> = envelope.values().iter().map(|&v| v as f64).collect();
    let period = estimate_period(&env, hop_s, low, high)?;

    let mean = env.iter().sum::<f64>() / env.len() as f64;
    let std = (env.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / env.len() as f64).sqrt();
    let score: Vec<f64> = env.iter().map(|v| v / std).collect();
    let mut frames = track_beats(&score, period);
    trim_weak(&mut frames, &env);
    if frames.len() < 2 {
        return Err(SegmentationError::NoBeats);
    }
    let times: Vec<f64> = frames.iter().map(|&f| envelope.time_of(f)).collect();
    let tempo = regression_tempo(&times)
        .filter(|bpm| (low..=high).contains(bpm))
        .unwrap_or(60.0 / (period * hop_s));
    BeatGrid::new(times, tempo.clamp(low, high))
}
