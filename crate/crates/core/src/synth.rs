//! Deterministic synthetic signals for tests, benchmarks and demos.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::AudioBuffer;

fn n_samples(duration_s: f64, rate: u32) -> usize {
    (duration_s * rate as f64).round() as usize
}

fn buffer(samples: Vec<f32>, rate: u32) -> AudioBuffer {
    AudioBuffer::new(samples, rate).expect("synthetic signals are finite and non-empty")
}

pub fn sine(freq_hz: f64, duration_s: f64, rate: u32, amplitude: f64) -> AudioBuffer {
    let s = (0..n_samples(duration_s, rate))
        .map(|i| (amplitude * (TAU * freq_hz * i as f64 / rate as f64).sin()) as f32)
        .collect();
    buffer(s, rate)
}

/// A sine that jumps from `f1` to `f2` at `switch_s`, phase-continuous.
pub fn sine_step(f1: f64, f2: f64, switch_s: f64, duration_s: f64, rate: u32) -> AudioBuffer {
    let mut phase = 0.0f64;
    let s = (0..n_samples(duration_s, rate))
        .map(|i| {
            let f = if (i as f64 / rate as f64) < switch_s { f1 } else { f2 };
            let v = (0.5 * phase.sin()) as f32;
            phase += TAU * f / rate as f64;
            v
        })
        .collect();
    buffer(s, rate)
}

/// Silence, then uniform white noise from `onset_s`.
pub fn silence_then_noise(onset_s: f64, duration_s: f64, rate: u32, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (0..n_samples(duration_s, rate))
        .map(|i| {
            if (i as f64 / rate as f64) < onset_s {
                0.0
            } else {
                rng.random_range(-0.5f32..0.5)
            }
        })
        .collect();
    buffer(s, rate)
}

/// Click times `k * 60 / bpm` for `k >= 0` below `duration_s`.
pub fn click_times(bpm: f64, duration_s: f64) -> Vec<f64> {
    let period = 60.0 / bpm;
    (0..)
        .map(|k| k as f64 * period)
        .take_while(|&t| t < duration_s)
        .collect()
}

fn add_clicks(samples: &mut [f32], rate: u32, times: &[f64], amplitude: f64) {
    // 20 ms decaying 1.5 kHz burst
    let len = (0.02 * rate as f64) as usize;
    for &t in times {
        let start = (t * rate as f64).round() as usize;
        for j in 0..len {
            let Some(slot) = samples.get_mut(start + j) else { break };
            let tt = j as f64 / rate as f64;
            *slot += (amplitude * (-tt / 0.004).exp() * (TAU * 1500.0 * tt).sin()) as f32;
        }
    }
}

/// Short tonal clicks at a steady tempo over silence.
pub fn click_track(bpm: f64, duration_s: f64, rate: u32) -> AudioBuffer {
    let mut s = vec![0.0f32; n_samples(duration_s, rate)];
    add_clicks(&mut s, rate, &click_times(bpm, duration_s), 0.8);
    buffer(s, rate)
}

/// Harmonic drone on 110 Hz. `brightness` tilts the partial weights: 0 gives
/// a dark 1/k^2 spectrum, 1 a bright odd-harmonic one.
fn drone_sample(t: f64, brightness: f64) -> f64 {
    let mut v = 0.0;
    for k in 1..=12 {
        let kf = k as f64;
        let dark = 1.0 / (kf * kf);
        let bright = if k % 2 == 1 { 1.0 / kf } else { 0.0 };
        let w = (1.0 - brightness) * dark + brightness * bright;
        v += w * (TAU * 110.0 * kf * t).sin();
    }
    0.25 * v
}

/// Steady featureless drone: no onsets after the start, no spectral change.
pub fn drone(duration_s: f64, rate: u32) -> AudioBuffer {
    let s = (0..n_samples(duration_s, rate))
        .map(|i| drone_sample(i as f64 / rate as f64, 0.0) as f32)
        .collect();
    buffer(s, rate)
}

/// Drone whose timbre switches from dark to bright at `switch_s`.
pub fn timbre_switch_drone(switch_s: f64, duration_s: f64, rate: u32) -> AudioBuffer {
    let s = (0..n_samples(duration_s, rate))
        .map(|i| {
            let t = i as f64 / rate as f64;
            drone_sample(t, if t < switch_s { 0.0 } else { 1.0 }) as f32
        })
        .collect();
    buffer(s, rate)
}

/// Timbre-switching drone with a click pulse on top.
pub fn pulsed_timbre_switch(
    switch_s: f64,
    bpm: f64,
    duration_s: f64,
    rate: u32,
) -> AudioBuffer {
    let mut s: Vec<f32> = timbre_switch_drone(switch_s, duration_s, rate).samples().to_vec();
    add_clicks(&mut s, rate, &click_times(bpm, duration_s), 0.6);
    buffer(s.into_iter().map(|v| v * 0.8).collect(), rate)
}

/// A short "song": drone with a timbre change halfway and a 128 BPM pulse.
pub fn demo_song(duration_s: f64, rate: u32) -> AudioBuffer {
    pulsed_timbre_switch(duration_s / 2.0, 128.0, duration_s, rate)
}
