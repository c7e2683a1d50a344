//! Shared inputs for the benchmarks.

use tunereel_core::synth;
use tunereel_core::AudioBuffer;

pub const RATE: u32 = 22050;

/// A one-minute synthetic track with a pulse and a timbre change.
pub fn minute_track() -> AudioBuffer {
    synth::demo_song(60.0, RATE)
}

/// A response in the expected script format with `n` scenes.
pub fn script_response(n: usize) -> String {
    let mut s = String::from("Some thoughts first.\nBEGIN SCRIPT\n");
    for i in 1..=n {
        s.push_str(&format!("SCENE {i}: A dancer crosses a wet street under neon light number {i}.\n"));
    }
    s.push_str("END SCRIPT\n");
    s
}
