//! Offline backends. Each is a pure function of its input and seed.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{
    encode_rgb_png, l2_normalize, last_user_text, sha256_hex, BackendError, ChatBackend,
    ChatMessage, EmbeddingBackend, VideoBackend, VideoPayload, VideoRequest,
};
use crate::audio::AudioBuffer;

pub const MOCK_EMBEDDING_DIM: usize = 512;

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}

/// Hash-to-sphere embeddings: the payload hash seeds a Gaussian draw that is
/// then normalised, giving a uniformly distributed unit vector.
#[derive(Debug, Clone)]
pub struct MockEmbedding {
    seed: u64,
    dim: usize,
    forced_audio: Option<Vec<String>>,
}

impl MockEmbedding {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            dim: MOCK_EMBEDDING_DIM,
            forced_audio: None,
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim.max(1);
        self
    }

    /// Makes every audio embedding the normalised sum of these labels' text
    /// embeddings. With one label the audio embedding equals that label's.
    pub fn with_forced_audio(mut self, labels: Vec<String>) -> Self {
        self.forced_audio = Some(labels);
        self
    }

    fn vector(&self, domain: &str, payload: &[u8]) -> Vec<f32> {
        let mut rng =
            ChaCha8Rng::from_seed(digest(&[domain.as_bytes(), &self.seed.to_le_bytes(), payload]));
        let raw: Vec<f32> = (0..self.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        l2_normalize(&raw).unwrap_or_else(|| {
            let mut v = vec![0.0; self.dim];
            v[0] = 1.0;
            v
        })
    }

    pub fn text_vector(&self, text: &str) -> Vec<f32> {
        self.vector("text", text.as_bytes())
    }
}

impl EmbeddingBackend for MockEmbedding {
    fn identity(&self) -> String {
        format!("mock-embed:seed={}:dim={}", self.seed, self.dim)
    }

    fn embed_audio(&self, audio: &AudioBuffer) -> Result<Vec<f32>, BackendError> {
        match &self.forced_audio {
            Some(labels) if !labels.is_empty() => {
                let mut sum = vec![0.0f32; self.dim];
                for label in labels {
                    for (s, x) in sum.iter_mut().zip(self.text_vector(label)) {
                        *s += x;
                    }
                }
                l2_normalize(&sum).ok_or_else(|| BackendError::Malformed {
                    route: "mock".into(),
                    message: "forced labels cancel out".into(),
                })
            }
            _ => Ok(self.vector("audio", &audio.to_wav_bytes())),
        }
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, BackendError> {
        Ok(texts.iter().map(|t| self.text_vector(t)).collect())
    }
}

/// Answers prompts seen before, keyed by the SHA-256 of the last user text.
#[derive(Debug, Clone, Default)]
pub struct ReplayChat {
    entries: HashMap<String, String>,
}

impl ReplayChat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prompt: &str, response: impl Into<String>) {
        self.entries.insert(sha256_hex(prompt.as_bytes()), response.into());
    }

    pub fn with(mut self, prompt: &str, response: impl Into<String>) -> Self {
        self.insert(prompt, response);
        self
    }
}

impl ChatBackend for ReplayChat {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let text = last_user_text(messages).unwrap_or("");
        let key = sha256_hex(text.as_bytes());
        self.entries
            .get(&key)
            .cloned()
            .ok_or(BackendError::NoReplay(key))
    }
}

const SUBJECTS: &[&str] = &[
    "A red fox",
    "Two dancers in yellow coats",
    "An old fisherman",
    "A girl with a paper kite",
    "A silver robot",
    "A flock of herons",
];
const ACTIONS: &[&str] = &[
    "walks slowly",
    "spins in circles",
    "looks up at the sky",
    "runs toward the light",
    "stands perfectly still",
    "waves goodbye",
];
const PLACES: &[&str] = &[
    "across a misty meadow",
    "on a rain-soaked street",
    "beside a frozen lake",
    "inside an empty theatre",
    "under a neon bridge",
    "at the edge of a cliff",
];

/// Produces well-formed scripts: reads "There are N scenes in total." from
/// the prompt and answers with a reasoning preamble followed by N scenes.
/// Conversations carrying audio get a short story instead.
#[derive(Debug, Clone, Default)]
pub struct TemplateChat {
    seed: u64,
}

impl TemplateChat {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn pick<'a>(&self, list: &[&'a str], parts: &[&[u8]]) -> &'a str {
        let seed = self.seed.to_le_bytes();
        let mut all: Vec<&[u8]> = Vec::with_capacity(parts.len() + 1);
        all.push(&seed);
        all.extend_from_slice(parts);
        let d = digest(&all);
        list[d[0] as usize % list.len()]
    }

    fn story(&self, audio: &[u8]) -> String {
        let hero = self.pick(SUBJECTS, &[audio, b"hero"]);
        let place = self.pick(PLACES, &[audio, b"place"]);
        format!(
            "{hero} wakes {place} and hears the song drifting from far away. \
             Following it, they meet strangers who join the journey one by one. \
             At the climax the music swells and the group finally finds its source, \
             a small stage where everyone dances until dawn."
        )
    }
}

/// Reads N from "There are N scenes in total." (also "There is 1 scene").
pub fn scene_count_in(prompt: &str) -> Option<usize> {
    for prefix in ["There are ", "There is "] {
        let mut rest = prompt;
        while let Some(pos) = rest.find(prefix) {
            let after = &rest[pos + prefix.len()..];
            let digits: String = after.chars().take_while(|c| c.is_ascii_digit()).collect();
            if !digits.is_empty() && after[digits.len()..].starts_with(" scene") {
                return digits.parse().ok();
            }
            rest = after;
        }
    }
    None
}

impl ChatBackend for TemplateChat {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let text = last_user_text(messages).unwrap_or("");
        if let Some(audio) = messages.iter().find_map(|m| m.audio()) {
            return Ok(self.story(&audio.wav));
        }
        let n = scene_count_in(text).ok_or_else(|| {
            BackendError::InvalidRequest("template mock found no scene count in the prompt".into())
        })?;
        let mut out = format!(
            "Okay, the song needs {n} scenes. I will write BEGIN SCRIPT before the script \
             and open every scene with SCENE #: as asked.\n</think>\n\nBEGIN SCRIPT\n\n"
        );
        for k in 1..=n {
            let kb = (k as u64).to_le_bytes();
            let subject = self.pick(SUBJECTS, &[text.as_bytes(), &kb, b"s"]);
            let action = self.pick(ACTIONS, &[text.as_bytes(), &kb, b"a"]);
            let place = self.pick(PLACES, &[text.as_bytes(), &kb, b"p"]);
            out.push_str(&format!("SCENE {k}: {subject} {action} {place}.\n\n"));
        }
        out.push_str("END SCRIPT\n");
        Ok(out)
    }
}

/// Solid-colour frames. The colour depends on (prompt hash, seed) and drifts
/// with the frame index. Frame count is `round(duration * fps)` plus a fixed
/// overshoot, imitating models that render a little long.
#[derive(Debug, Clone, Default)]
pub struct PatternVideo {
    pub overshoot_frames: u32,
}

impl PatternVideo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_overshoot(overshoot_frames: u32) -> Self {
        Self { overshoot_frames }
    }

    pub fn frame_color(prompt: &str, seed: u64, index: u32) -> [u8; 3] {
        let d = digest(&[prompt.as_bytes(), &seed.to_le_bytes()]);
        let step = (index % 256) as u8;
        [
            d[0].wrapping_add(step.wrapping_mul(3)),
            d[1].wrapping_add(step.wrapping_mul(5)),
            d[2].wrapping_add(step.wrapping_mul(7)),
        ]
    }
}

impl VideoBackend for PatternVideo {
    fn generate(&self, r: &VideoRequest) -> Result<VideoPayload, BackendError> {
        if !(r.duration_s > 0.0 && r.fps > 0.0 && r.width > 0 && r.height > 0) {
            return Err(BackendError::InvalidRequest(format!(
                "video request needs positive duration, fps and size: {r:?}"
            )));
        }
        let n = (r.duration_s * r.fps).round() as u32 + self.overshoot_frames;
        let pixels = r.width as usize * r.height as usize;
        let mut frames = Vec::with_capacity(n as usize);
        for i in 0..n {
            let c = Self::frame_color(&r.prompt, r.seed, i);
            let rgb: Vec<u8> = c.iter().copied().cycle().take(pixels * 3).collect();
            let png = encode_rgb_png(r.width, r.height, &rgb)
                .map_err(BackendError::InvalidRequest)?;
            frames.push(png);
        }
        Ok(VideoPayload {
            fps: r.fps,
            width: r.width,
            height: r.height,
            frames_png: frames,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::png_dimensions;

    fn cos(a: &[f32], b: &[f32]) -> f64 {
        a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
    }

    #[test]
    fn embedding_is_deterministic_unit_norm() {
        let m = MockEmbedding::new(3);
        let a = m.embed_texts(&["calm".into()]).unwrap();
        let b = m.embed_texts(&["calm".into()]).unwrap();
        assert_eq!(a, b);
        let norm: f64 = a[0].iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert_eq!(a[0].len(), MOCK_EMBEDDING_DIM);
    }

    #[test]
    fn distinct_strings_are_far_apart() {
        let m = MockEmbedding::new(0);
        let texts: Vec<String> = (0..1000).map(|i| format!("label {i}")).collect();
        let v = m.embed_texts(&texts).unwrap();
        let mut worst = f64::MIN;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                worst = worst.max(cos(&v[i], &v[j]));
            }
        }
        assert!(worst < 0.99, "{worst}");
    }

    #[test]
    fn forced_single_label_equals_text_embedding() {
        let label = "Moderate intensity with a clear beat".to_string();
        let m = MockEmbedding::new(1).with_forced_audio(vec![label.clone()]);
        let audio = crate::synth::sine(440.0, 0.5, 8000, 0.5);
        let a = m.embed_audio(&audio).unwrap();
        assert!((cos(&a, &m.text_vector(&label)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn replay_hits_and_misses() {
        let chat = ReplayChat::new().with("prompt", "answer");
        assert_eq!(chat.chat(&[ChatMessage::user("prompt")]).unwrap(), "answer");
        assert!(matches!(
            chat.chat(&[ChatMessage::user("other")]),
            Err(BackendError::NoReplay(_))
        ));
    }

    #[test]
    fn scene_count_extraction() {
        assert_eq!(scene_count_in("x\nThere are 7 scenes in total.\n"), Some(7));
        assert_eq!(scene_count_in("There is 1 scene in total."), Some(1));
        assert_eq!(scene_count_in("There are many scenes"), None);
    }

    #[test]
    fn template_chat_emits_requested_count() {
        let out = TemplateChat::new(0)
            .chat(&[ChatMessage::user("There are 5 scenes in total.")])
            .unwrap();
        assert_eq!(out.matches("\nSCENE ").count(), 5);
        assert!(out.contains("SCENE 5:"));
    }

    #[test]
    fn pattern_video_frame_count_and_determinism() {
        let req = VideoRequest {
            prompt: "a fox".into(),
            duration_s: 2.0,
            width: 8,
            height: 6,
            fps: 12.0,
            seed: 5,
        };
        let a = PatternVideo::new().generate(&req).unwrap();
        assert_eq!(a.frames_png.len(), 24);
        assert_eq!(png_dimensions(&a.frames_png[0]).unwrap(), (8, 6));
        assert_eq!(a, PatternVideo::new().generate(&req).unwrap());
        let other = VideoRequest { seed: 6, ..req.clone() };
        assert_ne!(a.frames_png[0], PatternVideo::new().generate(&other).unwrap().frames_png[0]);
        assert_eq!(PatternVideo::with_overshoot(3).generate(&req).unwrap().frames_png.len(), 27);
    }
}
