//! Rendering one video clip per scene and fitting each clip to its segment.

mod clip;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{png_dimensions, sha256_hex, BackendError, VideoBackend, VideoRequest};
use crate::scripting::VideoScript;
use crate::segmentation::SegmentPlan;

pub use clip::{
    conform_clip, frame_name, scene_dir_name, target_frames, ClipArtifact, ClipManifest,
    CLIP_MANIFEST, FRAME_PATTERN,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneFailure {
    pub scene: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct SceneFailures(pub Vec<SceneFailure>);

impl fmt::Display for SceneFailures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|s| format!("scene {}: {}", s.scene, s.message))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("script has no scenes")]
    EmptyScript,
    #[error("script has {scenes} scenes but the plan has {segments} segments")]
    SceneCountMismatch { scenes: usize, segments: usize },
    #[error("invalid generation settings: {0}")]
    InvalidSettings(String),
    #[error("scene {scene}: {source}")]
    Backend { scene: usize, source: BackendError },
    #[error("scene {scene}: malformed clip: {reason}")]
    MalformedClip { scene: usize, reason: String },
    #[error("scene {scene}: clip has no frames")]
    EmptyClip { scene: usize },
    #[error("scene {scene}: clip has {have} frames, {need} needed (use hold_last_frame to pad)")]
    ClipTooShort { scene: usize, have: usize, need: usize },
    #[error("corrupt clip in {dir}: {reason}")]
    CorruptClip { dir: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("clip generation failed: {0}")]
    Failed(SceneFailures),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformPolicy {
    TrimEnd,
    HoldLastFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSettings {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub conform: ConformPolicy,
    /// Clips requested at once.
    pub concurrency: usize,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            fps: 12.0,
            conform: ConformPolicy::TrimEnd,
            concurrency: 2,
        }
    }
}

impl GenerationSettings {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.width == 0 || self.height == 0 {
            p.push(format!("frame size {}x{} must be positive", self.width, self.height));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            p.push(format!("fps {} must be positive", self.fps));
        }
        if self.concurrency == 0 {
            p.push("concurrency must be at least 1".into());
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRequest {
    pub scene_number: usize,
    pub prompt_text: String,
    pub duration_s: f64,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub seed: u64,
}

impl ClipRequest {
    pub fn prompt_hash(&self) -> String {
        sha256_hex(self.prompt_text.as_bytes())
    }
}

/// Scene text with the style guideline appended.
pub fn scene_prompt(description: &str, style_text: Option<&str>) -> String {
    match style_text.map(str::trim).filter(|s| !s.is_empty()) {
        Some(style) => format!("{} {}", description.trim(), style),
        None => description.trim().to_string(),
    }
}

/// Per-scene seed: the run seed plus the scene number.
pub fn scene_seed(run_seed: u64, scene_number: usize) -> u64 {
    run_seed.wrapping_add(scene_number as u64)
}

/// Requests one clip and stores it under `clips_dir/scene_<n>/`.
pub fn generate_clip(
    request: &ClipRequest,
    backend: &dyn VideoBackend,
    clips_dir: &Path,
) -> Result<ClipArtifact, GenerationError> {
    let scene = request.scene_number;
    let payload = backend
        .generate(&VideoRequest {
            prompt: request.prompt_text.clone(),
            duration_s: request.duration_s,
            width: request.width,
            height: request.height,
            fps: request.fps,
            seed: request.seed,
        })
        .map_err(|source| GenerationError::Backend { scene, source })?;
    let malformed = |reason: String| GenerationError::MalformedClip { scene, reason };
    if payload.frames_png.is_empty() {
        return Err(malformed("zero frames".into()));
    }
    if payload.fps.is_nan() || payload.fps <= 0.0 {
        return Err(malformed(format!("fps {}", payload.fps)));
    }
    for (i, png) in payload.frames_png.iter().enumerate() {
        let dims = png_dimensions(png).map_err(|e| malformed(format!("frame {i}: {e}")))?;
        if dims != (payload.width, payload.height) {
            return Err(malformed(format!(
                "frame {i} is {}x{}, clip is {}x{}",
                dims.0, dims.1, payload.width, payload.height
            )));
        }
    }
    let manifest = ClipManifest {
        scene_number: scene,
        fps: payload.fps,
        frame_count: payload.frames_png.len(),
        frame_pattern: FRAME_PATTERN.into(),
        prompt_hash: request.prompt_hash(),
        seed: request.seed,
        width: payload.width,
        height: payload.height,
    };
    clip::persist_clip(clips_dir, manifest, &payload)
}

/// A stored clip that already answers `request` after conforming.
fn reusable(request: &ClipRequest, clips_dir: &Path) -> Option<ClipArtifact> {
    let dir = clips_dir.join(scene_dir_name(request.scene_number));
    let clip = ClipArtifact::load(&dir).ok()?;
    let m = &clip.manifest;
    let matches = m.prompt_hash == request.prompt_hash()
        && m.seed == request.seed
        && m.fps == request.fps
        && m.frame_count == target_frames(request.duration_s, request.fps);
    matches.then_some(clip)
}

pub fn clip_requests(
    script: &VideoScript,
    plan: &SegmentPlan,
    style_text: Option<&str>,
    settings: &GenerationSettings,
    run_seed: u64,
) -> Result<Vec<ClipRequest>, GenerationError> {
    if script.scenes.is_empty() {
        return Err(GenerationError::EmptyScript);
    }
    if script.scenes.len() != plan.len() {
        return Err(GenerationError::SceneCountMismatch {
            scenes: script.scenes.len(),
            segments: plan.len(),
        });
    }
    let problems = settings.problems();
    if !problems.is_empty() {
        return Err(GenerationError::InvalidSettings(problems.join("; ")));
    }
    Ok(script
        .scenes
        .iter()
        .zip(plan.segments())
        .map(|(scene, seg)| ClipRequest {
            scene_number: scene.number,
            prompt_text: scene_prompt(&scene.description, style_text),
            duration_s: seg.duration_s(),
            width: settings.width,
            height: settings.height,
            fps: settings.fps,
            seed: scene_seed(run_seed, scene.number),
        })
        .collect())
}

/// Renders and conforms one clip per scene, in scene order.
///
/// Each prompt is written to `prompts_dir/scene_<n>.txt` before its request.
/// Clips already on disk that match their request are reused. Scenes that
/// fail are collected and reported together; finished clips stay on disk.
#[allow(clippy::too_many_arguments)]
pub fn generate_all(
    script: &VideoScript,
    plan: &SegmentPlan,
    style_text: Option<&str>,
    backend: &dyn VideoBackend,
    settings: &GenerationSettings,
    run_seed: u64,
    clips_dir: &Path,
    prompts_dir: &Path,
) -> Result<Vec<ClipArtifact>, GenerationError> {
    let requests = clip_requests(script, plan, style_text, settings, run_seed)?;
    let one = |req: &ClipRequest| -> Result<ClipArtifact, GenerationError> {
        if let Some(clip) = reusable(req, clips_dir) {
            return Ok(clip);
        }
        let prompt_path = prompts_dir.join(format!("scene_{}.txt", req.scene_number));
        crate::write_atomic(&prompt_path, req.prompt_text.as_bytes()).map_err(|source| {
            GenerationError::Io {
                path: prompt_path.clone(),
                source,
            }
        })?;
        let raw = generate_clip(req, backend, clips_dir)?;
        conform_clip(&raw, req.duration_s, settings.conform)
    };
    let slots: Vec<Mutex<Option<Result<ClipArtifact, GenerationError>>>> =
        requests.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..settings.concurrency.min(requests.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(req) = requests.get(i) else { break };
                *slots[i].lock().expect("clip slot") = Some(one(req));
            });
        }
    });
    let mut clips = Vec::with_capacity(requests.len());
    let mut failures = Vec::new();
    for (slot, req) in slots.into_iter().zip(&requests) {
        match slot.into_inner().expect("clip slot").expect("every scene visited") {
            Ok(c) => clips.push(c),
            Err(e) => failures.push(SceneFailure {
                scene: req.scene_number,
                message: e.to_string(),
            }),
        }
    }
    if failures.is_empty() {
        Ok(clips)
    } else {
        Err(GenerationError::Failed(SceneFailures(failures)))
    }
}
