//! Joining conformed clips in scene order and laying the original audio
//! under them.

use std::fs;
use std::io::ErrorKind;
use std::path::{Component, Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::wav;
use crate::generation::{frame_name, ClipArtifact, FRAME_PATTERN};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("no clips to assemble")]
    NoClips,
    #[error("clip for scene {0} is missing")]
    MissingClip(usize),
    #[error("scene {0} has more than one clip")]
    DuplicateClip(usize),
    #[error("clip for scene {scene} is missing frame {path}")]
    MissingFrame { scene: usize, path: PathBuf },
    #[error("clips mix frame rates ({first} and {other} fps)")]
    MixedFps { first: f64, other: f64 },
    #[error("cannot read audio {path}: {reason}")]
    Audio { path: PathBuf, reason: String },
    #[error("video runs {video_s:.3} s but audio {audio_s:.3} s (tolerance {tolerance_s:.3} s)")]
    DurationMismatch {
        video_s: f64,
        audio_s: f64,
        tolerance_s: f64,
    },
    #[error("muxer {program:?} is not available; install it or use the manifest_only container")]
    MuxerUnavailable { program: String },
    #[error("muxer exited with {status}: {stderr}")]
    MuxerFailed { status: String, stderr: String },
    #[error("muxer template is empty")]
    EmptyMuxerTemplate,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Container {
    Mp4ViaMuxer,
    ManifestOnly,
}

impl Container {
    pub fn file_name(self) -> &'static str {
        match self {
            Container::Mp4ViaMuxer => "final.mp4",
            Container::ManifestOnly => "final.manifest.json",
        }
    }
}

/// External muxer command. Arguments may contain the placeholders
/// `{frames_pattern}`, `{fps}`, `{audio}` and `{out}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuxerCommand {
    pub argv: Vec<String>,
}

impl Default for MuxerCommand {
    fn default() -> Self {
        let argv = [
            "ffmpeg", "-y", "-loglevel", "error", "-framerate", "{fps}", "-i",
            "{frames_pattern}", "-i", "{audio}", "-map", "0:v", "-map", "1:a", "-c:v",
            "libx264", "-pix_fmt", "yuv420p", "-c:a", "copy", "{out}",
        ];
        Self {
            argv: argv.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl MuxerCommand {
    pub fn render(&self, frames_pattern: &str, fps: f64, audio: &str, out: &str) -> Vec<String> {
        self.argv
            .iter()
            .map(|a| {
                a.replace("{frames_pattern}", frames_pattern)
                    .replace("{fps}", &fps.to_string())
                    .replace("{audio}", audio)
                    .replace("{out}", out)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct AssemblySpec {
    pub clips: Vec<ClipArtifact>,
    pub audio_path: PathBuf,
    pub output_path: PathBuf,
    pub container: Container,
    /// Number of scenes in the plan; every scene 1..=N needs a clip.
    pub expected_scenes: usize,
    pub muxer: MuxerCommand,
    /// Paths in the manifest are written relative to this directory.
    pub relative_to: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestClip {
    pub scene_number: usize,
    pub dir: String,
    pub frame_pattern: String,
    pub frame_count: usize,
    /// Half-open range in the joined frame sequence.
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyManifest {
    pub fps: f64,
    pub audio: String,
    pub audio_duration_s: f64,
    pub video_duration_s: f64,
    pub total_frames: usize,
    pub clips: Vec<ManifestClip>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyOutput {
    pub path: PathBuf,
    pub manifest: AssemblyManifest,
}

fn display_path(path: &Path, base: Option<&Path>) -> String {
    let rel = base.and_then(|b| path.strip_prefix(b).ok()).unwrap_or(path);
    rel.components()
        .filter(|c| !matches!(c, Component::CurDir))
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Orders and checks the clips and computes the joined timeline.
pub fn plan_assembly(spec: &AssemblySpec) -> Result<AssemblyManifest, AssemblyError> {
    if spec.clips.is_empty() {
        return Err(AssemblyError::NoClips);
    }
    let mut clips: Vec<&ClipArtifact> = spec.clips.iter().collect();
    clips.sort_by_key(|c| c.scene_number());
    for pair in clips.windows(2) {
        if pair[0].scene_number() == pair[1].scene_number() {
            return Err(AssemblyError::DuplicateClip(pair[0].scene_number()));
        }
    }
    for n in 1..=spec.expected_scenes.max(clips.len()) {
        if clips.get(n - 1).map(|c| c.scene_number()) != Some(n) {
            return Err(AssemblyError::MissingClip(n));
        }
    }
    let fps = clips[0].fps();
    if let Some(c) = clips.iter().find(|c| c.fps() != fps) {
        return Err(AssemblyError::MixedFps {
            first: fps,
            other: c.fps(),
        });
    }
    for c in &clips {
        if let Some(path) = c.frame_paths().into_iter().find(|p| !p.is_file()) {
            return Err(AssemblyError::MissingFrame {
                scene: c.scene_number(),
                path,
            });
        }
    }
    let audio_err = |reason: String| AssemblyError::Audio {
        path: spec.audio_path.clone(),
        reason,
    };
    let bytes = fs::read(&spec.audio_path).map_err(|e| audio_err(e.to_string()))?;
    let audio_duration_s = wav::decode(&bytes)
        .map_err(|e| audio_err(e.to_string()))?
        .duration_s();

    let base = spec.relative_to.as_deref();
    let mut entries = Vec::with_capacity(clips.len());
    let mut start = 0;
    for c in &clips {
        let n = c.frame_count();
        entries.push(ManifestClip {
            scene_number: c.scene_number(),
            dir: display_path(&c.dir, base),
            frame_pattern: FRAME_PATTERN.into(),
            frame_count: n,
            start_frame: start,
            end_frame: start + n,
            start_s: start as f64 / fps,
            duration_s: n as f64 / fps,
        });
        start += n;
    }
    let video_duration_s = start as f64 / fps;
    let tolerance_s = clips.len() as f64 / fps;
    if (video_duration_s - audio_duration_s).abs() > tolerance_s {
        return Err(AssemblyError::DurationMismatch {
            video_s: video_duration_s,
            audio_s: audio_duration_s,
            tolerance_s,
        });
    }
    Ok(AssemblyManifest {
        fps,
        audio: display_path(&spec.audio_path, base),
        audio_duration_s,
        video_duration_s,
        total_frames: start,
        clips: entries,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AssemblyError + '_ {
    move |source| AssemblyError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the final artifact: the assembly manifest, or a muxed video.
pub fn assemble_video(spec: &AssemblySpec) -> Result<AssemblyOutput, AssemblyError> {
    let manifest = plan_assembly(spec)?;
    match spec.container {
        Container::ManifestOnly => {
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
            crate::write_atomic(&spec.output_path, json.as_bytes()).map_err(io_err(&spec.output_path))?;
        }
        Container::Mp4ViaMuxer => mux(spec, &manifest)?,
    }
    Ok(AssemblyOutput {
        path: spec.output_path.clone(),
        manifest,
    })
}

fn mux(spec: &AssemblySpec, manifest: &AssemblyManifest) -> Result<(), AssemblyError> {
    if spec.muxer.argv.is_empty() {
        return Err(AssemblyError::EmptyMuxerTemplate);
    }
    let out_dir = spec
        .output_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    // The muxer reads one numbered sequence, so the clips are joined first.
    let staging = out_dir.join(".frames");
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    fs::create_dir_all(&staging).map_err(io_err(&staging))?;
    let mut clips: Vec<&ClipArtifact> = spec.clips.iter().collect();
    clips.sort_by_key(|c| c.scene_number());
    let mut k = 0;
    for c in clips {
        for src in c.frame_paths() {
            let dst = staging.join(frame_name(k));
            if fs::hard_link(&src, &dst).is_err() {
                fs::copy(&src, &dst).map_err(io_err(&dst))?;
            }
            k += 1;
        }
    }
    let pattern = staging.join(FRAME_PATTERN);
    let argv = spec.muxer.render(
        &pattern.to_string_lossy(),
        manifest.fps,
        &spec.audio_path.to_string_lossy(),
        &spec.output_path.to_string_lossy(),
    );
    let result = Command::new(&argv[0]).args(&argv[1..]).output();
    let _ = fs::remove_dir_all(&staging);
    let output = match result {
        Ok(o) => o,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Err(AssemblyError::MuxerUnavailable {
                program: argv[0].clone(),
            })
        }
        Err(e) => return Err(io_err(Path::new(&argv[0]))(e)),
    };
    if !output.status.success() {
        return Err(AssemblyError::MuxerFailed {
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    Ok(())
}
