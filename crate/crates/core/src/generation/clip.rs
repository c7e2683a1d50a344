use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ConformPolicy, GenerationError};
use crate::backends::VideoPayload;

pub const FRAME_PATTERN: &str = "frame_%05d.png";
pub const CLIP_MANIFEST: &str = "clip.json";

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

pub fn scene_dir_name(scene_number: usize) -> String {
    format!("scene_{scene_number}")
}

/// Contents of `clip.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipManifest {
    pub scene_number: usize,
    pub fps: f64,
    pub frame_count: usize,
    pub frame_pattern: String,
    pub prompt_hash: String,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
}

/// A clip stored as numbered PNG frames plus `clip.json` in one directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipArtifact {
    pub manifest: ClipManifest,
    pub dir: PathBuf,
}

impl ClipArtifact {
    pub fn scene_number(&self) -> usize {
        self.manifest.scene_number
    }

    pub fn frame_count(&self) -> usize {
        self.manifest.frame_count
    }

    pub fn fps(&self) -> f64 {
        self.manifest.fps
    }

    pub fn duration_s(&self) -> f64 {
        self.manifest.frame_count as f64 / self.manifest.fps
    }

    pub fn frame_path(&self, index: usize) -> PathBuf {
        self.dir.join(frame_name(index))
    }

    pub fn frame_paths(&self) -> Vec<PathBuf> {
        (0..self.frame_count()).map(|i| self.frame_path(i)).collect()
    }

    /// Reads `clip.json` from `dir` and checks that every frame exists.
    pub fn load(dir: &Path) -> Result<Self, GenerationError> {
        let path = dir.join(CLIP_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|source| GenerationError::Io {
            path: path.clone(),
            source,
        })?;
        let manifest: ClipManifest =
            serde_json::from_str(&text).map_err(|e| GenerationError::CorruptClip {
                dir: dir.to_path_buf(),
                reason: e.to_string(),
            })?;
        let clip = ClipArtifact {
            manifest,
            dir: dir.to_path_buf(),
        };
        if let Some(missing) = clip.frame_paths().into_iter().find(|p| !p.is_file()) {
            return Err(GenerationError::CorruptClip {
                dir: dir.to_path_buf(),
                reason: format!("missing {}", missing.display()),
            });
        }
        Ok(clip)
    }

    fn write_manifest(&self) -> Result<(), GenerationError> {
        let path = self.dir.join(CLIP_MANIFEST);
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        crate::write_atomic(&path, json.as_bytes()).map_err(|source| GenerationError::Io { path, source })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GenerationError + '_ {
    move |source| GenerationError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes frames and manifest into a temporary sibling directory, then
/// renames it to `clips_dir/scene_<n>`, replacing any previous clip.
pub(crate) fn persist_clip(
    clips_dir: &Path,
    manifest: ClipManifest,
    payload: &VideoPayload,
) -> Result<ClipArtifact, GenerationError> {
    fs::create_dir_all(clips_dir).map_err(io_err(clips_dir))?;
    let final_dir = clips_dir.join(scene_dir_name(manifest.scene_number));
    let tmp = clips_dir.join(format!(
        ".{}.tmp-{}",
        scene_dir_name(manifest.scene_number),
        std::process::id()
    ));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    fs::create_dir_all(&tmp).map_err(io_err(&tmp))?;
    for (i, png) in payload.frames_png.iter().enumerate() {
        let p = tmp.join(frame_name(i));
        fs::write(&p, png).map_err(io_err(&p))?;
    }
    let staged = ClipArtifact {
        manifest,
        dir: tmp.clone(),
    };
    staged.write_manifest()?;
    if final_dir.exists() {
        fs::remove_dir_all(&final_dir).map_err(io_err(&final_dir))?;
    }
    fs::rename(&tmp, &final_dir).map_err(io_err(&final_dir))?;
    Ok(ClipArtifact {
        manifest: staged.manifest,
        dir: final_dir,
    })
}

/// Frames needed to cover `duration_s` at `fps`, at least one.
pub fn target_frames(duration_s: f64, fps: f64) -> usize {
    ((duration_s * fps).round() as usize).max(1)
}

/// Brings a stored clip to exactly `round(target_duration_s * fps)` frames.
///
/// `TrimEnd` deletes surplus tail frames and refuses clips that are too
/// short. `HoldLastFrame` also trims surplus, and pads short clips with
/// copies of the final frame.
pub fn conform_clip(
    clip: &ClipArtifact,
    target_duration_s: f64,
    policy: ConformPolicy,
) -> Result<ClipArtifact, GenerationError> {
    let have = clip.frame_count();
    if have == 0 {
        return Err(GenerationError::EmptyClip {
            scene: clip.scene_number(),
        });
    }
    let need = target_frames(target_duration_s, clip.fps());
    if have == need {
        return Ok(clip.clone());
    }
    if have > need {
        for i in need..have {
            let p = clip.frame_path(i);
            fs::remove_file(&p).map_err(io_err(&p))?;
        }
    } else {
        if policy == ConformPolicy::TrimEnd {
            return Err(GenerationError::ClipTooShort {
                scene: clip.scene_number(),
                have,
                need,
            });
        }
        let last = clip.frame_path(have - 1);
        for i in have..need {
            let p = clip.frame_path(i);
            fs::copy(&last, &p).map_err(io_err(&p))?;
        }
    }
    let mut out = clip.clone();
    out.manifest.frame_count = need;
    out.write_manifest()?;
    Ok(out)
}
