//! Prompt construction for both pipelines, the chat round trip, and parsing
//! of the returned scene script.

mod parse;
mod prompt;
mod validate;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, ChatBackend, ChatMessage};
use crate::fsutil::write_atomic;

pub use parse::{parse_script, scene_marker};
pub use prompt::{
    build_clap_script_prompt, build_decomposition_prompt, build_lalm_story_request,
    format_duration, ScriptPromptOptions, DEFAULT_CHARACTER_DIRECTIVE, LALM_SYSTEM_PROMPT,
};
pub use validate::{count_sentences, validate_script, HardFailure, ValidationReport, Warning};

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot build a script prompt for zero segments")]
    NoSegments,
    #[error("story text is empty")]
    EmptyStory,
    #[error("character directive is empty")]
    EmptyDirective,
    #[error("cannot read audio {path}: {source}")]
    MissingAudio {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("response has no BEGIN SCRIPT marker")]
    MissingBeginMarker,
    #[error("found {found} scenes, expected {expected}")]
    SceneCountMismatch { found: usize, expected: usize },
    #[error("scene numbers are not 1..N: position {position} carries SCENE {found}")]
    NonContiguousNumbering { position: usize, found: usize },
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub number: usize,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptSource {
    ClapPipeline,
    LalmPipeline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoScript {
    pub scenes: Vec<Scene>,
    pub raw_response: String,
    pub source: ScriptSource,
}

impl VideoScript {
    /// Renders the scenes in the same marker format the parser reads.
    pub fn to_script_text(&self) -> String {
        let mut out = String::from("BEGIN SCRIPT\n\n");
        for s in &self.scenes {
            out.push_str(&format!("SCENE {}: {}\n\n", s.number, s.description));
        }
        out.push_str("END SCRIPT\n");
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryConcept {
    pub text: String,
    pub song_ref: PathBuf,
}

impl StoryConcept {
    pub fn new(text: impl Into<String>, song_ref: impl Into<PathBuf>) -> Result<Self, ScriptError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ScriptError::EmptyStory);
        }
        Ok(Self {
            text,
            song_ref: song_ref.into(),
        })
    }
}

/// Sends a conversation and returns the reply verbatim. The prompt text is
/// written to `prompt_path` before the request goes out and the reply to
/// `response_path` once it arrives.
pub fn request_script(
    messages: &[ChatMessage],
    backend: &dyn ChatBackend,
    prompt_path: &Path,
    response_path: &Path,
) -> Result<String, ScriptError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ScriptError::Io { path, source }
    };
    let prompt = crate::backends::last_user_text(messages).unwrap_or_default();
    write_atomic(prompt_path, prompt.as_bytes()).map_err(io(prompt_path))?;
    let response = backend.chat(messages)?;
    if response.trim().is_empty() {
        return Err(ScriptError::EmptyResponse);
    }
    write_atomic(response_path, response.as_bytes()).map_err(io(response_path))?;
    Ok(response)
}
