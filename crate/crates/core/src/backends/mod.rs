//! Model inference boundary: embedding, chat and text-to-video backends.
//!
//! Real models are reached over a small JSON-over-HTTP protocol (see
//! [`protocol`] and `docs/protocol.md`). The mocks in [`mock`] are pure
//! functions of their inputs and a seed, so whole pipeline runs are
//! reproducible offline.

mod frames;
mod http;
pub mod mock;
pub mod protocol;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::AudioBuffer;

pub use frames::{encode_rgb_png, png_dimensions};
pub use http::HttpBackend;
pub use mock::{MockEmbedding, PatternVideo, ReplayChat, TemplateChat};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("{route}: transport error: {message}")]
    Transport { route: String, message: String },
    #[error("{route}: HTTP {status}: {message}")]
    Status {
        route: String,
        status: u16,
        message: String,
    },
    #[error("{route}: malformed response: {message}")]
    Malformed { route: String, message: String },
    #[error("{route}: empty response content")]
    EmptyContent { route: String },
    #[error("embedding dimension {found} does not match {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("endpoint of kind {actual:?} cannot serve {wanted}")]
    WrongKind { actual: EndpointKind, wanted: &'static str },
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no replay entry for prompt sha256 {0}")]
    NoReplay(String),
}

impl BackendError {
    /// Transport failures, server errors and rate limiting are retried.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport { .. } => true,
            BackendError::Status { status, .. } => *status >= 500 || *status == 429,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    Embed,
    Chat,
    ChatAudio,
    Video,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEndpointConfig {
    pub base_url: String,
    pub kind: EndpointKind,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on every further attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default, skip_serializing)]
    pub auth_token: Option<String>,
}

fn default_backoff_ms() -> u64 {
    250
}

impl BackendEndpointConfig {
    pub fn new(base_url: impl Into<String>, kind: EndpointKind) -> Self {
        Self {
            base_url: base_url.into(),
            kind,
            timeout_s: 600.0,
            max_retries: 3,
            backoff_ms: default_backoff_ms(),
            auth_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(BackendError::InvalidConfig(format!(
                "timeout_s must be positive, got {}",
                self.timeout_s
            )));
        }
        if !self.base_url.starts_with("http://") && !self.base_url.starts_with("https://") {
            return Err(BackendError::InvalidConfig(format!(
                "base_url {:?} is not an http(s) URL",
                self.base_url
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// WAV bytes attached to a chat message, with the name they came from.
#[derive(Clone, PartialEq, Eq)]
pub struct AudioAttachment {
    pub name: String,
    pub wav: Arc<[u8]>,
}

impl fmt::Debug for AudioAttachment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AudioAttachment")
            .field("name", &self.name)
            .field("bytes", &self.wav.len())
            .finish()
    }
}

/// One conversation turn. Carries text, audio, or both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    role: Role,
    text: Option<String>,
    audio: Option<AudioAttachment>,
}

impl ChatMessage {
    pub fn new(
        role: Role,
        text: Option<String>,
        audio: Option<AudioAttachment>,
    ) -> Result<Self, BackendError> {
        if text.is_none() && audio.is_none() {
            return Err(BackendError::InvalidRequest(
                "chat message needs text or audio".into(),
            ));
        }
        Ok(Self { role, text, audio })
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            text: Some(text.into()),
            audio: None,
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            text: Some(text.into()),
            audio: None,
        }
    }

    pub fn user_with_audio(audio: AudioAttachment, text: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            text: Some(text.into()),
            audio: Some(audio),
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn text(&self) -> Option<&str> {
        self.text.as_deref()
    }

    pub fn audio(&self) -> Option<&AudioAttachment> {
        self.audio.as_ref()
    }
}

/// Text of the last user message, the part of a conversation that mocks key on.
pub fn last_user_text(messages: &[ChatMessage]) -> Option<&str> {
    messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .and_then(|m| m.text())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRequest {
    pub prompt: String,
    pub duration_s: f64,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub seed: u64,
}

/// Frames returned by a video backend, each a PNG file.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoPayload {
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub frames_png: Vec<Vec<u8>>,
}

pub trait EmbeddingBackend: Send + Sync {
    /// Stable name of the model behind this backend; keys the label cache.
    fn identity(&self) -> String;
    fn embed_audio(&self, audio: &AudioBuffer) -> Result<Vec<f32>, BackendError>;
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, BackendError>;
}

pub trait ChatBackend: Send + Sync {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

pub trait VideoBackend: Send + Sync {
    fn generate(&self, request: &VideoRequest) -> Result<VideoPayload, BackendError>;
}

/// Scales `v` to unit L2 norm. Zero or non-finite vectors are rejected.
pub fn l2_normalize(v: &[f32]) -> Option<Vec<f32>> {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    Some(v.iter().map(|x| (*x as f64 / norm) as f32).collect())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
