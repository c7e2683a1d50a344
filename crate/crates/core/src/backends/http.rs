use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::protocol::*;
use super::{
    png_dimensions, BackendEndpointConfig, BackendError, ChatBackend, ChatMessage,
    EmbeddingBackend, EndpointKind, VideoBackend, VideoPayload, VideoRequest,
};
use crate::audio::AudioBuffer;

/// Video responses carry every frame inline.
const BODY_LIMIT: u64 = 1 << 30;

/// Blocking JSON-over-HTTP client for one endpoint.
pub struct HttpBackend {
    config: BackendEndpointConfig,
    agent: ureq::Agent,
    dim: OnceLock<usize>,
}

impl HttpBackend {
    pub fn new(config: BackendEndpointConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            agent,
            dim: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &BackendEndpointConfig {
        &self.config
    }

    fn require(&self, allowed: &[EndpointKind], wanted: &'static str) -> Result<(), BackendError> {
        if allowed.contains(&self.config.kind) {
            Ok(())
        } else {
            Err(BackendError::WrongKind {
                actual: self.config.kind,
                wanted,
            })
        }
    }

    /// POSTs `body` to `route`, retrying retryable failures with exponential
    /// backoff. The last error is returned once retries run out.
    fn post<B: Serialize, R: DeserializeOwned>(&self, route: &str, body: &B) -> Result<R, BackendError> {
        let payload = serde_json::to_vec(body).map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let mut attempt = 0u32;
        loop {
            match self.post_once(route, &payload) {
                Ok(text) => {
                    return serde_json::from_str(&text).map_err(|e| BackendError::Malformed {
                        route: route.into(),
                        message: e.to_string(),
                    })
                }
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    let delay = self.config.backoff_ms.saturating_mul(1 << attempt.min(16));
                    thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn post_once(&self, route: &str, payload: &[u8]) -> Result<String, BackendError> {
        let url = format!("{}{route}", self.config.base_url.trim_end_matches('/'));
        let transport = |e: ureq::Error| BackendError::Transport {
            route: route.into(),
            message: e.to_string(),
        };
        let mut req = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.config.auth_token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send(payload).map_err(transport)?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(BODY_LIMIT)
            .read_to_string()
            .map_err(transport)?;
        if (200..300).contains(&status) {
            return Ok(text);
        }
        let message = match serde_json::from_str::<ErrorResponse>(&text) {
            Ok(err) => format!("{}: {}", err.error.code, err.error.message),
            Err(_) => text.chars().take(200).collect(),
        };
        Err(BackendError::Status {
            route: route.into(),
            status,
            message,
        })
    }

    fn check_dim(&self, found: usize) -> Result<(), BackendError> {
        if found == 0 {
            return Err(BackendError::DimensionMismatch { expected: 1, found });
        }
        let expected = *self.dim.get_or_init(|| found);
        if expected == found {
            Ok(())
        } else {
            Err(BackendError::DimensionMismatch { expected, found })
        }
    }
}

impl EmbeddingBackend for HttpBackend {
    fn identity(&self) -> String {
        format!("http:{}", self.config.base_url.trim_end_matches('/'))
    }

    fn embed_audio(&self, audio: &AudioBuffer) -> Result<Vec<f32>, BackendError> {
        self.require(&[EndpointKind::Embed], "audio embedding")?;
        let req = EmbedAudioRequest {
            audio_wav_base64: encode_base64(&audio.to_wav_bytes()),
        };
        let resp: EmbedAudioResponse = self.post(ROUTE_EMBED_AUDIO, &req)?;
        self.check_dim(resp.embedding.len())?;
        Ok(resp.embedding)
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, BackendError> {
        self.require(&[EndpointKind::Embed], "text embedding")?;
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let req = EmbedTextRequest {
            texts: texts.to_vec(),
        };
        let resp: EmbedTextResponse = self.post(ROUTE_EMBED_TEXT, &req)?;
        if resp.embeddings.len() != texts.len() {
            return Err(BackendError::Malformed {
                route: ROUTE_EMBED_TEXT.into(),
                message: format!("{} embeddings for {} texts", resp.embeddings.len(), texts.len()),
            });
        }
        for e in &resp.embeddings {
            self.check_dim(e.len())?;
        }
        Ok(resp.embeddings)
    }
}

impl ChatBackend for HttpBackend {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let has_audio = messages.iter().any(|m| m.audio().is_some());
        if has_audio {
            self.require(&[EndpointKind::ChatAudio], "chat with audio")?;
        } else {
            self.require(&[EndpointKind::Chat, EndpointKind::ChatAudio], "chat")?;
        }
        let req = ChatRequest {
            messages: messages.iter().map(WireMessage::from).collect(),
            seed: None,
            temperature: None,
        };
        let resp: ChatResponse = self.post(ROUTE_CHAT, &req)?;
        if resp.text.trim().is_empty() {
            return Err(BackendError::EmptyContent {
                route: ROUTE_CHAT.into(),
            });
        }
        Ok(resp.text)
    }
}

impl VideoBackend for HttpBackend {
    fn generate(&self, request: &VideoRequest) -> Result<VideoPayload, BackendError> {
        self.require(&[EndpointKind::Video], "video")?;
        let resp: VideoWireResponse = self.post(ROUTE_VIDEO, &VideoWireRequest::from(request))?;
        let malformed = |message: String| BackendError::Malformed {
            route: ROUTE_VIDEO.into(),
            message,
        };
        if resp.frames_png_base64.is_empty() {
            return Err(malformed("zero frames".into()));
        }
        if (resp.fps - request.fps).abs() > 1e-6 {
            return Err(malformed(format!("fps {} but {} requested", resp.fps, request.fps)));
        }
        let mut frames = Vec::with_capacity(resp.frames_png_base64.len());
        for (i, b64) in resp.frames_png_base64.iter().enumerate() {
            let png = decode_base64(b64).map_err(|e| malformed(format!("frame {i}: {e}")))?;
            let dims = png_dimensions(&png).map_err(|e| malformed(format!("frame {i}: {e}")))?;
            if dims != (resp.width, resp.height) {
                return Err(malformed(format!(
                    "frame {i} is {}x{}, expected {}x{}",
                    dims.0, dims.1, resp.width, resp.height
                )));
            }
            frames.push(png);
        }
        Ok(VideoPayload {
            fps: resp.fps,
            width: resp.width,
            height: resp.height,
            frames_png: frames,
        })
    }
}
