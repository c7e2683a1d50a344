//! Request and response bodies of the four JSON routes. Field names are part
//! of the protocol; `docs/protocol.md` and `fixtures/protocol/` mirror them.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{AudioAttachment, BackendError, ChatMessage, Role, VideoRequest};

pub const ROUTE_EMBED_AUDIO: &str = "/v1/embed/audio";
pub const ROUTE_EMBED_TEXT: &str = "/v1/embed/text";
pub const ROUTE_CHAT: &str = "/v1/chat";
pub const ROUTE_VIDEO: &str = "/v1/video";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedAudioRequest {
    /// A RIFF WAV file, base64 (standard alphabet, padded).
    pub audio_wav_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedAudioResponse {
    pub embedding: Vec<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedTextRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextResponse {
    pub embeddings: Vec<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireMessage {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_wav_base64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRequest {
    pub messages: Vec<WireMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoWireRequest {
    pub prompt: String,
    pub duration_s: f64,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoWireResponse {
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    /// PNG files in display order, base64.
    pub frames_png_base64: Vec<String>,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl From<&ChatMessage> for WireMessage {
    fn from(m: &ChatMessage) -> Self {
        WireMessage {
            role: m.role(),
            text: m.text().map(str::to_owned),
            audio_wav_base64: m.audio().map(|a| STANDARD.encode(&a.wav)),
        }
    }
}

impl WireMessage {
    pub fn into_message(self) -> Result<ChatMessage, BackendError> {
        let audio = match self.audio_wav_base64 {
            Some(b64) => Some(AudioAttachment {
                name: "audio.wav".into(),
                wav: decode_base64(&b64)?.into(),
            }),
            None => None,
        };
        ChatMessage::new(self.role, self.text, audio)
    }
}

impl From<&VideoRequest> for VideoWireRequest {
    fn from(r: &VideoRequest) -> Self {
        VideoWireRequest {
            prompt: r.prompt.clone(),
            duration_s: r.duration_s,
            width: r.width,
            height: r.height,
            fps: r.fps,
            seed: r.seed,
        }
    }
}

pub fn decode_base64(text: &str) -> Result<Vec<u8>, BackendError> {
    STANDARD
        .decode(text)
        .map_err(|e| BackendError::InvalidRequest(format!("bad base64: {e}")))
}

pub fn encode_base64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn message_round_trip() {
        let audio = AudioAttachment {
            name: "song.wav".into(),
            wav: vec![1u8, 2, 3].into(),
        };
        let msg = ChatMessage::user_with_audio(audio, "hello");
        let wire = WireMessage::from(&msg);
        assert_eq!(wire.audio_wav_base64.as_deref(), Some("AQID"));
        let back = wire.into_message().unwrap();
        assert_eq!(back.text(), Some("hello"));
        assert_eq!(&*back.audio().unwrap().wav, &[1, 2, 3]);
    }

    #[test]
    fn unknown_request_fields_rejected() {
        let r: Result<EmbedTextRequest, _> = serde_json::from_str(r#"{"texts":[],"x":1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn role_spelling() {
        let w: WireMessage = serde_json::from_str(r#"{"role":"system","text":"t"}"#).unwrap();
        assert_eq!(w.role, Role::System);
        assert!(serde_json::from_str::<WireMessage>(r#"{"role":"robot","text":"t"}"#).is_err());
    }
}
