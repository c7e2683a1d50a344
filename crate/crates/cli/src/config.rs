use std::fmt;
use std::path::Path;

use anyhow::Context;
use serde::Deserialize;
use tunereel_core::{BackendEndpointConfig, Backends, EndpointKind, HttpBackend, RunConfig};

pub const AUTH_TOKEN_ENV: &str = "TUNEREEL_AUTH_TOKEN";

/// Contents of the `--config` TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub mock: bool,
    pub endpoints: Endpoints,
    pub run: RunConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoints {
    pub embed: Option<String>,
    pub chat: Option<String>,
    pub chat_audio: Option<String>,
    pub video: Option<String>,
    pub timeout_s: Option<f64>,
    pub max_retries: Option<u32>,
}

impl Endpoints {
    pub fn url(&self, kind: EndpointKind) -> Option<&str> {
        match kind {
            EndpointKind::Embed => self.embed.as_deref(),
            EndpointKind::Chat => self.chat.as_deref(),
            EndpointKind::ChatAudio => self.chat_audio.as_deref(),
            EndpointKind::Video => self.video.as_deref(),
        }
    }

    fn any_url(&self) -> bool {
        [self.embed.is_some(), self.chat.is_some(), self.chat_audio.is_some(), self.video.is_some()]
            .contains(&true)
    }

    fn endpoint(&self, kind: EndpointKind) -> Option<BackendEndpointConfig> {
        let mut cfg = BackendEndpointConfig::new(self.url(kind)?, kind);
        if let Some(t) = self.timeout_s {
            cfg.timeout_s = t;
        }
        if let Some(r) = self.max_retries {
            cfg.max_retries = r;
        }
        cfg.auth_token = std::env::var(AUTH_TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Some(cfg)
    }
}

pub fn flag_name(kind: EndpointKind) -> &'static str {
    match kind {
        EndpointKind::Embed => "--embed-url",
        EndpointKind::Chat => "--chat-url",
        EndpointKind::ChatAudio => "--chat-audio-url",
        EndpointKind::Video => "--video-url",
    }
}

/// Every validation problem found, reported together.
#[derive(Debug)]
pub struct ConfigProblems(pub Vec<String>);

impl fmt::Display for ConfigProblems {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0.join("; "))
    }
}

impl std::error::Error for ConfigProblems {}

pub fn load(path: &Path) -> anyhow::Result<CliConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| ConfigProblems(vec![format!("{}: {}", path.display(), e.message())]).into())
}

/// Checks the backend section against the kinds a command will use.
pub fn backend_problems(mock: bool, endpoints: &Endpoints, kinds: &[EndpointKind]) -> Vec<String> {
    let mut p = Vec::new();
    if mock {
        if endpoints.any_url() {
            p.push("mock mode takes no endpoint URLs".into());
        }
        return p;
    }
    for kind in kinds {
        match endpoints.endpoint(*kind) {
            None => p.push(format!("missing {} (or use --mock)", flag_name(*kind))),
            Some(cfg) => {
                if let Err(e) = cfg.validate() {
                    p.push(format!("{}: {e}", flag_name(*kind)));
                }
            }
        }
    }
    p
}

/// Builds clients for the listed kinds, or the offline mocks.
pub fn build_backends(
    mock: bool,
    endpoints: &Endpoints,
    kinds: &[EndpointKind],
    seed: u64,
) -> anyhow::Result<Backends> {
    let problems = backend_problems(mock, endpoints, kinds);
    if !problems.is_empty() {
        return Err(ConfigProblems(problems).into());
    }
    if mock {
        return Ok(Backends::mock(seed));
    }
    let mut backends = Backends::default();
    for kind in kinds {
        let cfg = endpoints.endpoint(*kind).expect("checked above");
        let client = HttpBackend::new(cfg)?;
        match kind {
            EndpointKind::Embed => backends.embed = Some(Box::new(client)),
            EndpointKind::Chat => backends.chat = Some(Box::new(client)),
            EndpointKind::ChatAudio => backends.chat_audio = Some(Box::new(client)),
            EndpointKind::Video => backends.video = Some(Box::new(client)),
        }
    }
    Ok(backends)
}
