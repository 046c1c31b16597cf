//! Server-side access to a chat-completion model.
//!
//! Clients never see the credential: the live backend attaches it to the
//! upstream request only, and every error message that could carry upstream
//! text is passed through [`Credential::redact`].

mod live;
mod mock;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptBundle;
use crate::scenario::ScenarioConfig;

pub use live::LiveBackend;
pub use mock::{mock_generate, MockBackend};

pub const DEFAULT_MODEL_ID: &str = "gpt-5-mini";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    PatientTurn,
    Suggestions,
}

/// Inputs the mock backend derives its deterministic output from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MockSeed {
    pub scenario: ScenarioConfig,
    pub turn_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_id: String,
    pub bundle: PromptBundle,
    pub max_output_tokens: u32,
    pub request_kind: RequestKind,
    /// Not sent upstream.
    pub mock_seed: Option<MockSeed>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub latency_ms: u64,
    pub backend: BackendKind,
    pub attempt_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("model request timed out")]
    Timeout,
    #[error("model provider returned HTTP {status}")]
    UpstreamError { status: u16 },
    #[error("model provider unreachable: {0}")]
    Unreachable(String),
    #[error("model provider returned an unusable response: {0}")]
    MalformedResponse(String),
    #[error("no API credential configured for the live model backend")]
    CredentialMissing,
    #[error("invalid model request: {0}")]
    InvalidRequest(String),
}

/// API key held only on the server. `Debug` never prints the secret.
#[derive(Clone, PartialEq, Eq)]
pub struct Credential(String);

impl Credential {
    /// `None` for empty or whitespace-only keys.
    pub fn new(secret: impl Into<String>) -> Option<Self> {
        let secret = secret.into();
        (!secret.trim().is_empty()).then(|| Self(secret.trim().to_owned()))
    }

    pub(crate) fn expose(&self) -> &str {
        &self.0
    }

    /// Replaces every occurrence of the secret in `text`.
    pub fn redact(&self, text: &str) -> String {
        text.replace(&self.0, "[redacted]")
    }
}

impl fmt::Debug for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Credential([redacted])")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub attempt_timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            backoff_base: Duration::from_millis(500),
            attempt_timeout: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): base, 2×base, 4×base, …
    pub fn backoff(&self, retry: u32) -> Duration {
        self.backoff_base * 2u32.saturating_pow(retry.saturating_sub(1))
    }
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

/// Single entry point for model calls, with request validation and the
/// configured default model.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    default_model: String,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("default_model", &self.default_model).finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, default_model: impl Into<String>) -> Self {
        let default_model = default_model.into();
        let default_model = if default_model.trim().is_empty() { DEFAULT_MODEL_ID.to_owned() } else { default_model };
        Self { backend, default_model }
    }

    pub fn mock() -> Self {
        Self::new(Arc::new(MockBackend), DEFAULT_MODEL_ID)
    }

    pub fn default_model(&self) -> &str {
        &self.default_model
    }

    pub fn request(&self, bundle: PromptBundle, kind: RequestKind, seed: Option<MockSeed>) -> ChatRequest {
        ChatRequest {
            model_id: self.default_model.clone(),
            bundle,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            request_kind: kind,
            mock_seed: seed,
        }
    }

    pub async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if req.model_id.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("model id must not be empty".into()));
        }
        if req.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        if req.bundle.messages.is_empty() && req.bundle.system_text.is_empty() {
            return Err(GatewayError::InvalidRequest("at least one message is required".into()));
        }
        let resp = self.backend.complete(req).await?;
        if resp.text.trim().is_empty() {
            return Err(GatewayError::MalformedResponse("empty completion".into()));
        }
        Ok(resp)
    }
}
