use std::time::Instant;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{BackendKind, ChatBackend, ChatRequest, ChatResponse, Credential, GatewayError, RetryPolicy};

/// Chat-completion-compatible JSON over HTTP(S).
#[derive(Debug, Clone)]
pub struct LiveBackend {
    client: reqwest::Client,
    endpoint: String,
    credential: Option<Credential>,
    policy: RetryPolicy,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    max_completion_tokens: u32,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry(GatewayError),
    Fail(GatewayError),
}

fn is_transient_status(status: u16) -> bool {
    matches!(status, 408 | 429 | 500 | 502 | 503 | 504)
}

impl LiveBackend {
    /// `base_url` is the API root, e.g. `https://api.openai.com/v1`; requests go
    /// to `{base_url}/chat/completions`.
    pub fn new(base_url: &str, credential: Option<Credential>, policy: RetryPolicy) -> Self {
        let client = reqwest::Client::builder()
            .timeout(policy.attempt_timeout)
            .build()
            .expect("default TLS configuration is available");
        Self {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            credential,
            policy,
        }
    }

    fn scrub(&self, text: String) -> String {
        match &self.credential {
            Some(c) => c.redact(&text),
            None => text,
        }
    }

    async fn attempt(&self, credential: &Credential, body: &WireRequest<'_>) -> Attempt {
        let sent = self
            .client
            .post(&self.endpoint)
            .bearer_auth(credential.expose())
            .json(body)
            .send()
            .await;
        let resp = match sent {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(GatewayError::Timeout),
            // without_url keeps query strings (and anything in them) out of the message
            Err(e) => return Attempt::Retry(GatewayError::Unreachable(self.scrub(e.without_url().to_string()))),
        };
        let status = resp.status().as_u16();
        if !resp.status().is_success() {
            let err = GatewayError::UpstreamError { status };
            return if is_transient_status(status) { Attempt::Retry(err) } else { Attempt::Fail(err) };
        }
        let parsed: WireResponse = match resp.json().await {
            Ok(p) => p,
            Err(e) if e.is_timeout() => return Attempt::Retry(GatewayError::Timeout),
            Err(_) => return Attempt::Fail(GatewayError::MalformedResponse("response is not chat-completion JSON".into())),
        };
        match parsed.choices.into_iter().next().and_then(|c| c.message.content) {
            Some(text) if !text.trim().is_empty() => Attempt::Done(text),
            _ => Attempt::Fail(GatewayError::MalformedResponse("no completion text in response".into())),
        }
    }
}

#[async_trait]
impl ChatBackend for LiveBackend {
    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let credential = self.credential.as_ref().ok_or(GatewayError::CredentialMissing)?;
        let messages = req.bundle.to_messages();
        let body = WireRequest {
            model: &req.model_id,
            messages: messages
                .iter()
                .map(|m| WireMessage { role: m.role.as_str(), content: &m.content })
                .collect(),
            max_completion_tokens: req.max_output_tokens,
        };

        let started = Instant::now();
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            match self.attempt(credential, &body).await {
                Attempt::Done(text) => {
                    return Ok(ChatResponse {
                        // an upstream echoing the request headers must not leak the key
                        text: self.scrub(text),
                        latency_ms: started.elapsed().as_millis() as u64,
                        backend: BackendKind::Live,
                        attempt_count: attempts,
                    })
                }
                Attempt::Fail(err) => return Err(err),
                Attempt::Retry(err) => {
                    if attempts > self.policy.max_retries {
                        return Err(err);
                    }
                    tracing::warn!(attempt = attempts, error = %err, "transient model error, retrying");
                    tokio::time::sleep(self.policy.backoff(attempts)).await;
                }
            }
        }
    }
}
