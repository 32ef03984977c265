//! Chat-completion backends.

use std::time::Duration;

use filterscope_core::labeling::{GenerationConfig, PromptMessages};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Where and how to reach one labeling model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    /// Stable name recorded as `model_id` in label files.
    pub name: String,
    pub base_url: String,
    pub model: String,
    /// Environment variable holding a bearer token, if the server wants one.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying: connection problems, timeouts, 429 and 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("permanent: {0}")]
    Permanent(String),
}

pub trait ChatBackend: Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, prompt: &PromptMessages, generation: &GenerationConfig) -> Result<String, BackendError>;
}

/// Exponential backoff schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { base: Duration::from_secs(1), factor: 2.0, max_attempts: 5 }
    }
}

impl RetryPolicy {
    /// Pause before attempt `attempt + 1`, for `attempt >= 1`.
    pub fn delay_after(&self, attempt: u32) -> Duration {
        self.base.mul_f64(self.factor.powi(attempt.saturating_sub(1) as i32))
    }
}

/// Calls the backend, retrying transient errors per `policy`.
/// Returns the outcome and the number of attempts made.
pub fn complete_with_retry(
    backend: &dyn ChatBackend,
    prompt: &PromptMessages,
    generation: &GenerationConfig,
    policy: &RetryPolicy,
) -> (Result<String, BackendError>, u32) {
    let mut attempt = 0;
    loop {
        attempt += 1;
        match backend.complete(prompt, generation) {
            Err(BackendError::Transient(msg)) if attempt < policy.max_attempts => {
                let _ = msg;
                std::thread::sleep(policy.delay_after(attempt));
            }
            other => return (other, attempt),
        }
    }
}

/// OpenAI-style `POST {base_url}/chat/completions` client.
pub struct HttpBackend {
    descriptor: BackendDescriptor,
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(descriptor: BackendDescriptor) -> Self {
        let token = descriptor.auth_env.as_deref().and_then(|var| std::env::var(var).ok()).filter(|t| !t.is_empty());
        let base = descriptor.base_url.trim_end_matches('/');
        let url =
            if base.ends_with("/chat/completions") { base.to_string() } else { format!("{base}/chat/completions") };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(descriptor.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { descriptor, url, token, agent }
    }

    pub fn request_body(&self, prompt: &PromptMessages, generation: &GenerationConfig) -> serde_json::Value {
        json!({
            "model": self.descriptor.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": generation.temperature,
            "max_tokens": generation.max_new_tokens,
        })
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion response.
pub fn extract_content(body: &str) -> Result<String, BackendError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| BackendError::Permanent(format!("response is not JSON: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::Permanent("response lacks choices[0].message.content".into()))
}

impl ChatBackend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.descriptor.name
    }

    fn complete(&self, prompt: &PromptMessages, generation: &GenerationConfig) -> Result<String, BackendError> {
        let mut request = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(token) = &self.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(self.request_body(prompt, generation))
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transient(format!("reading response: {e}")))?;
        match status {
            200..=299 => extract_content(&body),
            429 | 500..=599 => Err(BackendError::Transient(format!("HTTP {status}"))),
            _ => Err(BackendError::Permanent(format!("HTTP {status}: {}", body.chars().take(200).collect::<String>()))),
        }
    }
}
