//! Chat-completion clients: an OpenAI-compatible HTTP backend and
//! deterministic mocks for offline runs.

mod http;
mod mock;

use serde::{Deserialize, Serialize};

pub use http::{HttpChatClient, RetryPolicy};
pub use mock::{tagged_response, AnswerKeyMock, FixedResponseMock, SeededRandomMock};

pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_MAX_TOKENS: u32 = 16_384;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub model: String,
    pub temperature: f64,
    /// Cap on generated tokens.
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl GenerationParams {
    pub fn new(model: impl Into<String>) -> Self {
        GenerationParams {
            model: model.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(InferenceError::InvalidParams(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(InferenceError::InvalidParams(
                "max_tokens must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageSource {
    Provider,
    Approximate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub content: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub usage_source: UsageSource,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InferenceError {
    #[error("transport error (status {status:?}): {body}")]
    Transport { status: Option<u16>, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
}

/// A single chat exchange: one system message, one user message.
pub trait ChatClient: Send + Sync {
    fn complete(
        &self,
        system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError>;
}

impl<C: ChatClient + ?Sized> ChatClient for &C {
    fn complete(
        &self,
        system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        (**self).complete(system, user, params)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(
        &self,
        system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        (**self).complete(system, user, params)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for std::sync::Arc<C> {
    fn complete(
        &self,
        system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        (**self).complete(system, user, params)
    }
}

/// `ceil(bytes / 4)`. Used only when a backend reports no usage.
pub fn approximate_token_count(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}
