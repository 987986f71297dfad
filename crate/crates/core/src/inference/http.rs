use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{
    approximate_token_count, ChatClient, GenerationParams, InferenceError, ModelResponse,
    UsageSource,
};

/// Exponential backoff for rate-limited requests: `base * 2^k`, jittered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let full = self.base_delay.saturating_mul(1u32 << retry.min(16));
        if self.jitter {
            full.mul_f64(rand::thread_rng().gen_range(0.5..=1.0))
        } else {
            full
        }
    }
}

/// OpenAI-compatible `POST <base>/v1/chat/completions` client.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    base_url: String,
    api_key: Option<String>,
    client: Client,
    retry: RetryPolicy,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

const BODY_EXCERPT: usize = 512;

impl HttpChatClient {
    /// `api_key` is typically read from the `API_KEY` environment variable.
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, InferenceError> {
        let client =
            Client::builder()
                .timeout(timeout)
                .build()
                .map_err(|e| InferenceError::Transport {
                    status: None,
                    body: e.to_string(),
                })?;
        Ok(HttpChatClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            client,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url)
    }

    fn send_once(&self, body: &ChatRequest<'_>) -> Result<ChatResponse, InferenceError> {
        let mut req = self.client.post(self.endpoint()).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(map_reqwest)?;
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Err(InferenceError::RateLimited { attempts: 1 });
        }
        let text = resp.text().map_err(map_reqwest)?;
        if !status.is_success() {
            return Err(InferenceError::Transport {
                status: Some(status.as_u16()),
                body: excerpt(&text),
            });
        }
        serde_json::from_str(&text)
            .map_err(|e| InferenceError::Decode(format!("{e}: {}", excerpt(&text))))
    }
}

fn excerpt(text: &str) -> String {
    match text.char_indices().nth(BODY_EXCERPT) {
        Some((i, _)) => format!("{}…", &text[..i]),
        None => text.to_string(),
    }
}

fn map_reqwest(e: reqwest::Error) -> InferenceError {
    if e.is_timeout() {
        InferenceError::Timeout
    } else {
        InferenceError::Transport {
            status: e.status().map(|s| s.as_u16()),
            body: e.to_string(),
        }
    }
}

impl ChatClient for HttpChatClient {
    fn complete(
        &self,
        system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        params.validate()?;
        let body = ChatRequest {
            model: &params.model,
            messages: [
                Message {
                    role: "system",
                    content: system,
                },
                Message {
                    role: "user",
                    content: user,
                },
            ],
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            seed: params.seed,
        };

        let started = Instant::now();
        let mut attempt = 0;
        let parsed = loop {
            attempt += 1;
            match self.send_once(&body) {
                Err(InferenceError::RateLimited { .. }) if attempt < self.retry.max_attempts => {
                    let wait = self.retry.delay(attempt - 1);
                    tracing::debug!(attempt, ?wait, "rate limited, backing off");
                    thread::sleep(wait);
                }
                Err(InferenceError::RateLimited { .. }) => {
                    return Err(InferenceError::RateLimited { attempts: attempt });
                }
                other => break other?,
            }
        };
        let latency_ms = started.elapsed().as_millis() as u64;

        let content = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| InferenceError::Decode("response has no choices".into()))?
            .message
            .content
            .unwrap_or_default();

        let (input_tokens, output_tokens, usage_source) = match parsed
            .usage
            .and_then(|u| Some((u.prompt_tokens?, u.completion_tokens?)))
        {
            Some((i, o)) => (i, o, UsageSource::Provider),
            None => (
                approximate_token_count(system) + approximate_token_count(user),
                approximate_token_count(&content),
                UsageSource::Approximate,
            ),
        };

        Ok(ModelResponse {
            content,
            input_tokens,
            output_tokens,
            usage_source,
            latency_ms,
        })
    }
}
