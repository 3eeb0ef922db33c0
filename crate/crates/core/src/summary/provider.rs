use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ProviderConfig, SummaryError, SummaryRequest, TokenUsage};

/// Anything that can turn one request into one completion.
pub trait Provider: Sync {
    fn complete(&self, request: &SummaryRequest<'_>) -> Result<Completion, SummaryError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// OpenAI-style chat body. Always a single user message, no system prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn fresh(config: &ProviderConfig, prompt: &str) -> Self {
        ChatRequest {
            model: config.model_id.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature: config.temperature,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Completion {
    pub text: String,
    pub refusal: Option<String>,
    pub usage: Option<TokenUsage>,
    pub attempts: u32,
    pub latency_ms: u64,
    pub created_at: Option<DateTime<Utc>>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Completion {
            text: text.into(),
            attempts: 1,
            ..Default::default()
        }
    }

    pub fn refused(reason: impl Into<String>) -> Self {
        Completion {
            refusal: Some(reason.into()),
            attempts: 1,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    pub error: String,
}

/// Chat-completions over HTTPS with retry on 429, 5xx and transport errors.
pub struct HttpProvider {
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(config: &ProviderConfig) -> Result<Self, SummaryError> {
        if config.endpoint.is_empty() {
            return Err(SummaryError::Config("endpoint is empty".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_secs))
            .build()
            .map_err(|e| SummaryError::Config(e.to_string()))?;
        Ok(HttpProvider { client })
    }

    fn backoff(config: &ProviderConfig, attempt: u32) -> Duration {
        let base = config.backoff_base_ms.saturating_mul(1 << attempt.min(10));
        let jitter = rand::thread_rng().gen_range(0..=base / 2 + 1);
        Duration::from_millis(base + jitter)
    }
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
    #[serde(default)]
    created: Option<i64>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    refusal: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl Provider for HttpProvider {
    fn complete(&self, request: &SummaryRequest<'_>) -> Result<Completion, SummaryError> {
        let config = request.config;
        // Resolved per request so the key never sits in long-lived state.
        let credential = if config.credential_env.is_empty() {
            None
        } else {
            Some(
                std::env::var(&config.credential_env)
                    .map_err(|_| SummaryError::MissingCredential(config.credential_env.clone()))?,
            )
        };
        let started = Instant::now();
        let mut attempts = Vec::new();
        for attempt in 0..=config.max_retries {
            if attempt > 0 {
                std::thread::sleep(Self::backoff(config, attempt - 1));
            }
            let mut req = self.client.post(&config.endpoint).json(&request.body);
            if let Some(key) = &credential {
                req = req.bearer_auth(key);
            }
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) => {
                    attempts.push(AttemptLog {
                        attempt: attempt + 1,
                        status: None,
                        error: e.to_string(),
                    });
                    continue;
                }
            };
            let status = resp.status();
            if status.as_u16() == 429 || status.is_server_error() {
                attempts.push(AttemptLog {
                    attempt: attempt + 1,
                    status: Some(status.as_u16()),
                    error: format!("HTTP {status}"),
                });
                continue;
            }
            if !status.is_success() {
                let body = resp.text().unwrap_or_default();
                attempts.push(AttemptLog {
                    attempt: attempt + 1,
                    status: Some(status.as_u16()),
                    error: format!("HTTP {status}: {}", body.chars().take(200).collect::<String>()),
                });
                return Err(SummaryError::Transport { attempts });
            }
            let wire: WireResponse = match resp.json() {
                Ok(w) => w,
                Err(e) => {
                    attempts.push(AttemptLog {
                        attempt: attempt + 1,
                        status: Some(status.as_u16()),
                        error: format!("malformed response: {e}"),
                    });
                    return Err(SummaryError::Transport { attempts });
                }
            };
            let (text, refusal) = match wire.choices.into_iter().next() {
                Some(c) => (c.message.content.unwrap_or_default(), c.message.refusal),
                None => (String::new(), None),
            };
            return Ok(Completion {
                text,
                refusal,
                usage: wire.usage.map(|u| TokenUsage {
                    prompt_tokens: u.prompt_tokens,
                    completion_tokens: u.completion_tokens,
                }),
                attempts: attempt + 1,
                latency_ms: started.elapsed().as_millis() as u64,
                created_at: wire.created.and_then(|t| DateTime::from_timestamp(t, 0)),
            });
        }
        Err(SummaryError::Transport { attempts })
    }
}
