//! Summaries under a fixed protocol: one fresh single-message request per
//! code version, temperature 0, first response canonical and cached.

mod cache;
mod provider;
mod replay;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{DirCache, SummaryCache};
pub use provider::{AttemptLog, ChatMessage, ChatRequest, Completion, HttpProvider, Provider};
pub use replay::ReplayProvider;

/// The instruction every prompt starts with.
pub const INSTRUCTION: &str = "Explain the following code snippet in plain English.";

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("transport failed after {} attempt(s): {}", .attempts.len(), .attempts.last().map(|a| a.error.as_str()).unwrap_or("no attempts"))]
    Transport { attempts: Vec<AttemptLog> },
    #[error("replay fixture has no entry for cache key {key}")]
    FixtureMiss { key: String },
    #[error("fixture {path}:{line}: {message}")]
    FixtureLoad {
        path: String,
        line: usize,
        message: String,
    },
    #[error("credential variable `{0}` is not set")]
    MissingCredential(String),
    #[error("prompt needs ~{estimated} tokens but the provider context is {limit}")]
    ContextTooLarge { estimated: usize, limit: usize },
    #[error("invalid provider config: {0}")]
    Config(String),
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider_name: String,
    pub model_id: String,
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub credential_env: String,
    #[serde(default)]
    pub temperature: f64,
    /// Must be set to run with a non-zero temperature.
    #[serde(default)]
    pub allow_nonzero_temperature: bool,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
    /// Context window in tokens; prompts estimated above it are refused.
    #[serde(default)]
    pub context_limit_tokens: Option<usize>,
}

fn default_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    5
}
fn default_backoff() -> u64 {
    500
}

impl ProviderConfig {
    pub fn new(provider_name: &str, model_id: &str, endpoint: &str, credential_env: &str) -> Self {
        ProviderConfig {
            provider_name: provider_name.into(),
            model_id: model_id.into(),
            endpoint: endpoint.into(),
            credential_env: credential_env.into(),
            temperature: 0.0,
            allow_nonzero_temperature: false,
            request_timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_base_ms: default_backoff(),
            context_limit_tokens: None,
        }
    }

    /// Offline configuration for fixture replay.
    pub fn replay(model_id: &str) -> Self {
        Self::new("replay", model_id, "", "")
    }

    pub fn validate(&self) -> Result<(), SummaryError> {
        if self.model_id.trim().is_empty() {
            return Err(SummaryError::Config("model_id is empty".into()));
        }
        if self.temperature != 0.0 && !self.allow_nonzero_temperature {
            return Err(SummaryError::Config(format!(
                "temperature must be 0 (got {}); set allow_nonzero_temperature for experiments",
                self.temperature
            )));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(SummaryError::Config("temperature out of range".into()));
        }
        Ok(())
    }

    /// Copy safe to store in a campaign manifest.
    pub fn snapshot(&self) -> ProviderConfig {
        ProviderConfig {
            credential_env: String::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransportMeta {
    pub attempts: u32,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SummaryStatus {
    Ok,
    /// Refusal or empty response; needs manual attention.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub subject_ref: String,
    pub model_id: String,
    pub prompt_text: String,
    pub summary_text: String,
    pub cache_key: String,
    /// SHA-256 of `summary_text`, for tamper detection.
    pub summary_digest: String,
    pub status: SummaryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<TokenUsage>,
    #[serde(default)]
    pub transport_meta: TransportMeta,
}

impl SummaryRecord {
    pub fn is_ok(&self) -> bool {
        self.status == SummaryStatus::Ok
    }

    /// The code text embedded in the prompt.
    pub fn code_text(&self) -> Option<&str> {
        code_from_prompt(&self.prompt_text)
    }

    /// Checks that the key and the text digest match the stored content.
    pub fn verify(&self) -> Result<(), String> {
        let code = self
            .code_text()
            .ok_or_else(|| "prompt does not start with the fixed instruction".to_string())?;
        let key = cache_key(&self.model_id, &self.prompt_text, code);
        if key != self.cache_key {
            return Err(format!("cache_key mismatch: stored {}, recomputed {key}", self.cache_key));
        }
        let digest = text_digest(&self.summary_text);
        if digest != self.summary_digest {
            return Err("summary_text does not match summary_digest".to_string());
        }
        Ok(())
    }
}

/// Single user message: instruction, blank line, then the code verbatim.
pub fn build_prompt(code_text: &str) -> String {
    format!("{INSTRUCTION}\n\n{code_text}")
}

pub fn code_from_prompt(prompt: &str) -> Option<&str> {
    prompt.strip_prefix(INSTRUCTION)?.strip_prefix("\n\n")
}

/// SHA-256 over length-prefixed (model id, prompt, code), hex encoded.
pub fn cache_key(model_id: &str, prompt_text: &str, code_text: &str) -> String {
    let mut h = Sha256::new();
    for part in [model_id, prompt_text, code_text] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

pub fn text_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Rough token estimate (4 bytes per token) used for the context guard.
pub fn estimate_tokens(prompt: &str) -> usize {
    prompt.len().div_ceil(4)
}

/// Everything a provider needs for one request.
#[derive(Debug, Clone)]
pub struct SummaryRequest<'a> {
    pub config: &'a ProviderConfig,
    pub cache_key: &'a str,
    pub body: ChatRequest,
}

#[derive(Debug, Clone, Default)]
pub struct SummarizeOptions {
    /// Re-request subjects whose cached record is marked failed.
    pub retry_failed: bool,
}

pub fn summarize(
    subject_ref: &str,
    code_text: &str,
    config: &ProviderConfig,
    provider: &dyn Provider,
    cache: &dyn SummaryCache,
) -> Result<SummaryRecord, SummaryError> {
    summarize_with(subject_ref, code_text, config, provider, cache, &SummarizeOptions::default())
}

pub fn summarize_with(
    subject_ref: &str,
    code_text: &str,
    config: &ProviderConfig,
    provider: &dyn Provider,
    cache: &dyn SummaryCache,
    options: &SummarizeOptions,
) -> Result<SummaryRecord, SummaryError> {
    config.validate()?;
    let prompt_text = build_prompt(code_text);
    let key = cache_key(&config.model_id, &prompt_text, code_text);
    if let Some(hit) = cache.get(&key)? {
        if hit.is_ok() || !options.retry_failed {
            return Ok(hit);
        }
    }
    if let Some(limit) = config.context_limit_tokens {
        let estimated = estimate_tokens(&prompt_text);
        if estimated > limit {
            return Err(SummaryError::ContextTooLarge { estimated, limit });
        }
    }
    let request = SummaryRequest {
        config,
        cache_key: &key,
        body: ChatRequest::fresh(config, &prompt_text),
    };
    let completion = provider.complete(&request)?;
    let text = completion.text.trim_end().to_string();
    let (status, failure) = match (&completion.refusal, text.is_empty()) {
        (Some(reason), _) => (SummaryStatus::Failed, Some(format!("provider refusal: {reason}"))),
        (None, true) => (SummaryStatus::Failed, Some("empty response".to_string())),
        (None, false) => (SummaryStatus::Ok, None),
    };
    let record = SummaryRecord {
        id: format!("sum-{}", &key[..16]),
        subject_ref: subject_ref.to_string(),
        model_id: config.model_id.clone(),
        summary_digest: text_digest(&text),
        summary_text: text,
        prompt_text,
        cache_key: key,
        status,
        failure,
        created_at: completion.created_at.unwrap_or_else(Utc::now),
        token_usage: completion.usage,
        transport_meta: TransportMeta {
            attempts: completion.attempts,
            latency_ms: completion.latency_ms,
        },
    };
    cache.put(&record)?;
    Ok(record)
}

/// One code version to summarize.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subject {
    pub subject_ref: String,
    pub code_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub subject_ref: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchManifest {
    /// Successful records, in subject order.
    pub records: Vec<SummaryRecord>,
    pub failures: Vec<BatchFailure>,
}

/// Summarizes every subject with at most `parallelism` requests in flight.
/// A failing subject is listed in `failures` and never aborts the batch.
pub fn batch_summarize(
    subjects: &[Subject],
    config: &ProviderConfig,
    provider: &dyn Provider,
    cache: &dyn SummaryCache,
    parallelism: usize,
    options: &SummarizeOptions,
) -> BatchManifest {
    let workers = parallelism.max(1).min(subjects.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SummaryRecord, String>>>> =
        Mutex::new(vec![None; subjects.len()]);
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(subject) = subjects.get(i) else {
                    break;
                };
                let outcome = summarize_with(
                    &subject.subject_ref,
                    &subject.code_text,
                    config,
                    provider,
                    cache,
                    options,
                )
                .map_err(|e| e.to_string());
                results.lock().expect("results lock")[i] = Some(outcome);
            });
        }
    });
    let mut manifest = BatchManifest::default();
    for (subject, outcome) in subjects.iter().zip(results.into_inner().expect("results lock")) {
        match outcome {
            Some(Ok(record)) if record.is_ok() => manifest.records.push(record),
            Some(Ok(record)) => manifest.failures.push(BatchFailure {
                subject_ref: subject.subject_ref.clone(),
                error: record.failure.unwrap_or_else(|| "failed record".into()),
            }),
            Some(Err(e)) => manifest.failures.push(BatchFailure {
                subject_ref: subject.subject_ref.clone(),
                error: e,
            }),
            None => manifest.failures.push(BatchFailure {
                subject_ref: subject.subject_ref.clone(),
                error: "not attempted".into(),
            }),
        }
    }
    manifest
}
