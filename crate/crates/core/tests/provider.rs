use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::thread;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use sumtrace::summary::{
    summarize, summarize_with, DirCache, HttpProvider, ProviderConfig, ReplayProvider, SummarizeOptions,
    SummaryError, SummaryStatus, INSTRUCTION,
};

#[derive(Clone, Default)]
struct Mock {
    /// Statuses to answer with before succeeding.
    script: Arc<Mutex<VecDeque<u16>>>,
    reply: Arc<Mutex<Value>>,
    seen: Arc<Mutex<Vec<(Option<String>, Value)>>>,
}

async fn chat(State(m): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let auth = headers.get("authorization").map(|v| v.to_str().unwrap().to_string());
    m.seen.lock().unwrap().push((auth, body));
    let next = m.script.lock().unwrap().pop_front();
    match next {
        Some(code) => (StatusCode::from_u16(code).unwrap(), Json(json!({ "error": "scripted" }))),
        None => (StatusCode::OK, Json(m.reply.lock().unwrap().clone())),
    }
}

fn ok_reply(text: &str) -> Value {
    json!({
        "created": 1_700_000_000,
        "choices": [{ "message": { "role": "assistant", "content": text } }],
        "usage": { "prompt_tokens": 40, "completion_tokens": 12 }
    })
}

fn start(script: &[u16], reply: Value) -> (String, Mock) {
    let mock = Mock::default();
    mock.script.lock().unwrap().extend(script.iter().copied());
    *mock.reply.lock().unwrap() = reply;
    let app = Router::new().route("/v1/chat/completions", post(chat)).with_state(mock.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    (format!("http://{addr}/v1/chat/completions"), mock)
}

fn config(endpoint: &str, env: &str) -> ProviderConfig {
    let mut c = ProviderConfig::new("openai", "gpt-4-1106-preview", endpoint, env);
    c.backoff_base_ms = 1;
    c.max_retries = 3;
    c
}

const CODE: &str = "def f(x):\n    return x + 1\n";

#[test]
fn retries_429_and_5xx_then_succeeds() {
    std::env::set_var("SUMTRACE_TEST_KEY_RETRY", "sk-test");
    let (url, mock) = start(&[429, 500, 503], ok_reply("Adds one to x."));
    let cfg = config(&url, "SUMTRACE_TEST_KEY_RETRY");
    let dir = tempfile::tempdir().unwrap();
    let record = summarize("f", CODE, &cfg, &HttpProvider::new(&cfg).unwrap(), &DirCache::new(dir.path())).unwrap();
    assert_eq!(record.status, SummaryStatus::Ok);
    assert_eq!(record.summary_text, "Adds one to x.");
    assert_eq!(record.transport_meta.attempts, 4);
    assert_eq!(record.token_usage.unwrap().completion_tokens, 12);
    assert!(record.verify().is_ok());

    let seen = mock.seen.lock().unwrap();
    assert_eq!(seen.len(), 4);
    let (auth, body) = &seen[0];
    assert_eq!(auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(body["model"], "gpt-4-1106-preview");
    assert_eq!(body["temperature"], 0.0);
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 1, "fresh session: one user message");
    assert_eq!(messages[0]["role"], "user");
    assert_eq!(messages[0]["content"], format!("{INSTRUCTION}\n\n{CODE}"));
}

#[test]
fn gives_up_after_max_retries() {
    let (url, mock) = start(&[500, 500, 500, 500, 500], ok_reply("never"));
    let cfg = config(&url, "");
    let dir = tempfile::tempdir().unwrap();
    let err = summarize("f", CODE, &cfg, &HttpProvider::new(&cfg).unwrap(), &DirCache::new(dir.path())).unwrap_err();
    match err {
        SummaryError::Transport { attempts } => assert_eq!(attempts.len(), 4),
        other => panic!("expected transport error, got {other}"),
    }
    assert_eq!(mock.seen.lock().unwrap().len(), 4);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, mock) = start(&[400], ok_reply("never"));
    let cfg = config(&url, "");
    let dir = tempfile::tempdir().unwrap();
    let err = summarize("f", CODE, &cfg, &HttpProvider::new(&cfg).unwrap(), &DirCache::new(dir.path())).unwrap_err();
    assert!(matches!(err, SummaryError::Transport { .. }));
    assert_eq!(mock.seen.lock().unwrap().len(), 1);
}

#[test]
fn missing_credential_fails_before_any_request() {
    std::env::remove_var("SUMTRACE_TEST_KEY_UNSET");
    let (url, mock) = start(&[], ok_reply("x"));
    let cfg = config(&url, "SUMTRACE_TEST_KEY_UNSET");
    let dir = tempfile::tempdir().unwrap();
    let err = summarize("f", CODE, &cfg, &HttpProvider::new(&cfg).unwrap(), &DirCache::new(dir.path())).unwrap_err();
    assert!(matches!(err, SummaryError::MissingCredential(ref v) if v == "SUMTRACE_TEST_KEY_UNSET"));
    assert!(mock.seen.lock().unwrap().is_empty());
}

#[test]
fn refusal_and_empty_replies_become_failed_records() {
    let refusal = json!({ "choices": [{ "message": { "content": null, "refusal": "cannot help" } }] });
    for reply in [refusal, ok_reply("   ")] {
        let (url, _) = start(&[], reply);
        let cfg = config(&url, "");
        let dir = tempfile::tempdir().unwrap();
        let record = summarize("f", CODE, &cfg, &HttpProvider::new(&cfg).unwrap(), &DirCache::new(dir.path())).unwrap();
        assert_eq!(record.status, SummaryStatus::Failed);
        assert!(record.failure.is_some());
    }
}

#[test]
fn cached_records_skip_the_network() {
    let (url, mock) = start(&[], ok_reply("Adds one."));
    let cfg = config(&url, "");
    let dir = tempfile::tempdir().unwrap();
    let cache = DirCache::new(dir.path());
    let provider = HttpProvider::new(&cfg).unwrap();
    let a = summarize("f", CODE, &cfg, &provider, &cache).unwrap();
    let b = summarize("f", CODE, &cfg, &provider, &cache).unwrap();
    assert_eq!(a, b);
    assert_eq!(mock.seen.lock().unwrap().len(), 1);
}

#[test]
fn failed_records_are_retried_only_on_request() {
    let (url, mock) = start(&[], ok_reply(""));
    let cfg = config(&url, "");
    let dir = tempfile::tempdir().unwrap();
    let cache = DirCache::new(dir.path());
    let provider = HttpProvider::new(&cfg).unwrap();
    assert!(!summarize("f", CODE, &cfg, &provider, &cache).unwrap().is_ok());
    assert!(!summarize("f", CODE, &cfg, &provider, &cache).unwrap().is_ok());
    assert_eq!(mock.seen.lock().unwrap().len(), 1);
    *mock.reply.lock().unwrap() = ok_reply("Now it works.");
    let opts = SummarizeOptions { retry_failed: true };
    let r = summarize_with("f", CODE, &cfg, &provider, &cache, &opts).unwrap();
    assert_eq!(r.summary_text, "Now it works.");
    assert_eq!(mock.seen.lock().unwrap().len(), 2);
}

#[test]
fn oversized_prompt_is_refused_without_a_request() {
    let (url, mock) = start(&[], ok_reply("x"));
    let mut cfg = config(&url, "");
    cfg.context_limit_tokens = Some(10);
    let dir = tempfile::tempdir().unwrap();
    let err = summarize("f", CODE, &cfg, &HttpProvider::new(&cfg).unwrap(), &DirCache::new(dir.path())).unwrap_err();
    assert!(matches!(err, SummaryError::ContextTooLarge { limit: 10, .. }));
    assert!(mock.seen.lock().unwrap().is_empty());
}

#[test]
fn nonzero_temperature_needs_explicit_opt_in() {
    let mut cfg = config("http://127.0.0.1:9/unused", "");
    cfg.temperature = 0.7;
    assert!(matches!(cfg.validate(), Err(SummaryError::Config(_))));
    cfg.allow_nonzero_temperature = true;
    assert!(cfg.validate().is_ok());
}

#[test]
fn replay_misses_are_errors_not_network_calls() {
    // The endpoint points at a closed port; replay must never touch it.
    let cfg = config("http://127.0.0.1:9/v1/chat/completions", "");
    let dir = tempfile::tempdir().unwrap();
    let replay = ReplayProvider::from_entries([("0".repeat(64), "unrelated".to_string())]);
    let err = summarize("f", CODE, &cfg, &replay, &DirCache::new(dir.path())).unwrap_err();
    assert!(matches!(err, SummaryError::FixtureMiss { .. }));
}

#[test]
fn replay_hit_returns_the_fixture_text() {
    let cfg = ProviderConfig::replay("m");
    let key = sumtrace::summary::cache_key("m", &sumtrace::summary::build_prompt(CODE), CODE);
    let replay = ReplayProvider::from_entries([(key, "Fixture text.".to_string())]);
    let dir = tempfile::tempdir().unwrap();
    let r = summarize("f", CODE, &cfg, &replay, &DirCache::new(dir.path())).unwrap();
    assert_eq!(r.summary_text, "Fixture text.");
}
