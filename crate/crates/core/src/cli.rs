//! Command-line front end. Each subcommand drives one stage and prints one
//! JSON result line on stdout; failures print one JSON error line on stderr
//! and exit with a code from [`ExitCode`].

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::analytics::{self, AnalyticsError};
use crate::corpus::{self, CorpusError, FieldMap, Origin};
use crate::mutation::{EngineOptions, Quota, RunnerConfig};
use crate::pipeline;
use crate::review::{self, terminal, FailureMode, Label, ReconcileRequest, ReviewError};
use crate::store::{CampaignConfig, InitOptions, Phase, Store, StoreError};
use crate::summary::{HttpProvider, Provider, ProviderConfig, ReplayProvider, SummarizeOptions, SummaryError};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[repr(i32)]
pub enum ExitCode {
    Ok = 0,
    Other = 1,
    Usage = 2,
    Phase = 3,
    Integrity = 4,
    Store = 5,
    Provider = 6,
    Validation = 7,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn new(code: ExitCode, kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            kind,
            message: message.into(),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::Phase(_) => CliError::new(ExitCode::Phase, "phase", message),
            StoreError::Integrity(_) => CliError::new(ExitCode::Integrity, "integrity", message),
            StoreError::Validation(_) | StoreError::Verdict(_) | StoreError::Mutation(_) => {
                CliError::new(ExitCode::Validation, "validation", message)
            }
            StoreError::NotFound(_) => CliError::new(ExitCode::Validation, "not_found", message),
            StoreError::Summary(e) => e.into(),
            _ => CliError::new(ExitCode::Store, "store", message),
        }
    }
}

impl From<SummaryError> for CliError {
    fn from(e: SummaryError) -> Self {
        match e {
            SummaryError::Config(_) => CliError::new(ExitCode::Validation, "provider_config", e.to_string()),
            _ => CliError::new(ExitCode::Provider, "provider", e.to_string()),
        }
    }
}

impl From<ReviewError> for CliError {
    fn from(e: ReviewError) -> Self {
        match e {
            ReviewError::Store(s) => s.into(),
            other => CliError::new(ExitCode::Validation, "review", other.to_string()),
        }
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::Store(s) => s.into(),
            AnalyticsError::Unreconciled(_) => CliError::new(ExitCode::Phase, "phase", e.to_string()),
            other => CliError::new(ExitCode::Validation, "analytics", other.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => CliError::new(ExitCode::Store, "io", e.to_string()),
            _ => CliError::new(ExitCode::Validation, "corpus", e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sumtrace", version, about = "Mutation-based evaluation of LLM code summaries")]
pub struct Cli {
    /// Campaign directory.
    #[arg(short = 'C', long, global = true, default_value = ".")]
    pub campaign: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create the campaign (or resume it) and attach a corpus.
    Ingest(IngestArgs),
    /// Generate mutants for every program.
    Mutate(MutateArgs),
    /// Summarize originals and mutants.
    Summarize(SummarizeArgs),
    /// Terminal review, interactive or scripted.
    Review(ReviewArgs),
    /// Serve the review API (and optionally the web UI bundle).
    Serve(ServeArgs),
    /// Auto-reconcile agreements, or resolve one mutant.
    Reconcile(ReconcileArgs),
    /// Write report/ and advance to Reported.
    Report(ReportArgs),
    /// Integrity check plus statistics self-tests.
    Verify,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of .py files.
    #[arg(long, conflicts_with = "jsonl")]
    pub corpus: Option<PathBuf>,
    /// JSONL corpus, one program per line.
    #[arg(long, requires = "field_map")]
    pub jsonl: Option<PathBuf>,
    /// Field mapping for --jsonl, e.g. `id=task_id,source=code`.
    #[arg(long)]
    pub field_map: Option<String>,
    #[arg(long, default_value = "corpus")]
    pub origin: String,
    /// Campaign id; defaults to the directory name.
    #[arg(long)]
    pub id: Option<String>,
    /// Mutants per (type, location) cell: `3` or `stmt_b=2,val_e=1`.
    #[arg(long)]
    pub quota: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub review_seed: u64,
    /// Enable the string-literal Value operator.
    #[arg(long)]
    pub include_strings: bool,
    /// Smoke-check command prefix (e.g. `python3`); the file path is appended.
    #[arg(long, num_args = 1.., value_delimiter = ' ')]
    pub runner: Option<Vec<String>>,
    /// Reuse an existing campaign directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct MutateArgs {
    #[arg(long)]
    pub quota: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Provider settings JSON. The API key is read from the environment
    /// variable it names.
    #[arg(long)]
    pub provider: Option<PathBuf>,
    /// Replay fixture (JSONL or a summaries directory); no network calls.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Model id for replay when no settings file is given.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    /// Re-request subjects whose cached record failed.
    #[arg(long)]
    pub retry_failed: bool,
}

#[derive(Debug, Args)]
pub struct ReviewArgs {
    #[arg(long)]
    pub rater: String,
    /// Hide the code diff.
    #[arg(long)]
    pub blind: bool,
    /// JSONL verdict script instead of the interactive prompt.
    #[arg(long)]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Static web UI bundle to serve at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
    /// Further campaign directories to serve.
    #[arg(long = "also")]
    pub also: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconcileArgs {
    #[arg(long, requires_all = ["label", "resolver"])]
    pub mutant: Option<String>,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub failure_mode: Option<String>,
    #[arg(long)]
    pub bug: bool,
    #[arg(long)]
    pub resolver: Option<String>,
    #[arg(long, default_value = "")]
    pub note: String,
    /// Allow overriding raters who agree.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Earlier model's rows (`report/rows.jsonl` or a campaign dir) for the
    /// comparison table. Repeatable, oldest first.
    #[arg(long)]
    pub baseline: Vec<PathBuf>,
}

/// Parses `argv` and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Usage } else { ExitCode::Ok };
            let _ = e.print();
            return code as i32;
        }
    };
    match execute(&cli) {
        Ok(value) => {
            println!("{value}");
            0
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({ "error": e.kind, "exit_code": e.code as i32, "message": e.message })
            );
            e.code as i32
        }
    }
}

pub fn execute(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let root = cli.campaign.as_path();
    match &cli.command {
        Command::Ingest(a) => ingest(root, a),
        Command::Mutate(a) => {
            let mut store = Store::open(root)?;
            let quota = a.quota.as_deref().map(parse_quota).transpose()?;
            let r = pipeline::mutate(&mut store, quota, a.seed)?;
            Ok(json!({ "stage": "mutate", "phase": store.phase(), "result": r }))
        }
        Command::Summarize(a) => summarize(root, a),
        Command::Review(a) => {
            let mut store = Store::open(root)?;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            let s = match &a.script {
                Some(path) => {
                    let script = terminal::load_script(path)?;
                    terminal::run_scripted(&mut store, &a.rater, a.blind, &script, &mut out)?
                }
                None => {
                    let stdin = io::stdin();
                    let mut input = BufReader::new(stdin.lock());
                    terminal::run_interactive(&mut store, &a.rater, a.blind, &mut input, &mut out)?
                }
            };
            Ok(json!({ "stage": "review", "phase": store.phase(), "judged": s.judged, "remaining": s.remaining }))
        }
        Command::Serve(a) => {
            let mut stores = vec![Store::open(root)?];
            for extra in &a.also {
                stores.push(Store::open(extra)?);
            }
            review::server::serve(stores, a.addr, a.ui.clone(), |addr| {
                eprintln!("{}", json!({ "listening": addr.to_string() }));
            })
            .map_err(|e| CliError::new(ExitCode::Store, "io", e.to_string()))?;
            Ok(json!({ "stage": "serve", "stopped": true }))
        }
        Command::Reconcile(a) => reconcile(root, a),
        Command::Report(a) => {
            let mut store = Store::open(root)?;
            let baselines = a
                .baseline
                .iter()
                .map(|p| analytics::load_baseline(p))
                .collect::<Result<Vec<_>, _>>()?;
            let (bundle, changed) = analytics::emit_report(&mut store, &baselines)?;
            Ok(json!({
                "stage": "report",
                "phase": store.phase(),
                "files": bundle.files.keys().collect::<Vec<_>>(),
                "changed": changed,
            }))
        }
        Command::Verify => verify(root),
    }
}

fn parse_quota(spec: &str) -> Result<(Quota, String), CliError> {
    spec.parse::<Quota>()
        .map(|q| (q, spec.to_string()))
        .map_err(|e| CliError::new(ExitCode::Validation, "quota", e))
}

fn ingest(root: &Path, a: &IngestArgs) -> Result<serde_json::Value, CliError> {
    let origin: Origin = a
        .origin
        .parse()
        .map_err(|e: String| CliError::new(ExitCode::Validation, "origin", e))?;
    let ingestion = match (&a.corpus, &a.jsonl) {
        (Some(dir), None) => corpus::ingest_directory(dir, origin)?,
        (None, Some(file)) => {
            let map: FieldMap = a
                .field_map
                .as_deref()
                .unwrap_or_default()
                .parse()
                .map_err(|e: CorpusError| CliError::from(e))?;
            corpus::ingest_jsonl(file, &map)?
        }
        _ => return Err(CliError::new(ExitCode::Usage, "usage", "pass exactly one of --corpus or --jsonl")),
    };
    let quota = a.quota.as_deref().map(parse_quota).transpose()?;
    let id = match &a.id {
        Some(id) => id.clone(),
        None => fs::canonicalize(root)
            .ok()
            .or_else(|| Some(root.to_path_buf()))
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "campaign".into()),
    };
    let config = CampaignConfig {
        quota: quota.as_ref().map(|q| q.0.clone()),
        quota_spec: quota.as_ref().map(|q| q.1.clone()),
        seed: a.seed,
        engine: EngineOptions {
            include_strings: a.include_strings,
        },
        provider: None,
        review_seed: a.review_seed,
        runner: a.runner.as_ref().map(|command| RunnerConfig {
            command: command.clone(),
            stdin: None,
            timeout_ms: 10_000,
        }),
    };
    let mut store = Store::init(
        root,
        &id,
        config,
        InitOptions {
            resume: a.resume,
            ..Default::default()
        },
    )?;
    let r = pipeline::ingest(&mut store, &ingestion)?;
    Ok(json!({ "stage": "ingest", "phase": store.phase(), "result": r, "manifest": ingestion.manifest().rejected }))
}

fn summarize(root: &Path, a: &SummarizeArgs) -> Result<serde_json::Value, CliError> {
    let mut store = Store::open(root)?;
    let settings = match &a.provider {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::new(ExitCode::Store, "io", format!("{}: {e}", path.display())))?;
            Some(
                serde_json::from_str::<ProviderConfig>(&text)
                    .map_err(|e| CliError::new(ExitCode::Validation, "provider_config", format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    let provider: Box<dyn Provider> = match &a.replay {
        Some(path) => Box::new(ReplayProvider::load(path)?),
        None => match &settings {
            Some(cfg) => Box::new(HttpProvider::new(cfg)?),
            None => {
                return Err(CliError::new(ExitCode::Usage, "usage", "pass --provider settings.json or --replay PATH"));
            }
        },
    };
    let config = match (settings, &a.model) {
        (Some(mut cfg), model) => {
            if let Some(m) = model {
                cfg.model_id = m.clone();
            }
            cfg
        }
        (None, Some(m)) => ProviderConfig::replay(m),
        (None, None) => match &store.config().provider {
            Some(p) => p.clone(),
            None => {
                return Err(CliError::new(ExitCode::Usage, "usage", "replay needs --model or --provider for the model id"));
            }
        },
    };
    let options = SummarizeOptions {
        retry_failed: a.retry_failed,
    };
    let r = pipeline::summarize(&mut store, &config, provider.as_ref(), a.parallelism.max(1), &options)?;
    let failed = !r.failures.is_empty();
    let value = json!({ "stage": "summarize", "phase": store.phase(), "result": r });
    if failed {
        return Err(CliError::new(ExitCode::Provider, "provider", value.to_string()));
    }
    Ok(value)
}

fn reconcile(root: &Path, a: &ReconcileArgs) -> Result<serde_json::Value, CliError> {
    let mut store = Store::open(root)?;
    let bad = |e: String| CliError::new(ExitCode::Validation, "validation", e);
    if let Some(mutant) = &a.mutant {
        let label: Label = a.label.as_deref().unwrap_or_default().parse().map_err(bad)?;
        let failure_mode = a
            .failure_mode
            .as_deref()
            .map(str::parse::<FailureMode>)
            .transpose()
            .map_err(bad)?;
        let r = review::reconcile(
            &mut store,
            ReconcileRequest {
                mutant_id: mutant.clone(),
                label,
                failure_mode,
                recognized_as_bug: a.bug,
                resolver_id: a.resolver.clone().unwrap_or_default(),
                note: a.note.clone(),
                force: a.force,
            },
        )?;
        let auto = review::auto_reconcile(&mut store)?;
        return Ok(json!({ "stage": "reconcile", "phase": store.phase(), "reconciled": r, "auto": auto }));
    }
    let auto = review::auto_reconcile(&mut store)?;
    let raters = store.raters()?;
    let mut agreements = Vec::new();
    for (i, a) in raters.iter().enumerate() {
        for b in &raters[i + 1..] {
            match review::agreement(&store, a, b) {
                Ok(r) => agreements.push(json!(r)),
                Err(e) => agreements.push(json!({ "rater_a": a, "rater_b": b, "error": e.to_string() })),
            }
        }
    }
    let value = json!({ "stage": "reconcile", "phase": store.phase(), "auto": auto, "agreement": agreements });
    if !auto.complete {
        return Err(CliError::new(ExitCode::Phase, "phase", format!("reconciliation incomplete: {value}")));
    }
    Ok(value)
}

fn verify(root: &Path) -> Result<serde_json::Value, CliError> {
    let store = Store::open_read_only(root)?;
    let integrity = store.integrity_check();
    let tests = analytics::self_test();
    let stats_ok = tests.iter().all(|t| t.passed);
    let value = json!({
        "stage": "verify",
        "phase": store.phase(),
        "findings": integrity.findings,
        "self_test": tests,
    });
    if !integrity.is_clean() {
        return Err(CliError::new(ExitCode::Integrity, "integrity", value.to_string()));
    }
    if !stats_ok {
        return Err(CliError::new(ExitCode::Other, "self_test", value.to_string()));
    }
    if store.phase() < Phase::Ingested {
        log::warn!("campaign has no corpus yet");
    }
    Ok(value)
}
