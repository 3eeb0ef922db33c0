#![allow(dead_code)]

pub mod fuzz;
pub mod props;

use std::collections::BTreeMap;
use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};

use sumtrace::analytics::emit_report;
use sumtrace::corpus::{ingest_directory, Origin};
use sumtrace::fsio::AtomicWriter;
use sumtrace::mutation::Quota;
use sumtrace::pipeline;
use sumtrace::review::auto_reconcile;
use sumtrace::review::terminal::{load_script, run_scripted};
use sumtrace::store::{CampaignConfig, InitOptions, Store};
use sumtrace::summary::{ProviderConfig, ReplayProvider, SummarizeOptions};

pub const DEMO_MODEL: &str = "gpt-4-1106-preview";
pub const DEMO_SEED: u64 = 7;
pub const DEMO_RATER: &str = "r1";

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demo")
}

pub fn lbpp_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("lbpp")
}

pub fn demo_config() -> CampaignConfig {
    CampaignConfig {
        quota: Some(Quota::uniform(1)),
        quota_spec: Some("1".into()),
        seed: Some(DEMO_SEED),
        ..Default::default()
    }
}

/// Runs the demo campaign from scratch (or resumes it) through the library
/// API, using `writer` for every store write.
pub fn run_demo(root: &Path, writer: AtomicWriter) -> Result<(), Box<dyn Error>> {
    run_demo_stages(root, writer, false)
}

/// The demo campaign at phase Summarized, ready for review.
pub fn summarized_demo(root: &Path) {
    run_demo_stages(root, AtomicWriter::default(), true).unwrap();
}

fn run_demo_stages(root: &Path, writer: AtomicWriter, stop_at_summaries: bool) -> Result<(), Box<dyn Error>> {
    let demo = demo_dir();
    let mut store = Store::init(
        root,
        "demo",
        demo_config(),
        InitOptions {
            resume: true,
            writer: writer.clone(),
        },
    )?;
    store.set_writer(writer);
    let ingestion = ingest_directory(&demo.join("corpus"), Origin::Synthetic)?;
    pipeline::ingest(&mut store, &ingestion)?;
    pipeline::mutate(&mut store, None, None)?;
    let provider = ReplayProvider::load(&demo.join("summaries.jsonl"))?;
    let report = pipeline::summarize(
        &mut store,
        &ProviderConfig::replay(DEMO_MODEL),
        &provider,
        4,
        &SummarizeOptions::default(),
    )?;
    if !report.failures.is_empty() {
        return Err(format!("{} summaries failed", report.failures.len()).into());
    }
    if stop_at_summaries {
        return Ok(());
    }
    let script = load_script(&demo.join("verdicts.jsonl"))?;
    run_scripted(&mut store, DEMO_RATER, false, &script, &mut std::io::sink())?;
    auto_reconcile(&mut store)?;
    emit_report(&mut store, &[])?;
    Ok(())
}

/// Relative path -> bytes for every file under `root`, skipping the lock.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            walk(base, &path, out);
        } else if path.file_name().is_some_and(|n| n != ".lock") {
            let rel = path.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/");
            out.insert(rel, fs::read(&path).unwrap());
        }
    }
}

/// Compares `report/tables/*.csv` (and report.md) against the committed goldens.
pub fn golden_mismatches(root: &Path) -> Vec<String> {
    let golden = demo_dir().join("golden");
    let mut bad = Vec::new();
    let mut files: Vec<String> = fs::read_dir(golden.join("tables"))
        .unwrap()
        .map(|e| format!("tables/{}", e.unwrap().file_name().to_string_lossy()))
        .collect();
    files.push("report.md".into());
    files.sort();
    for rel in files {
        let want = fs::read(golden.join(&rel)).unwrap();
        match fs::read(root.join("report").join(&rel)) {
            Ok(got) if got == want => {}
            Ok(_) => bad.push(format!("{rel} differs")),
            Err(e) => bad.push(format!("{rel}: {e}")),
        }
    }
    bad
}

/// Number of store writes a clean demo run performs.
pub fn demo_write_count() -> usize {
    use std::sync::{Arc, Mutex};
    use sumtrace::fsio::FaultPlan;
    let dir = tempfile::tempdir().unwrap();
    let plan = Arc::new(Mutex::new(FaultPlan::new(usize::MAX, 0.0)));
    run_demo(dir.path(), AtomicWriter::with_faults(plan.clone())).unwrap();
    let n = plan.lock().unwrap().writes();
    n
}

/// Interrupts the demo run at write `fail_at`, reloads the campaign and
/// checks integrity, then resumes without faults and checks the goldens.
pub fn crash_trial(fail_at: usize, partial_fraction: f64) -> Result<(), String> {
    use std::sync::{Arc, Mutex};
    use sumtrace::fsio::FaultPlan;
    use sumtrace::store::MANIFEST;

    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("campaign");
    let plan = Arc::new(Mutex::new(FaultPlan::new(fail_at, partial_fraction)));
    let crashed = run_demo(&root, AtomicWriter::with_faults(plan.clone()));
    if !plan.lock().unwrap().tripped() {
        return Err(format!("fault at write {fail_at} never fired"));
    }
    if crashed.is_ok() {
        return Err(format!("run survived a fault at write {fail_at}"));
    }
    if root.join(MANIFEST).exists() {
        let store = Store::open(&root).map_err(|e| format!("reload after fault at {fail_at}: {e}"))?;
        let report = store.integrity_check();
        if !report.is_clean() {
            return Err(format!("fault at {fail_at}: {:?}", report.findings));
        }
        let leftovers = snapshot(&root).keys().filter(|k| k.contains(sumtrace::fsio::TMP_MARKER)).count();
        if leftovers > 0 {
            return Err(format!("fault at {fail_at}: {leftovers} temp file(s) survived reload"));
        }
    }
    run_demo(&root, AtomicWriter::default()).map_err(|e| format!("resume after fault at {fail_at}: {e}"))?;
    let bad = golden_mismatches(&root);
    if !bad.is_empty() {
        return Err(format!("resume after fault at {fail_at}: {}", bad.join(", ")));
    }
    let store = Store::open_read_only(&root).map_err(|e| e.to_string())?;
    if !store.integrity_check().is_clean() {
        return Err(format!("resume after fault at {fail_at}: integrity findings"));
    }
    Ok(())
}
