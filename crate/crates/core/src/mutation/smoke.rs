//! Optional behavioural screening: run original and mutant under the same
//! driver inputs and compare exit status and stdout.

use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::Mutant;
use crate::corpus::Program;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerConfig {
    /// Command prefix; the subject file path is appended as the last argument
    /// (e.g. `["python3"]`, or a sandbox wrapper around it).
    pub command: Vec<String>,
    #[serde(default)]
    pub stdin: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmokeVerdict {
    Diverged,
    NoDifferenceObserved,
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmokeOutcome {
    pub verdict: SmokeVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, PartialEq, Eq)]
enum Observation {
    Completed { code: Option<i32>, stdout: Vec<u8> },
    TimedOut,
}

/// Runs both versions; `NoDifferenceObserved` marks the mutant as suspected
/// equivalent. A timeout counts as an observation, not a failure.
pub fn smoke_check(program: &Program, mutant: &mut Mutant, runner: Option<&RunnerConfig>) -> SmokeOutcome {
    let Some(runner) = runner.filter(|r| !r.command.is_empty()) else {
        return SmokeOutcome {
            verdict: SmokeVerdict::NotRun,
            detail: None,
        };
    };
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return not_run(format!("tempdir: {e}")),
    };
    let original = match observe(dir.path(), "original", &program.source_text, runner) {
        Ok(o) => o,
        Err(e) => return not_run(e),
    };
    let mutated = match observe(dir.path(), "mutant", &mutant.mutated_source, runner) {
        Ok(o) => o,
        Err(e) => return not_run(e),
    };
    let outcome = match (&original, &mutated) {
        (Observation::TimedOut, Observation::TimedOut) => SmokeOutcome {
            verdict: SmokeVerdict::NoDifferenceObserved,
            detail: Some("both versions timed out".into()),
        },
        (Observation::Completed { .. }, Observation::TimedOut) => SmokeOutcome {
            verdict: SmokeVerdict::Diverged,
            detail: Some("mutant timed out".into()),
        },
        (Observation::TimedOut, Observation::Completed { .. }) => SmokeOutcome {
            verdict: SmokeVerdict::Diverged,
            detail: Some("original timed out, mutant completed".into()),
        },
        (a, b) if a == b => SmokeOutcome {
            verdict: SmokeVerdict::NoDifferenceObserved,
            detail: None,
        },
        (
            Observation::Completed { code: ca, .. },
            Observation::Completed { code: cb, .. },
        ) => SmokeOutcome {
            verdict: SmokeVerdict::Diverged,
            detail: Some(if ca != cb {
                format!("exit status {ca:?} vs {cb:?}")
            } else {
                "stdout differs".to_string()
            }),
        },
    };
    if outcome.verdict == SmokeVerdict::NoDifferenceObserved {
        mutant.suspected_equivalent = true;
    }
    outcome
}

fn not_run(detail: String) -> SmokeOutcome {
    SmokeOutcome {
        verdict: SmokeVerdict::NotRun,
        detail: Some(detail),
    }
}

fn observe(dir: &Path, stem: &str, source: &str, runner: &RunnerConfig) -> Result<Observation, String> {
    let file = dir.join(format!("{stem}.py"));
    std::fs::write(&file, source).map_err(|e| format!("write {}: {e}", file.display()))?;
    let mut child = Command::new(&runner.command[0])
        .args(&runner.command[1..])
        .arg(&file)
        .current_dir(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| format!("spawn `{}`: {e}", runner.command[0]))?;

    let mut stdin = child.stdin.take();
    let input = runner.stdin.clone().unwrap_or_default();
    let feeder = thread::spawn(move || {
        if let Some(s) = stdin.as_mut() {
            let _ = s.write_all(input.as_bytes());
        }
    });
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });

    let deadline = Instant::now() + Duration::from_millis(runner.timeout_ms);
    let status: Option<ExitStatus> = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(format!("wait: {e}")),
        }
    };
    let _ = feeder.join();
    let stdout = reader.join().unwrap_or_default();
    Ok(match status {
        Some(s) => Observation::Completed {
            code: s.code(),
            stdout,
        },
        None => Observation::TimedOut,
    })
}
