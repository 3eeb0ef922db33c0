//! Terminal review: renders the same items as the HTTP API side by side and
//! reads verdicts from a prompt or from a script.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::Deserialize;

use super::ops::{next_pending, submit_verdict, DiffOp, ReviewError, ReviewItem};
use super::verdict::{FailureMode, Label, Verdict};
use crate::store::{Store, StoreError};

const COLUMN: usize = 58;

pub fn render_item(item: &ReviewItem) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "== {} ({}/{}) {} / {} ==\n",
        item.mutant_id,
        item.position,
        item.total,
        item.mutation_type.as_str(),
        item.bucket.as_str()
    ));
    match &item.code_diff {
        Some(diff) => {
            out.push_str(diff);
            if !diff.ends_with('\n') {
                out.push('\n');
            }
        }
        None => out.push_str("(blind mode: code diff hidden)\n"),
    }
    out.push('\n');
    let left = wrap(&item.original_summary, COLUMN);
    let right = wrap(&item.mutated_summary, COLUMN);
    out.push_str(&format!("{:<COLUMN$} | {}\n", "ORIGINAL SUMMARY", "MUTATED SUMMARY"));
    out.push_str(&format!("{} | {}\n", "-".repeat(COLUMN), "-".repeat(COLUMN)));
    for i in 0..left.len().max(right.len()) {
        let l = left.get(i).map(String::as_str).unwrap_or("");
        let r = right.get(i).map(String::as_str).unwrap_or("");
        out.push_str(&format!("{l:<COLUMN$} | {r}\n"));
    }
    out.push_str("\nchanged words: ");
    let marks: Vec<String> = item
        .summary_diff
        .iter()
        .filter(|s| s.op != DiffOp::Equal && !s.text.trim().is_empty())
        .map(|s| match s.op {
            DiffOp::Delete => format!("[-{}-]", s.text.trim()),
            _ => format!("{{+{}+}}", s.text.trim()),
        })
        .collect();
    out.push_str(if marks.is_empty() { "(none)" } else { "" });
    out.push_str(&marks.join(" "));
    out.push('\n');
    out
}

fn wrap(text: &str, width: usize) -> Vec<String> {
    let mut lines = Vec::new();
    for para in text.lines() {
        let mut line = String::new();
        for word in para.split_whitespace() {
            if !line.is_empty() && line.chars().count() + 1 + word.chars().count() > width {
                lines.push(std::mem::take(&mut line));
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(word);
        }
        lines.push(line);
    }
    lines
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionSummary {
    pub judged: usize,
    pub remaining: bool,
}

/// Interactive loop. Keys: `p`/`n` for the label, then for Negative an
/// optional `1` (TooAbstract) or `2` (DescribesOriginal), for Positive an
/// optional `b` (recognized as bug); anything after `#` is the note.
/// `q` quits.
pub fn run_interactive(
    store: &mut Store,
    rater: &str,
    blind: bool,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<SessionSummary, ReviewError> {
    let io_err = |e: io::Error| ReviewError::Store(StoreError::io(Path::new("<terminal>"), e));
    let mut summary = SessionSummary::default();
    while let Some(item) = next_pending(store, rater, blind)? {
        write!(output, "{}", render_item(&item)).map_err(io_err)?;
        loop {
            write!(output, "verdict [p/n][1/2/b] [# note] (q to quit)> ").map_err(io_err)?;
            output.flush().map_err(io_err)?;
            let mut line = String::new();
            if input.read_line(&mut line).map_err(io_err)? == 0 || line.trim() == "q" {
                summary.remaining = true;
                return Ok(summary);
            }
            match parse_keys(&line) {
                Ok((label, mode, bug, note)) => {
                    let mut v = Verdict::new(&item.mutant_id, rater, label);
                    v.failure_mode = mode;
                    v.recognized_as_bug = bug;
                    v.note = note;
                    match submit_verdict(store, v) {
                        Ok(_) => {
                            summary.judged += 1;
                            break;
                        }
                        Err(ReviewError::Verdict(e)) => writeln!(output, "rejected: {e}").map_err(io_err)?,
                        Err(e) => return Err(e),
                    }
                }
                Err(msg) => writeln!(output, "{msg}").map_err(io_err)?,
            }
        }
    }
    writeln!(output, "all items judged by {rater}").map_err(io_err)?;
    Ok(summary)
}

fn parse_keys(line: &str) -> Result<(Label, Option<FailureMode>, bool, String), String> {
    let (keys, note) = match line.split_once('#') {
        Some((k, n)) => (k, n.trim().to_string()),
        None => (line, String::new()),
    };
    let keys: Vec<char> = keys.chars().filter(|c| !c.is_whitespace()).collect();
    let label = match keys.first().map(|c| c.to_ascii_lowercase()) {
        Some('p') => Label::Positive,
        Some('n') => Label::Negative,
        _ => return Err("start with p (Positive) or n (Negative)".into()),
    };
    let mut mode = None;
    let mut bug = false;
    for k in &keys[1..] {
        match k.to_ascii_lowercase() {
            '1' => mode = Some(FailureMode::TooAbstract),
            '2' => mode = Some(FailureMode::DescribesOriginal),
            'b' => bug = true,
            other => return Err(format!("unknown key `{other}`")),
        }
    }
    Ok((label, mode, bug, note))
}

/// One scripted answer, keyed by mutant id.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ScriptedVerdict {
    pub mutant_id: String,
    #[serde(default)]
    pub rater_id: Option<String>,
    pub label: Label,
    #[serde(default)]
    pub failure_mode: Option<FailureMode>,
    #[serde(default)]
    pub recognized_as_bug: bool,
    #[serde(default)]
    pub note: String,
}

pub fn load_script(path: &Path) -> Result<Vec<ScriptedVerdict>, ReviewError> {
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: ScriptedVerdict = serde_json::from_str(line).map_err(|e| {
            StoreError::Validation(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Drives the terminal session from a script: every item is rendered in
/// presentation order and answered with the scripted verdict for it.
/// Script lines for other raters are ignored.
pub fn run_scripted(
    store: &mut Store,
    rater: &str,
    blind: bool,
    script: &[ScriptedVerdict],
    output: &mut dyn Write,
) -> Result<SessionSummary, ReviewError> {
    let answers: BTreeMap<&str, &ScriptedVerdict> = script
        .iter()
        .filter(|s| s.rater_id.as_deref().is_none_or(|r| r == rater))
        .map(|s| (s.mutant_id.as_str(), s))
        .collect();
    let io_err = |e: io::Error| ReviewError::Store(StoreError::io(Path::new("<terminal>"), e));
    // Resubmit answers to already judged items so a rerun is a no-op.
    for s in answers.values() {
        if store.verdict(rater, &s.mutant_id)?.is_some() {
            submit_verdict(store, to_verdict(s, rater))?;
        }
    }
    let mut summary = SessionSummary::default();
    while let Some(item) = next_pending(store, rater, blind)? {
        let Some(answer) = answers.get(item.mutant_id.as_str()) else {
            summary.remaining = true;
            writeln!(output, "no scripted verdict for {}; stopping", item.mutant_id).map_err(io_err)?;
            return Ok(summary);
        };
        write!(output, "{}", render_item(&item)).map_err(io_err)?;
        let stored = submit_verdict(store, to_verdict(answer, rater))?;
        writeln!(
            output,
            "> {}{}{}\n",
            stored.label,
            stored.failure_mode.map(|m| format!(" {}", m.as_str())).unwrap_or_default(),
            if stored.recognized_as_bug { " bug" } else { "" }
        )
        .map_err(io_err)?;
        summary.judged += 1;
    }
    Ok(summary)
}

fn to_verdict(s: &ScriptedVerdict, rater: &str) -> Verdict {
    let mut v = Verdict::new(&s.mutant_id, rater, s.label);
    v.failure_mode = s.failure_mode;
    v.recognized_as_bug = s.recognized_as_bug;
    v.note = s.note.clone();
    v
}
