use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use similar::{ChangeTag, TextDiff};
use thiserror::Error;

use super::verdict::{check_tags, validate_rater, FailureMode, Label, ReconcileSource, ReconciledVerdict, Verdict, VerdictError};
use crate::analytics::stats::{cohens_kappa, Confusion, StatsError};
use crate::mutation::{unified_diff, LocationBucket, Mutant, MutationType};
use crate::store::{Phase, Store, StoreError};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Verdict(#[from] VerdictError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("raters `{a}` and `{b}` share no judged items")]
    EmptyIntersection { a: String, b: String },
    #[error("mutant `{0}` has no verdicts to reconcile")]
    NoVerdicts(String),
    #[error("raters agree on `{0}`; pass force to override an agreement")]
    NotDisagreement(String),
}

impl ReviewError {
    pub fn phase(msg: impl Into<String>) -> Self {
        ReviewError::Store(StoreError::Phase(msg.into()))
    }
}

pub type Result<T, E = ReviewError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffOp {
    Equal,
    Delete,
    Insert,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSegment {
    pub op: DiffOp,
    pub text: String,
}

/// Word-level diff, merging adjacent segments of the same kind.
pub fn word_diff(old: &str, new: &str) -> Vec<DiffSegment> {
    let diff = TextDiff::from_words(old, new);
    let mut out: Vec<DiffSegment> = Vec::new();
    for change in diff.iter_all_changes() {
        let op = match change.tag() {
            ChangeTag::Equal => DiffOp::Equal,
            ChangeTag::Delete => DiffOp::Delete,
            ChangeTag::Insert => DiffOp::Insert,
        };
        match out.last_mut() {
            Some(last) if last.op == op => last.text.push_str(change.value()),
            _ => out.push(DiffSegment {
                op,
                text: change.value().to_string(),
            }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub mutant_id: String,
    pub program_id: String,
    pub mutation_type: MutationType,
    pub bucket: LocationBucket,
    pub original_code: String,
    pub mutated_code: String,
    /// Unified diff; absent in blind mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_diff: Option<String>,
    pub original_summary: String,
    pub mutated_summary: String,
    pub summary_diff: Vec<DiffSegment>,
    pub blind: bool,
    /// 1-based position in this rater's order.
    pub position: usize,
    pub total: usize,
}

/// Per-rater presentation order: mutant ids shuffled by a seed derived from
/// the campaign's review seed and the rater id.
pub fn presentation_order(mutant_ids: &[String], review_seed: u64, rater: &str) -> Vec<String> {
    let mut h = Sha256::new();
    h.update(b"sumtrace-review-v1");
    h.update(review_seed.to_le_bytes());
    h.update(rater.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
    let mut ids = mutant_ids.to_vec();
    ids.sort();
    ids.shuffle(&mut rng);
    ids
}

pub fn build_item(store: &Store, mutant: &Mutant, blind: bool) -> Result<ReviewItem> {
    let program = store.program(&mutant.program_id)?;
    let missing = |s: &str| StoreError::Integrity(vec![format!("missing summary for `{s}`")]);
    let original = store
        .summary_for(&program.id)?
        .filter(|r| r.is_ok())
        .ok_or_else(|| missing(&program.id))?;
    let mutated = store
        .summary_for(&mutant.id)?
        .filter(|r| r.is_ok())
        .ok_or_else(|| missing(&mutant.id))?;
    let code_diff = (!blind).then(|| {
        unified_diff(
            &program.source_text,
            &mutant.mutated_source,
            &format!("programs/{}.py", program.id),
            &format!("mutants/{}/{}", program.id, mutant.file_name()),
        )
    });
    Ok(ReviewItem {
        mutant_id: mutant.id.clone(),
        program_id: program.id.clone(),
        mutation_type: mutant.mutation_type,
        bucket: mutant.bucket,
        original_code: program.source_text,
        mutated_code: mutant.mutated_source.clone(),
        code_diff,
        summary_diff: word_diff(&original.summary_text, &mutated.summary_text),
        original_summary: original.summary_text,
        mutated_summary: mutated.summary_text,
        blind,
        position: 0,
        total: 0,
    })
}

/// The next mutant this rater has not judged, or `None` when done.
pub fn next_pending(store: &Store, rater: &str, blind: bool) -> Result<Option<ReviewItem>> {
    validate_rater(rater)?;
    store.require_phase(Phase::Summarized, "review")?;
    let mutants = store.mutants()?;
    let ids: Vec<String> = mutants.iter().map(|m| m.id.clone()).collect();
    let order = presentation_order(&ids, store.config().review_seed, rater);
    let by_id: BTreeMap<&str, &Mutant> = mutants.iter().map(|m| (m.id.as_str(), m)).collect();
    for (i, id) in order.iter().enumerate() {
        if store.verdict(rater, id)?.is_some() {
            continue;
        }
        let mut item = build_item(store, by_id[id.as_str()], blind)?;
        item.position = i + 1;
        item.total = order.len();
        return Ok(Some(item));
    }
    Ok(None)
}

/// Stores a verdict. An identical resubmission is a no-op; a changed one
/// overwrites the old verdict and records what it replaced.
pub fn submit_verdict(store: &mut Store, verdict: Verdict) -> Result<Verdict> {
    verdict.validate()?;
    let existing = store.verdict(&verdict.rater_id, &verdict.mutant_id)?;
    if let Some(old) = &existing {
        if same_judgement(old, &verdict) {
            return Ok(old.clone());
        }
    }
    store.require_phase(Phase::Summarized, "submitting verdicts")?;
    if store.phase() >= Phase::Reconciled {
        return Err(ReviewError::phase("campaign is reconciled; verdicts are closed"));
    }
    let mutant = store.mutant(&verdict.mutant_id)?;
    for subject in [&mutant.program_id, &mutant.id] {
        if store.summary_for(subject)?.is_none_or(|r| !r.is_ok()) {
            return Err(StoreError::Integrity(vec![format!("missing summary for `{subject}`")]).into());
        }
    }
    let mut stored = verdict;
    if let Some(old) = existing {
        stored.audit = old.audit;
        stored.audit.push(format!(
            "replaced {}{} from {}",
            old.label,
            old.failure_mode.map(|f| format!("/{}", f.as_str())).unwrap_or_default(),
            old.decided_at.to_rfc3339()
        ));
    }
    store.put_verdict(&stored)?;
    store.advance(Phase::UnderReview)?;
    Ok(stored)
}

fn same_judgement(a: &Verdict, b: &Verdict) -> bool {
    a.label == b.label
        && a.failure_mode == b.failure_mode
        && a.recognized_as_bug == b.recognized_as_bug
        && a.note == b.note
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub rater_a: String,
    pub rater_b: String,
    pub n_items: u64,
    pub agreements: u64,
    pub percent_agreement: f64,
    pub kappa: f64,
    /// Rows: rater a Positive/Negative; columns: rater b Positive/Negative.
    pub confusion: [[u64; 2]; 2],
}

/// Confusion of two label maps over their shared keys.
pub fn confusion_of(a: &BTreeMap<String, Label>, b: &BTreeMap<String, Label>) -> Confusion {
    let mut m = [[0u64; 2]; 2];
    for (id, la) in a {
        if let Some(lb) = b.get(id) {
            let i = usize::from(*la == Label::Negative);
            let j = usize::from(*lb == Label::Negative);
            m[i][j] += 1;
        }
    }
    Confusion::new(m)
}

pub fn labels_by_rater(store: &Store) -> Result<BTreeMap<String, BTreeMap<String, Label>>> {
    let mut out: BTreeMap<String, BTreeMap<String, Label>> = BTreeMap::new();
    for v in store.verdicts()? {
        out.entry(v.rater_id).or_default().insert(v.mutant_id, v.label);
    }
    Ok(out)
}

pub fn agreement(store: &Store, rater_a: &str, rater_b: &str) -> Result<AgreementResult> {
    validate_rater(rater_a)?;
    validate_rater(rater_b)?;
    let labels = labels_by_rater(store)?;
    let empty = BTreeMap::new();
    let a = labels.get(rater_a).unwrap_or(&empty);
    let b = labels.get(rater_b).unwrap_or(&empty);
    agreement_of(rater_a, a, rater_b, b)
}

pub fn agreement_of(
    rater_a: &str,
    a: &BTreeMap<String, Label>,
    rater_b: &str,
    b: &BTreeMap<String, Label>,
) -> Result<AgreementResult> {
    let confusion = confusion_of(a, b);
    if confusion.total() == 0 {
        return Err(ReviewError::EmptyIntersection {
            a: rater_a.into(),
            b: rater_b.into(),
        });
    }
    let kappa = cohens_kappa(&confusion)?;
    Ok(AgreementResult {
        rater_a: rater_a.into(),
        rater_b: rater_b.into(),
        n_items: confusion.total(),
        agreements: confusion.agreements(),
        percent_agreement: confusion.percent_agreement(),
        kappa,
        confusion: confusion.matrix(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconcileRequest {
    pub mutant_id: String,
    pub label: Label,
    #[serde(default)]
    pub failure_mode: Option<FailureMode>,
    #[serde(default)]
    pub recognized_as_bug: bool,
    pub resolver_id: String,
    #[serde(default)]
    pub note: String,
    /// Required to override raters who agree.
    #[serde(default)]
    pub force: bool,
}

/// Records a resolver's final label. Allowed for disagreements and for
/// single-rater items; overriding an agreement needs `force`.
pub fn reconcile(store: &mut Store, req: ReconcileRequest) -> Result<ReconciledVerdict> {
    validate_rater(&req.resolver_id)?;
    check_tags(req.label, req.failure_mode, req.recognized_as_bug)?;
    store.require_phase(Phase::Summarized, "reconcile")?;
    store.mutant(&req.mutant_id)?;
    let verdicts: Vec<Verdict> = store
        .verdicts()?
        .into_iter()
        .filter(|v| v.mutant_id == req.mutant_id)
        .collect();
    if verdicts.is_empty() {
        return Err(ReviewError::NoVerdicts(req.mutant_id));
    }
    let rater_labels: BTreeMap<String, Label> =
        verdicts.iter().map(|v| (v.rater_id.clone(), v.label)).collect();
    let distinct: BTreeSet<Label> = rater_labels.values().copied().collect();
    let source = if distinct.len() > 1 || rater_labels.len() == 1 {
        ReconcileSource::Resolved
    } else if req.force {
        ReconcileSource::Forced
    } else {
        return Err(ReviewError::NotDisagreement(req.mutant_id));
    };
    let mut note = req.note;
    if source == ReconcileSource::Forced {
        let agreed = distinct.iter().next().map(|l| l.as_str()).unwrap_or_default();
        note = format!("[forced over agreed {agreed}] {note}").trim_end().to_string();
    }
    let decided_at = verdicts.iter().map(|v| v.decided_at).max().unwrap_or_default();
    let r = ReconciledVerdict {
        mutant_id: req.mutant_id,
        label: req.label,
        failure_mode: req.failure_mode,
        recognized_as_bug: req.recognized_as_bug,
        resolver_id: req.resolver_id,
        note,
        source,
        rater_labels,
        decided_at,
    };
    store.put_reconciled(&r)?;
    Ok(r)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoReconcileReport {
    pub newly_reconciled: usize,
    pub disagreements: Vec<String>,
    pub unjudged: Vec<String>,
    pub complete: bool,
}

/// Reconciles every item where all raters agree (including single-rater
/// items, copied verbatim), then advances to Reconciled when nothing is left.
pub fn auto_reconcile(store: &mut Store) -> Result<AutoReconcileReport> {
    store.require_phase(Phase::Summarized, "reconcile")?;
    let mut by_mutant: BTreeMap<String, Vec<Verdict>> = BTreeMap::new();
    for v in store.verdicts()? {
        by_mutant.entry(v.mutant_id.clone()).or_default().push(v);
    }
    let reconciled = store.reconciled()?;
    let mut report = AutoReconcileReport::default();
    for m in store.mutant_index()?.mutants {
        if reconciled.contains_key(&m.id) {
            continue;
        }
        let Some(verdicts) = by_mutant.get(&m.id) else {
            report.unjudged.push(m.id);
            continue;
        };
        let first = &verdicts[0];
        if verdicts.iter().any(|v| v.label != first.label) {
            report.disagreements.push(m.id);
            continue;
        }
        let unanimous_mode = verdicts
            .iter()
            .all(|v| v.failure_mode == first.failure_mode)
            .then_some(first.failure_mode)
            .flatten();
        let r = ReconciledVerdict {
            mutant_id: m.id.clone(),
            label: first.label,
            failure_mode: unanimous_mode,
            recognized_as_bug: verdicts.iter().all(|v| v.recognized_as_bug),
            resolver_id: "auto".into(),
            note: if verdicts.len() == 1 { first.note.clone() } else { String::new() },
            source: ReconcileSource::Auto,
            rater_labels: verdicts.iter().map(|v| (v.rater_id.clone(), v.label)).collect(),
            decided_at: verdicts.iter().map(|v| v.decided_at).max().unwrap_or_default(),
        };
        if store.put_reconciled(&r)? {
            report.newly_reconciled += 1;
        }
    }
    report.complete = report.disagreements.is_empty() && report.unjudged.is_empty();
    if report.complete {
        store.advance(Phase::Reconciled)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterProgress {
    pub rater_id: String,
    pub judged: usize,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub campaign_id: String,
    pub phase: Phase,
    pub total_mutants: usize,
    pub raters: Vec<RaterProgress>,
    pub reconciled: usize,
    /// Mutants on which at least two raters disagree.
    pub disagreements: Vec<String>,
}

pub fn progress(store: &Store) -> Result<Progress> {
    let labels = labels_by_rater(store)?;
    let mut per_mutant: BTreeMap<&str, BTreeSet<Label>> = BTreeMap::new();
    for m in labels.values() {
        for (id, l) in m {
            per_mutant.entry(id).or_default().insert(*l);
        }
    }
    Ok(Progress {
        campaign_id: store.id().to_string(),
        phase: store.phase(),
        total_mutants: store.mutant_index()?.mutants.len(),
        raters: labels
            .iter()
            .map(|(r, m)| RaterProgress {
                rater_id: r.clone(),
                judged: m.len(),
                positives: m.values().filter(|l| **l == Label::Positive).count(),
            })
            .collect(),
        reconciled: store.reconciled()?.len(),
        disagreements: per_mutant
            .into_iter()
            .filter(|(_, s)| s.len() > 1)
            .map(|(id, _)| id.to_string())
            .collect(),
    })
}
