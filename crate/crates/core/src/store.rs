//! Flat-file campaign store.
//!
//! Layout under the campaign root:
//!
//! ```text
//! campaign.json                      manifest: id, config snapshot, phase
//! programs.json                      accepted program metadata + rejections
//! programs/{id}.py
//! mutants.json                       mutant metadata + plan shortfalls
//! mutants/{program}/{type}_{bucket}_{n}.py
//! summaries.json                     subject ref -> cache key
//! summaries/{cache_key}.json
//! verdicts/{rater}/{mutant}.json
//! reconciled/{mutant}.json
//! report/
//! ```
//!
//! Every file goes through write-then-rename, and index files are written
//! after the artifacts they list, so an interrupted write leaves at worst an
//! unlisted artifact or a stray temp file (swept on the next writable open).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{IngestManifest, Program, ProgramMeta, Rejection};
use crate::fsio::{self, AtomicWriter};
use crate::mutation::{EngineOptions, Mutant, MutationError, Quota, RunnerConfig, Shortfall};
use crate::review::{ReconciledVerdict, Verdict, VerdictError};
use crate::summary::{build_prompt, cache_key, DirCache, ProviderConfig, SummaryError, SummaryRecord};

pub const MANIFEST: &str = "campaign.json";
const LOCK: &str = ".lock";
const FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Manifest written, no corpus attached yet.
    Created,
    Ingested,
    Mutated,
    Summarized,
    UnderReview,
    Reconciled,
    Reported,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Created,
        Phase::Ingested,
        Phase::Mutated,
        Phase::Summarized,
        Phase::UnderReview,
        Phase::Reconciled,
        Phase::Reported,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Created => "Created",
            Phase::Ingested => "Ingested",
            Phase::Mutated => "Mutated",
            Phase::Summarized => "Summarized",
            Phase::UnderReview => "UnderReview",
            Phase::Reconciled => "Reconciled",
            Phase::Reported => "Reported",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown phase `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0} already holds a campaign or other files; pass resume to reuse it")]
    Exists(PathBuf),
    #[error("{0} is not a campaign directory")]
    NotACampaign(PathBuf),
    #[error("campaign at {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("phase violation: {0}")]
    Phase(String),
    #[error("integrity check failed: {}", .0.join("; "))]
    Integrity(Vec<String>),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error(transparent)]
    Verdict(#[from] VerdictError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

/// Settings recorded verbatim in the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota: Option<Quota>,
    /// The quota exactly as the user wrote it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota_spec: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub engine: EngineOptions,
    /// Provider snapshot; the credential variable name is never stored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<ProviderConfig>,
    /// Seeds the per-rater presentation order.
    #[serde(default)]
    pub review_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runner: Option<RunnerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub format: u32,
    pub id: String,
    pub config: CampaignConfig,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planned_mutants: Option<usize>,
}

/// Manifest plus the id lists derived from the index files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub id: String,
    pub config: CampaignConfig,
    pub phase: Phase,
    pub planned_mutants: Option<usize>,
    pub program_ids: Vec<String>,
    pub mutant_ids: Vec<String>,
    /// Cache keys of the indexed summaries.
    pub summary_ids: Vec<String>,
    /// `{rater}/{mutant}` for every stored verdict.
    pub verdict_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantIndex {
    pub mutants: Vec<Mutant>,
    pub shortfalls: Vec<Shortfall>,
    /// Programs whose plan has been recorded, including empty plans.
    #[serde(default)]
    pub planned_programs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FindingKind {
    Unreadable,
    MissingArtifact,
    DanglingReference,
    CacheKeyMismatch,
    PhaseGap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}: {}", self.kind, self.subject, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub findings: Vec<Finding>,
}

impl IntegrityReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, kind: FindingKind, subject: impl Into<String>, detail: impl Into<String>) {
        self.findings.push(Finding {
            kind,
            subject: subject.into(),
            detail: detail.into(),
        });
    }
}

#[derive(Debug, Clone, Default)]
pub struct InitOptions {
    pub resume: bool,
    pub writer: AtomicWriter,
}

pub struct Store {
    root: PathBuf,
    manifest: CampaignManifest,
    writer: AtomicWriter,
    read_only: bool,
    _lock: Option<File>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store")
            .field("root", &self.root)
            .field("phase", &self.manifest.phase)
            .field("read_only", &self.read_only)
            .finish()
    }
}

impl Store {
    /// Creates a campaign in a fresh (absent or empty) directory.
    pub fn init(root: &Path, id: &str, config: CampaignConfig, options: InitOptions) -> Result<Store> {
        if root.join(MANIFEST).exists() {
            if !options.resume {
                return Err(StoreError::Exists(root.to_path_buf()));
            }
            let mut store = Store::open(root)?;
            store.writer = options.writer;
            return Ok(store);
        }
        if root.is_dir() && !options.resume {
            let occupied = fs::read_dir(root)
                .map_err(|e| StoreError::io(root, e))?
                .next()
                .is_some();
            if occupied {
                return Err(StoreError::Exists(root.to_path_buf()));
            }
        }
        if id.is_empty() || !is_safe_component(id) {
            return Err(StoreError::Validation(format!("campaign id `{id}` is not a plain name")));
        }
        fs::create_dir_all(root).map_err(|e| StoreError::io(root, e))?;
        let lock = acquire_lock(root)?;
        fsio::sweep_temp_files(root).map_err(|e| StoreError::io(root, e))?;
        let mut config = config;
        config.provider = config.provider.map(|p| p.snapshot());
        let manifest = CampaignManifest {
            format: FORMAT,
            id: id.to_string(),
            planned_mutants: None,
            config,
            phase: Phase::Created,
        };
        let store = Store {
            root: root.to_path_buf(),
            manifest,
            writer: options.writer,
            read_only: false,
            _lock: Some(lock),
        };
        store.save_manifest()?;
        Ok(store)
    }

    /// Opens for writing: takes the advisory lock and sweeps temp files.
    pub fn open(root: &Path) -> Result<Store> {
        let manifest = read_manifest(root)?;
        let lock = acquire_lock(root)?;
        fsio::sweep_temp_files(root).map_err(|e| StoreError::io(root, e))?;
        Ok(Store {
            root: root.to_path_buf(),
            manifest,
            writer: AtomicWriter::default(),
            read_only: false,
            _lock: Some(lock),
        })
    }

    /// Opens without the lock; every mutating call fails.
    pub fn open_read_only(root: &Path) -> Result<Store> {
        let manifest = read_manifest(root)?;
        Ok(Store {
            root: root.to_path_buf(),
            manifest,
            writer: AtomicWriter::default(),
            read_only: true,
            _lock: None,
        })
    }

    pub fn set_writer(&mut self, writer: AtomicWriter) {
        self.writer = writer;
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn id(&self) -> &str {
        &self.manifest.id
    }

    pub fn manifest(&self) -> &CampaignManifest {
        &self.manifest
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.manifest.config
    }

    pub fn phase(&self) -> Phase {
        self.manifest.phase
    }

    pub fn campaign(&self) -> Result<Campaign> {
        let m = &self.manifest;
        let mut verdict_ids: Vec<String> = self
            .verdicts()?
            .iter()
            .map(|v| format!("{}/{}", v.rater_id, v.mutant_id))
            .collect();
        verdict_ids.sort();
        Ok(Campaign {
            id: m.id.clone(),
            config: m.config.clone(),
            phase: m.phase,
            planned_mutants: m.planned_mutants,
            program_ids: self.program_index()?.accepted.into_iter().map(|p| p.id).collect(),
            mutant_ids: self.mutant_index()?.mutants.into_iter().map(|m| m.id).collect(),
            summary_ids: self.summary_index()?.into_values().collect(),
            verdict_ids,
        })
    }

    fn ensure_writable(&self) -> Result<()> {
        if self.read_only {
            Err(StoreError::Validation("store opened read-only".into()))
        } else {
            Ok(())
        }
    }

    fn save_manifest(&self) -> Result<()> {
        self.write_json(&self.root.join(MANIFEST), &self.manifest).map(|_| ())
    }

    /// Updates config fields and persists the manifest.
    pub fn update_config(&mut self, update: impl FnOnce(&mut CampaignConfig)) -> Result<()> {
        self.ensure_writable()?;
        let before = self.manifest.clone();
        update(&mut self.manifest.config);
        self.manifest.config.provider = self.manifest.config.provider.take().map(|p| p.snapshot());
        self.refresh_planned()?;
        if self.manifest != before {
            self.save_manifest()?;
        }
        Ok(())
    }

    fn refresh_planned(&mut self) -> Result<()> {
        if let Some(q) = &self.manifest.config.quota {
            let programs = self.program_index()?.accepted.len();
            self.manifest.planned_mutants = Some(q.total() * programs);
        }
        Ok(())
    }

    // ---- writes ----

    /// Writes unless the file already holds exactly these bytes.
    /// Returns whether anything was written.
    pub(crate) fn write_bytes(&self, path: &Path, bytes: &[u8]) -> Result<bool> {
        self.ensure_writable()?;
        if let Ok(existing) = fs::read(path) {
            if existing == bytes {
                return Ok(false);
            }
        }
        self.writer.write(path, bytes).map_err(|e| StoreError::io(path, e))?;
        Ok(true)
    }

    pub(crate) fn write_json<T: Serialize + ?Sized>(&self, path: &Path, value: &T) -> Result<bool> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| StoreError::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        bytes.push(b'\n');
        self.write_bytes(path, &bytes)
    }

    fn read_json<T: DeserializeOwned + Default>(&self, rel: &str) -> Result<T> {
        read_json_or_default(&self.root.join(rel))
    }

    // ---- programs ----

    pub fn program_index(&self) -> Result<IngestManifest> {
        self.read_json("programs.json")
    }

    /// Adds programs; returns the number of new program files written.
    /// After mutation, the corpus is frozen.
    pub fn attach_programs(&mut self, programs: &[Program], rejected: &[Rejection]) -> Result<usize> {
        self.ensure_writable()?;
        let mut index = self.program_index()?;
        let known: BTreeMap<String, ProgramMeta> =
            index.accepted.iter().map(|p| (p.id.clone(), p.clone())).collect();
        let mut fresh = Vec::new();
        for p in programs {
            if !is_safe_component(&p.id) {
                return Err(StoreError::Validation(format!("program id `{}` is not a plain name", p.id)));
            }
            match known.get(&p.id) {
                Some(meta) if *meta == p.meta() && self.program_source(&p.id).ok().as_deref() == Some(p.source_text.as_str()) => {}
                Some(_) if self.phase() >= Phase::Mutated => {
                    return Err(StoreError::Phase(format!(
                        "program `{}` changed after mutation; start a new campaign",
                        p.id
                    )))
                }
                _ => fresh.push(p),
            }
        }
        if !fresh.is_empty() && self.phase() >= Phase::Mutated {
            return Err(StoreError::Phase("cannot add programs after mutation".into()));
        }
        let mut written = 0;
        for p in &fresh {
            if self.write_bytes(&self.program_path(&p.id), p.source_text.as_bytes())? {
                written += 1;
            }
        }
        for p in &fresh {
            index.accepted.retain(|m| m.id != p.id);
            index.accepted.push(p.meta());
        }
        index.accepted.sort_by(|a, b| a.id.cmp(&b.id));
        for r in rejected {
            if !index.rejected.contains(r) {
                index.rejected.push(r.clone());
            }
        }
        self.write_json(&self.root.join("programs.json"), &index)?;
        self.refresh_planned()?;
        self.save_manifest()?;
        Ok(written)
    }

    pub fn program_path(&self, id: &str) -> PathBuf {
        self.root.join("programs").join(format!("{id}.py"))
    }

    fn program_source(&self, id: &str) -> Result<String> {
        let path = self.program_path(id);
        fs::read_to_string(&path).map_err(|e| StoreError::io(&path, e))
    }

    pub fn programs(&self) -> Result<Vec<Program>> {
        self.program_index()?
            .accepted
            .into_iter()
            .map(|m| self.hydrate_program(m))
            .collect()
    }

    pub fn program(&self, id: &str) -> Result<Program> {
        let meta = self
            .program_index()?
            .accepted
            .into_iter()
            .find(|p| p.id == id)
            .ok_or_else(|| StoreError::NotFound(format!("program `{id}`")))?;
        self.hydrate_program(meta)
    }

    fn hydrate_program(&self, m: ProgramMeta) -> Result<Program> {
        Ok(Program {
            source_text: self.program_source(&m.id)?,
            id: m.id,
            language: m.language,
            origin: m.origin,
            complexity: m.complexity,
            loc: m.loc,
            title: m.title,
        })
    }

    // ---- mutants ----

    pub fn mutant_index(&self) -> Result<MutantIndex> {
        self.read_json("mutants.json")
    }

    pub fn mutant_path(&self, m: &Mutant) -> PathBuf {
        self.root.join("mutants").join(&m.program_id).join(m.file_name())
    }

    /// Stores one program's plan; returns the number of new mutant files.
    /// A program already planned is left untouched.
    pub fn record_plan(&mut self, program_id: &str, mutants: &[Mutant], shortfalls: &[Shortfall]) -> Result<usize> {
        self.ensure_writable()?;
        let mut index = self.mutant_index()?;
        if index.planned_programs.iter().any(|p| p == program_id) {
            return Ok(0);
        }
        let mut written = 0;
        for m in mutants {
            if m.program_id != program_id {
                return Err(StoreError::Validation(format!("mutant `{}` belongs to another program", m.id)));
            }
            if self.write_bytes(&self.mutant_path(m), m.mutated_source.as_bytes())? {
                written += 1;
            }
        }
        index.mutants.extend(mutants.iter().map(|m| Mutant {
            mutated_source: String::new(),
            ..m.clone()
        }));
        index.shortfalls.extend(shortfalls.iter().cloned());
        index.planned_programs.push(program_id.to_string());
        index.planned_programs.sort();
        self.write_json(&self.root.join("mutants.json"), &index)?;
        Ok(written)
    }

    pub fn mutants(&self) -> Result<Vec<Mutant>> {
        self.mutant_index()?
            .mutants
            .into_iter()
            .map(|m| self.hydrate_mutant(m))
            .collect()
    }

    pub fn mutant(&self, id: &str) -> Result<Mutant> {
        let m = self
            .mutant_index()?
            .mutants
            .into_iter()
            .find(|m| m.id == id)
            .ok_or_else(|| StoreError::NotFound(format!("mutant `{id}`")))?;
        self.hydrate_mutant(m)
    }

    fn hydrate_mutant(&self, mut m: Mutant) -> Result<Mutant> {
        let path = self.mutant_path(&m);
        m.mutated_source = fs::read_to_string(&path).map_err(|e| StoreError::io(&path, e))?;
        Ok(m)
    }

    /// Rewrites the metadata of existing mutants (e.g. smoke-check flags).
    pub fn update_mutant_flags(&mut self, flags: &BTreeMap<String, bool>) -> Result<bool> {
        self.ensure_writable()?;
        let mut index = self.mutant_index()?;
        for m in &mut index.mutants {
            if let Some(&f) = flags.get(&m.id) {
                m.suspected_equivalent = f;
            }
        }
        self.write_json(&self.root.join("mutants.json"), &index)
    }

    // ---- summaries ----

    pub fn summary_cache(&self) -> DirCache {
        DirCache::with_writer(self.root.join("summaries"), self.writer.clone())
    }

    /// subject ref -> cache key.
    pub fn summary_index(&self) -> Result<BTreeMap<String, String>> {
        self.read_json("summaries.json")
    }

    pub fn record_summaries(&mut self, records: &[SummaryRecord]) -> Result<bool> {
        self.ensure_writable()?;
        let mut index = self.summary_index()?;
        for r in records.iter().filter(|r| r.is_ok()) {
            index.insert(r.subject_ref.clone(), r.cache_key.clone());
        }
        self.write_json(&self.root.join("summaries.json"), &index)
    }

    pub fn summary_for(&self, subject_ref: &str) -> Result<Option<SummaryRecord>> {
        let index = self.summary_index()?;
        let Some(key) = index.get(subject_ref) else {
            return Ok(None);
        };
        let path = self.summary_cache().path_for(key);
        if !path.exists() {
            return Ok(None);
        }
        read_json_file(&path).map(Some)
    }

    // ---- verdicts ----

    pub fn verdict_path(&self, rater: &str, mutant_id: &str) -> PathBuf {
        self.root.join("verdicts").join(rater).join(format!("{mutant_id}.json"))
    }

    pub fn verdict(&self, rater: &str, mutant_id: &str) -> Result<Option<Verdict>> {
        let path = self.verdict_path(rater, mutant_id);
        if !path.exists() {
            return Ok(None);
        }
        read_json_file(&path).map(Some)
    }

    pub fn put_verdict(&mut self, verdict: &Verdict) -> Result<bool> {
        verdict.validate()?;
        self.write_json(&self.verdict_path(&verdict.rater_id, &verdict.mutant_id), verdict)
    }

    /// Every stored verdict, ordered by rater then mutant.
    pub fn verdicts(&self) -> Result<Vec<Verdict>> {
        let dir = self.root.join("verdicts");
        let mut out = Vec::new();
        for rater_dir in sorted_entries(&dir)? {
            if !rater_dir.is_dir() {
                continue;
            }
            for file in sorted_entries(&rater_dir)? {
                if file.extension().is_some_and(|x| x == "json") && !fsio::is_temp_file(&file) {
                    out.push(read_json_file(&file)?);
                }
            }
        }
        Ok(out)
    }

    pub fn raters(&self) -> Result<Vec<String>> {
        let set: BTreeSet<String> = self.verdicts()?.into_iter().map(|v| v.rater_id).collect();
        Ok(set.into_iter().collect())
    }

    // ---- reconciled ----

    pub fn put_reconciled(&mut self, r: &ReconciledVerdict) -> Result<bool> {
        self.write_json(&self.root.join("reconciled").join(format!("{}.json", r.mutant_id)), r)
    }

    pub fn reconciled(&self) -> Result<BTreeMap<String, ReconciledVerdict>> {
        let mut out = BTreeMap::new();
        for file in sorted_entries(&self.root.join("reconciled"))? {
            if file.extension().is_some_and(|x| x == "json") && !fsio::is_temp_file(&file) {
                let r: ReconciledVerdict = read_json_file(&file)?;
                out.insert(r.mutant_id.clone(), r);
            }
        }
        Ok(out)
    }

    // ---- report ----

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    /// Writes `report/{rel}`; returns whether the bytes changed.
    pub fn write_report_file(&self, rel: &str, bytes: &[u8]) -> Result<bool> {
        self.write_bytes(&self.report_dir().join(rel), bytes)
    }

    // ---- phases ----

    /// What is missing before the campaign may sit at `target`.
    pub fn gaps(&self, target: Phase) -> Result<Vec<String>> {
        let mut gaps = Vec::new();
        if target >= Phase::Ingested && self.program_index()?.accepted.is_empty() {
            gaps.push("no programs ingested".to_string());
        }
        if target >= Phase::Mutated {
            let index = self.mutant_index()?;
            for p in self.program_index()?.accepted {
                if !index.planned_programs.contains(&p.id) {
                    gaps.push(format!("program `{}` has no mutation plan", p.id));
                }
            }
        }
        if target >= Phase::Summarized {
            let summaries = self.summary_index()?;
            let cache = self.summary_cache();
            let programs = self.program_index()?.accepted.into_iter().map(|p| p.id);
            let mutants = self.mutant_index()?.mutants.into_iter().map(|m| m.id);
            for subject in programs.chain(mutants) {
                match summaries.get(&subject) {
                    Some(key) if cache.path_for(key).exists() => {}
                    _ => gaps.push(format!("missing summary for `{subject}`")),
                }
            }
        }
        if target >= Phase::Reconciled {
            let reconciled = self.reconciled()?;
            for m in self.mutant_index()?.mutants {
                if !reconciled.contains_key(&m.id) {
                    gaps.push(format!("mutant `{}` has no reconciled verdict", m.id));
                }
            }
        }
        if target >= Phase::Reported && !self.report_dir().join("report.md").exists() {
            gaps.push("report/report.md missing".to_string());
        }
        Ok(gaps)
    }

    /// Moves the phase forward. Going to the current or an earlier phase is
    /// a no-op; returns whether the phase changed.
    pub fn advance(&mut self, target: Phase) -> Result<bool> {
        if target <= self.phase() {
            return Ok(false);
        }
        self.ensure_writable()?;
        let gaps = self.gaps(target)?;
        if !gaps.is_empty() {
            return Err(StoreError::Integrity(gaps));
        }
        self.manifest.phase = target;
        self.save_manifest()?;
        Ok(true)
    }

    pub fn require_phase(&self, at_least: Phase, action: &str) -> Result<()> {
        if self.phase() < at_least {
            return Err(StoreError::Phase(format!(
                "{action} needs phase {at_least} or later; campaign is at {}",
                self.phase()
            )));
        }
        Ok(())
    }

    // ---- integrity ----

    pub fn integrity_check(&self) -> IntegrityReport {
        let mut report = IntegrityReport::default();
        if let Err(e) = read_manifest(&self.root) {
            report.push(FindingKind::Unreadable, MANIFEST, e.to_string());
        }
        let programs = match self.program_index() {
            Ok(p) => p.accepted,
            Err(e) => {
                report.push(FindingKind::Unreadable, "programs.json", e.to_string());
                Vec::new()
            }
        };
        let mut sources: BTreeMap<String, String> = BTreeMap::new();
        for p in &programs {
            match self.program_source(&p.id) {
                Ok(src) => {
                    sources.insert(p.id.clone(), src);
                }
                Err(e) => report.push(FindingKind::MissingArtifact, &p.id, e.to_string()),
            }
        }
        let index = match self.mutant_index() {
            Ok(i) => i,
            Err(e) => {
                report.push(FindingKind::Unreadable, "mutants.json", e.to_string());
                MutantIndex::default()
            }
        };
        for m in &index.mutants {
            if !programs.iter().any(|p| p.id == m.program_id) {
                report.push(FindingKind::DanglingReference, &m.id, format!("unknown program `{}`", m.program_id));
            }
            match fs::read_to_string(self.mutant_path(m)) {
                Ok(src) => {
                    sources.insert(m.id.clone(), src);
                }
                Err(e) => report.push(FindingKind::MissingArtifact, &m.id, e.to_string()),
            }
        }

        let summaries = match self.summary_index() {
            Ok(s) => s,
            Err(e) => {
                report.push(FindingKind::Unreadable, "summaries.json", e.to_string());
                BTreeMap::new()
            }
        };
        let cache = self.summary_cache();
        let mut summarized = BTreeSet::new();
        for (subject, key) in &summaries {
            let is_program = programs.iter().any(|p| &p.id == subject);
            let is_mutant = index.mutants.iter().any(|m| &m.id == subject);
            if !is_program && !is_mutant {
                report.push(FindingKind::DanglingReference, subject, "summary for unknown subject");
            }
            let path = cache.path_for(key);
            let record: SummaryRecord = match read_json_file(&path) {
                Ok(r) => r,
                Err(StoreError::Io { source, .. }) if source.kind() == io::ErrorKind::NotFound => {
                    report.push(FindingKind::DanglingReference, subject, format!("summary file {key}.json is missing"));
                    continue;
                }
                Err(e) => {
                    report.push(FindingKind::Unreadable, subject, e.to_string());
                    continue;
                }
            };
            if &record.subject_ref != subject {
                report.push(
                    FindingKind::DanglingReference,
                    subject,
                    format!("index points at a summary of `{}`", record.subject_ref),
                );
            }
            if let Err(detail) = record.verify() {
                report.push(FindingKind::CacheKeyMismatch, subject, detail);
            } else if &record.cache_key != key {
                report.push(FindingKind::CacheKeyMismatch, subject, "index key differs from record key");
            } else if let Some(code) = sources.get(subject) {
                let expected = cache_key(&record.model_id, &build_prompt(code), code);
                if expected != record.cache_key {
                    report.push(FindingKind::CacheKeyMismatch, subject, "summary was produced for different code");
                }
            }
            summarized.insert(subject.clone());
        }

        let mutant_program: BTreeMap<&str, &str> = index
            .mutants
            .iter()
            .map(|m| (m.id.as_str(), m.program_id.as_str()))
            .collect();
        let has_pair = |mutant: &str| -> bool {
            mutant_program
                .get(mutant)
                .is_some_and(|p| summarized.contains(mutant) && summarized.contains(*p))
        };
        match self.verdicts() {
            Ok(verdicts) => {
                for v in verdicts {
                    let subject = format!("{}/{}", v.rater_id, v.mutant_id);
                    if !mutant_program.contains_key(v.mutant_id.as_str()) {
                        report.push(FindingKind::DanglingReference, subject, "verdict on unknown mutant");
                    } else if !has_pair(&v.mutant_id) {
                        report.push(FindingKind::DanglingReference, subject, "verdict without both summaries");
                    }
                }
            }
            Err(e) => report.push(FindingKind::Unreadable, "verdicts", e.to_string()),
        }
        match self.reconciled() {
            Ok(reconciled) => {
                for id in reconciled.keys() {
                    if !mutant_program.contains_key(id.as_str()) {
                        report.push(FindingKind::DanglingReference, id, "reconciled verdict on unknown mutant");
                    }
                }
            }
            Err(e) => report.push(FindingKind::Unreadable, "reconciled", e.to_string()),
        }

        match self.gaps(self.phase()) {
            Ok(gaps) => {
                for g in gaps {
                    report.push(FindingKind::PhaseGap, self.phase().as_str(), g);
                }
            }
            Err(e) => report.push(FindingKind::Unreadable, "indexes", e.to_string()),
        }
        report
    }
}

fn acquire_lock(root: &Path) -> Result<File> {
    let path = root.join(LOCK);
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&path)
        .map_err(|e| StoreError::io(&path, e))?;
    match file.try_lock() {
        Ok(()) => Ok(file),
        Err(fs::TryLockError::WouldBlock) => Err(StoreError::Locked(root.to_path_buf())),
        Err(fs::TryLockError::Error(e)) => Err(StoreError::io(&path, e)),
    }
}

fn read_manifest(root: &Path) -> Result<CampaignManifest> {
    let path = root.join(MANIFEST);
    if !path.exists() {
        return Err(StoreError::NotACampaign(root.to_path_buf()));
    }
    let m: CampaignManifest = read_json_file(&path)?;
    if m.format != FORMAT {
        return Err(StoreError::Validation(format!("unsupported campaign format {}", m.format)));
    }
    Ok(m)
}

pub(crate) fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_json_or_default<T: DeserializeOwned + Default>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Ok(T::default());
    }
    read_json_file(path)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| StoreError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    out.sort();
    Ok(out)
}

/// Ids become file names, so they must not contain separators.
pub fn is_safe_component(s: &str) -> bool {
    !s.is_empty()
        && s != "."
        && s != ".."
        && !s.contains(fsio::TMP_MARKER)
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}
