//! The ingest, mutate and summarize stages over a campaign store. Each stage
//! is resumable: a rerun skips finished work and writes nothing new.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Ingestion;
use crate::mutation::{generate_plan, smoke_check, Quota, Shortfall, SmokeVerdict};
use crate::store::{Phase, Result, Store, StoreError};
use crate::summary::{
    batch_summarize, BatchFailure, Provider, ProviderConfig, Subject, SummarizeOptions, SummaryCache,
};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub new_programs: usize,
    pub total_programs: usize,
    pub rejected: usize,
}

pub fn ingest(store: &mut Store, ingestion: &Ingestion) -> Result<IngestReport> {
    let new_programs = store.attach_programs(&ingestion.programs, &ingestion.rejected)?;
    let index = store.program_index()?;
    store.advance(Phase::Ingested)?;
    Ok(IngestReport {
        new_programs,
        total_programs: index.accepted.len(),
        rejected: index.rejected.len(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutateReport {
    pub new_mutants: usize,
    pub total_mutants: usize,
    pub shortfalls: Vec<Shortfall>,
    /// Mutants whose smoke check observed no behavioural difference.
    pub suspected_equivalent: Vec<String>,
}

/// Plans mutants for every program not yet planned.
///
/// Quota and seed may come from the call or from the manifest; once any plan
/// is recorded they are frozen and a conflicting value is a phase error.
pub fn mutate(store: &mut Store, quota: Option<(Quota, String)>, seed: Option<u64>) -> Result<MutateReport> {
    store.require_phase(Phase::Ingested, "mutate")?;
    let started = !store.mutant_index()?.planned_programs.is_empty();
    let cfg = store.config().clone();
    if let Some((q, _)) = &quota {
        if cfg.quota.as_ref().is_some_and(|c| c != q) && started {
            return Err(StoreError::Phase(format!(
                "campaign was mutated with quota {}; refusing quota {q}",
                cfg.quota.as_ref().map(|c| c.to_string()).unwrap_or_default()
            )));
        }
    }
    if let Some(s) = seed {
        if cfg.seed.is_some_and(|c| c != s) && started {
            return Err(StoreError::Phase(format!(
                "campaign was mutated with seed {}; refusing seed {s}",
                cfg.seed.unwrap_or_default()
            )));
        }
    }
    store.update_config(|c| {
        if let Some((q, spec)) = quota {
            c.quota = Some(q);
            c.quota_spec = Some(spec);
        }
        if let Some(s) = seed {
            c.seed = Some(s);
        }
    })?;
    let cfg = store.config().clone();
    let (Some(quota), Some(seed)) = (cfg.quota, cfg.seed) else {
        return Err(StoreError::Validation("mutate needs a quota and a seed".into()));
    };

    let mut report = MutateReport::default();
    let planned = store.mutant_index()?.planned_programs;
    for program in store.programs()? {
        if planned.contains(&program.id) {
            continue;
        }
        let mut plan = generate_plan(&program, &quota, seed, &cfg.engine)?;
        for m in &mut plan.mutants {
            let outcome = smoke_check(&program, m, cfg.runner.as_ref());
            if outcome.verdict == SmokeVerdict::NotRun {
                continue;
            }
            log::info!("smoke {}: {:?}", m.id, outcome.verdict);
        }
        report.new_mutants += store.record_plan(&program.id, &plan.mutants, &plan.shortfalls)?;
    }
    let index = store.mutant_index()?;
    report.total_mutants = index.mutants.len();
    report.shortfalls = index.shortfalls;
    report.suspected_equivalent = index
        .mutants
        .iter()
        .filter(|m| m.suspected_equivalent)
        .map(|m| m.id.clone())
        .collect();
    store.advance(Phase::Mutated)?;
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizeReport {
    pub new_summaries: usize,
    pub cached: usize,
    pub failures: Vec<BatchFailure>,
}

/// Every subject of the campaign: programs first, then mutants.
pub fn subjects(store: &Store) -> Result<Vec<Subject>> {
    let mut out: Vec<Subject> = store
        .programs()?
        .into_iter()
        .map(|p| Subject {
            subject_ref: p.id,
            code_text: p.source_text,
        })
        .collect();
    out.extend(store.mutants()?.into_iter().map(|m| Subject {
        subject_ref: m.id,
        code_text: m.mutated_source,
    }));
    Ok(out)
}

pub fn summarize(
    store: &mut Store,
    config: &ProviderConfig,
    provider: &dyn Provider,
    parallelism: usize,
    options: &SummarizeOptions,
) -> Result<SummarizeReport> {
    store.require_phase(Phase::Mutated, "summarize")?;
    config.validate()?;
    if let Some(previous) = &store.config().provider {
        if previous.model_id != config.model_id && !store.summary_index()?.is_empty() {
            return Err(StoreError::Phase(format!(
                "campaign was summarized with model `{}`; refusing `{}`",
                previous.model_id, config.model_id
            )));
        }
    }
    let snapshot = config.snapshot();
    store.update_config(|c| c.provider = Some(snapshot))?;

    let subjects = subjects(store)?;
    let cache = store.summary_cache();
    let mut existing = BTreeMap::new();
    for s in &subjects {
        let prompt = crate::summary::build_prompt(&s.code_text);
        let key = crate::summary::cache_key(&config.model_id, &prompt, &s.code_text);
        let hit = cache.get(&key).map_err(|e| StoreError::io(cache.dir(), e))?;
        existing.insert(s.subject_ref.clone(), hit.is_some_and(|r| r.is_ok()));
    }
    let manifest = batch_summarize(&subjects, config, provider, &cache, parallelism, options);
    store.record_summaries(&manifest.records)?;
    let cached = manifest
        .records
        .iter()
        .filter(|r| existing.get(&r.subject_ref).copied().unwrap_or(false))
        .count();
    let report = SummarizeReport {
        new_summaries: manifest.records.len() - cached,
        cached,
        failures: manifest.failures,
    };
    if report.failures.is_empty() {
        store.advance(Phase::Summarized)?;
    }
    Ok(report)
}
