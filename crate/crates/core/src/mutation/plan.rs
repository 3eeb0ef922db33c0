//! Deterministic mutation plans over (type, location) cells.
//!
//! Each cell draws from its own ChaCha8 stream keyed by
//! `SHA-256("sumtrace-plan-v1" | seed | program id | type | bucket)`, so a
//! plan depends only on the program, the quota and the seed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::operators::{enumerate_candidates, materialize, Candidate, EngineOptions};
use super::{
    bucket_of_line, mutant_id, LocationBucket, Mutant, MutationError, MutationType,
};
use crate::corpus::Program;

/// Requested mutant count per (type, bucket) cell.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Quota {
    cells: BTreeMap<(MutationType, LocationBucket), usize>,
}

impl Quota {
    pub fn uniform(per_cell: usize) -> Quota {
        let cells = BTreeMap::new();
        let mut q = Quota { cells };
        for t in MutationType::ALL {
            for b in LocationBucket::ALL {
                q.set(t, b, per_cell);
            }
        }
        q
    }

    pub fn set(&mut self, t: MutationType, b: LocationBucket, n: usize) {
        if n == 0 {
            self.cells.remove(&(t, b));
        } else {
            self.cells.insert((t, b), n);
        }
    }

    pub fn get(&self, t: MutationType, b: LocationBucket) -> usize {
        self.cells.get(&(t, b)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.cells.values().sum()
    }

    /// Cells in canonical order (type order, then bucket order).
    pub fn cells(&self) -> impl Iterator<Item = (MutationType, LocationBucket, usize)> + '_ {
        MutationType::ALL.into_iter().flat_map(move |t| {
            LocationBucket::ALL
                .into_iter()
                .map(move |b| (t, b, self.get(t, b)))
        })
    }
}

impl fmt::Display for Quota {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .cells()
            .filter(|(_, _, n)| *n > 0)
            .map(|(t, b, n)| format!("{}_{}={}", t.tag(), b.tag(), n))
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Quota {
    type Err = String;

    /// Accepts either a single count applied to all nine cells (`3`) or a
    /// list of cells (`stmt_b=2,val_e=1`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(n) = s.parse::<usize>() {
            return Ok(Quota::uniform(n));
        }
        let mut q = Quota::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (cell, n) = part
                .split_once('=')
                .ok_or_else(|| format!("expected cell=count, got `{part}`"))?;
            let (t, b) = cell
                .split_once('_')
                .ok_or_else(|| format!("expected type_bucket, got `{cell}`"))?;
            let n = n.trim().parse::<usize>().map_err(|e| format!("`{n}`: {e}"))?;
            q.set(t.parse()?, b.parse()?, n);
        }
        Ok(q)
    }
}

impl Serialize for Quota {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<String, usize> = self
            .cells()
            .map(|(t, b, n)| (format!("{}_{}", t.tag(), b.tag()), n))
            .collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Quota {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, usize>::deserialize(d)?;
        let mut q = Quota::default();
        for (k, n) in map {
            let (t, b) = k
                .split_once('_')
                .ok_or_else(|| serde::de::Error::custom(format!("bad quota cell `{k}`")))?;
            q.set(
                t.parse().map_err(serde::de::Error::custom)?,
                b.parse().map_err(serde::de::Error::custom)?,
                n,
            );
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub program_id: String,
    pub mutation_type: MutationType,
    pub bucket: LocationBucket,
    pub requested: usize,
    pub produced: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationPlan {
    pub mutants: Vec<Mutant>,
    pub shortfalls: Vec<Shortfall>,
}

pub fn cell_seed(seed: u64, program_id: &str, t: MutationType, b: LocationBucket) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"sumtrace-plan-v1");
    h.update(seed.to_le_bytes());
    h.update((program_id.len() as u64).to_le_bytes());
    h.update(program_id.as_bytes());
    h.update(t.tag().as_bytes());
    h.update(b.tag().as_bytes());
    h.finalize().into()
}

/// Picks up to `quota` distinct mutants per cell.
///
/// Distinct sites are preferred; once every eligible site has been used, the
/// remaining fragments at already-used sites fill the cell. Cells never
/// borrow from each other; missing mutants are reported as shortfalls.
pub fn generate_plan(
    program: &Program,
    quota: &Quota,
    seed: u64,
    options: &EngineOptions,
) -> Result<MutationPlan, MutationError> {
    let mut plan = MutationPlan::default();
    for t in MutationType::ALL {
        let wanted: usize = LocationBucket::ALL.iter().map(|&b| quota.get(t, b)).sum();
        if wanted == 0 {
            continue;
        }
        let candidates = enumerate_candidates(&program.source_text, t, options)?;
        let mut by_bucket: BTreeMap<LocationBucket, Vec<&Candidate>> = BTreeMap::new();
        for c in &candidates {
            let b = bucket_of_line(&program.source_text, c.site.line)?;
            by_bucket.entry(b).or_default().push(c);
        }
        for b in LocationBucket::ALL {
            let requested = quota.get(t, b);
            if requested == 0 {
                continue;
            }
            let pool = by_bucket.remove(&b).unwrap_or_default();
            let mut rng = ChaCha8Rng::from_seed(cell_seed(seed, &program.id, t, b));
            let picks = pick(&pool, requested, &mut rng);
            for (n, (cand, fragment)) in picks.iter().enumerate() {
                let mut m = materialize(program, cand, fragment)?;
                m.name = format!("{}_{}_{}", t.tag(), b.tag(), n + 1);
                m.id = mutant_id(&program.id, &m.name);
                m.seed = seed;
                plan.mutants.push(m);
            }
            if picks.len() < requested {
                plan.shortfalls.push(Shortfall {
                    program_id: program.id.clone(),
                    mutation_type: t,
                    bucket: b,
                    requested,
                    produced: picks.len(),
                });
            }
        }
    }
    Ok(plan)
}

fn pick<'c>(pool: &[&'c Candidate], n: usize, rng: &mut ChaCha8Rng) -> Vec<(&'c Candidate, String)> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);
    let mut picks = Vec::with_capacity(n);
    let mut leftovers = Vec::new();
    for &i in &order {
        let cand = pool[i];
        let chosen = rng.gen_range(0..cand.replacements.len());
        for (j, r) in cand.replacements.iter().enumerate() {
            if j != chosen {
                leftovers.push((cand, r.clone()));
            }
        }
        if picks.len() < n {
            picks.push((cand, cand.replacements[chosen].clone()));
        }
    }
    if picks.len() < n {
        leftovers.shuffle(rng);
        picks.extend(leftovers.into_iter().take(n - picks.len()));
    }
    picks
}
