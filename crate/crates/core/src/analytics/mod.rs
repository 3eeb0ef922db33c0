//! Detection rates, contingency tests and the campaign report.

mod report;
pub mod stats;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ComplexityCategory;
use crate::mutation::{LocationBucket, MutationType};
use crate::review::{FailureMode, Label};
use crate::store::{Phase, Store, StoreError};
use stats::StatsError;

pub use report::{emit_report, render_report, ReportBundle};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{} mutant(s) lack a reconciled verdict: {}", .0.len(), .0.join(", "))]
    Unreconciled(Vec<String>),
    #[error("no scored mutants")]
    Empty,
    #[error("{path}:{line}: {message}")]
    Rows {
        path: String,
        line: usize,
        message: String,
    },
}

pub type Result<T, E = AnalyticsError> = std::result::Result<T, E>;

/// One reconciled mutant joined with its program and model metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredMutant {
    pub mutant_id: String,
    pub program_id: String,
    pub model_id: String,
    pub complexity: ComplexityCategory,
    pub mutation_type: MutationType,
    pub bucket: LocationBucket,
    pub loc: usize,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_mode: Option<FailureMode>,
    #[serde(default)]
    pub recognized_as_bug: bool,
}

impl ScoredMutant {
    pub fn is_positive(&self) -> bool {
        self.label == Label::Positive
    }
}

/// Joins reconciled verdicts with mutant and program metadata.
/// Every mutant must be reconciled.
pub fn scored_rows(store: &Store) -> Result<Vec<ScoredMutant>> {
    let reconciled = store.reconciled()?;
    let programs = store.program_index()?.accepted;
    let model_id = store
        .config()
        .provider
        .as_ref()
        .map(|p| p.model_id.clone())
        .unwrap_or_default();
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for m in store.mutant_index()?.mutants {
        let Some(r) = reconciled.get(&m.id) else {
            missing.push(m.id);
            continue;
        };
        let program = programs
            .iter()
            .find(|p| p.id == m.program_id)
            .ok_or_else(|| StoreError::NotFound(format!("program `{}`", m.program_id)))?;
        rows.push(ScoredMutant {
            mutant_id: m.id.clone(),
            program_id: m.program_id.clone(),
            model_id: model_id.clone(),
            complexity: program.complexity,
            mutation_type: m.mutation_type,
            bucket: m.bucket,
            loc: program.loc,
            label: r.label,
            failure_mode: r.failure_mode,
            recognized_as_bug: r.recognized_as_bug,
        });
    }
    if !missing.is_empty() {
        return Err(AnalyticsError::Unreconciled(missing));
    }
    rows.sort_by(|a, b| a.mutant_id.cmp(&b.mutant_id));
    Ok(rows)
}

/// Reads scored rows from JSONL (the `report/rows.jsonl` format).
pub fn load_rows(path: &Path) -> Result<Vec<ScoredMutant>> {
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(line).map_err(|e| AnalyticsError::Rows {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

/// Loads a baseline from a rows file or from a reported campaign directory.
pub fn load_baseline(path: &Path) -> Result<Vec<ScoredMutant>> {
    if path.is_dir() {
        let rows = path.join("report").join("rows.jsonl");
        if rows.exists() {
            return load_rows(&rows);
        }
        let store = Store::open_read_only(path)?;
        return scored_rows(&store);
    }
    load_rows(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    Complexity,
    MutationType,
    Location,
    Model,
}

impl Dimension {
    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Complexity => "complexity",
            Dimension::MutationType => "mutation_type",
            Dimension::Location => "location",
            Dimension::Model => "model",
        }
    }

    fn key(self, row: &ScoredMutant) -> (usize, String) {
        match self {
            Dimension::Complexity => (row.complexity as usize, row.complexity.as_str().into()),
            Dimension::MutationType => {
                let rank = MutationType::ALL.iter().position(|t| *t == row.mutation_type).unwrap_or(0);
                (rank, row.mutation_type.as_str().into())
            }
            Dimension::Location => {
                let rank = LocationBucket::ALL.iter().position(|b| *b == row.bucket).unwrap_or(0);
                (rank, row.bucket.as_str().into())
            }
            // Order of first appearance, fixed by the caller's row order.
            Dimension::Model => (0, row.model_id.clone()),
        }
    }
}

/// Positive count over total; the rate is always derived, never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRate {
    pub group: String,
    pub positives: u64,
    pub total: u64,
}

impl GroupRate {
    pub fn negatives(&self) -> u64 {
        self.total - self.positives
    }

    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.positives as f64 / self.total as f64
        }
    }

    pub fn percent(&self) -> String {
        format_percent(self.positives, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub dimension: Dimension,
    pub groups: Vec<GroupRate>,
    pub overall: GroupRate,
}

impl RateBreakdown {
    pub fn group(&self, name: &str) -> Option<&GroupRate> {
        self.groups.iter().find(|g| g.group == name)
    }

    pub fn table(&self) -> stats::ContingencyTable {
        stats::ContingencyTable::binary(self.groups.iter().map(|g| (g.group.clone(), g.positives, g.negatives())))
    }
}

/// Groups rows along one dimension; only groups with rows appear.
pub fn detection_rates(rows: &[ScoredMutant], dimension: Dimension) -> Result<RateBreakdown> {
    if rows.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut groups: Vec<(usize, GroupRate)> = Vec::new();
    for row in rows {
        let (rank, name) = dimension.key(row);
        let idx = match groups.iter().position(|(_, g)| g.group == name) {
            Some(i) => i,
            None => {
                groups.push((rank, GroupRate { group: name, positives: 0, total: 0 }));
                groups.len() - 1
            }
        };
        groups[idx].1.total += 1;
        groups[idx].1.positives += u64::from(row.is_positive());
    }
    groups.sort_by_key(|(rank, _)| *rank);
    let positives = rows.iter().filter(|r| r.is_positive()).count() as u64;
    Ok(RateBreakdown {
        dimension,
        groups: groups.into_iter().map(|(_, g)| g).collect(),
        overall: GroupRate {
            group: "Overall".into(),
            positives,
            total: rows.len() as u64,
        },
    })
}

/// `num/den` as a percentage with one decimal, rounded half up on the exact
/// fraction (74/150 -> "49.3%").
pub fn format_percent(num: u64, den: u64) -> String {
    if den == 0 {
        return "n/a".into();
    }
    let tenths = (num as u128 * 2000 + den as u128) / (2 * den as u128);
    format!("{}.{}%", tenths / 10, tenths % 10)
}

/// Difference `b - a` of two exact fractions in percentage points, one
/// decimal, rounded half away from zero, always signed.
pub fn format_pp(a_num: u64, a_den: u64, b_num: u64, b_den: u64) -> String {
    if a_den == 0 || b_den == 0 {
        return "n/a".into();
    }
    let num = (b_num as i128 * a_den as i128 - a_num as i128 * b_den as i128) * 1000;
    let den = a_den as i128 * b_den as i128;
    let mag = (num.abs() * 2 + den) / (2 * den);
    let sign = if num < 0 { "-" } else { "+" };
    format!("{sign}{}.{}pp", mag / 10, mag % 10)
}

/// Rows plus the phase check shared by report emission.
pub fn reportable_rows(store: &Store) -> Result<Vec<ScoredMutant>> {
    store.require_phase(Phase::Reconciled, "report")?;
    scored_rows(store)
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTest {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Statistics checks against fixed reference values, run by `verify`.
pub fn self_test() -> Vec<SelfTest> {
    let mut out = Vec::new();
    let mut check = |name: &str, passed: bool, detail: String| {
        out.push(SelfTest {
            name: name.into(),
            passed,
            detail,
        })
    };

    let table = stats::ContingencyTable::from_counts(vec![vec![62, 19], vec![27, 54], vec![23, 58], vec![14, 67]]);
    match stats::chi_square(&table) {
        Ok(r) => {
            let v = r.effect_size.map(|e| e.value).unwrap_or(f64::NAN);
            check(
                "chi_square_complexity",
                (r.statistic - 69.04).abs() <= 0.05 && r.degrees_of_freedom == Some(3) && r.p_value < 0.001 && (v - 0.462).abs() <= 0.005,
                format!("chi2={:.4} df={:?} p={:.3e} V={v:.4}", r.statistic, r.degrees_of_freedom, r.p_value),
            );
        }
        Err(e) => check("chi_square_complexity", false, e.to_string()),
    }

    let confusion = stats::Confusion::new([[120, 6], [5, 193]]);
    match stats::cohens_kappa(&confusion) {
        Ok(k) => check(
            "cohens_kappa",
            (k - 0.928).abs() <= 0.005 && (confusion.percent_agreement() * 100.0 - 96.6).abs() <= 0.1,
            format!("kappa={k:.5} agreement={:.4}", confusion.percent_agreement()),
        ),
        Err(e) => check("cohens_kappa", false, e.to_string()),
    }

    for (df, x) in [(1.0, 3.84), (2.0, 5.99), (3.0, 7.81)] {
        let p = stats::chi_square_sf(x, df);
        check(&format!("chi_square_sf_df{df}"), (p - 0.05).abs() <= 5e-4, format!("p={p:.6}"));
    }

    let a = [1.5, 3.0, 3.0, 7.0];
    let b = [2.0, 3.0, 8.0, 9.0, 10.0];
    match stats::mann_whitney_u(&a, &b) {
        Ok(r) => {
            let brute = brute_force_mwu_p(&a, &b);
            check(
                "mann_whitney_exact",
                (r.p_value - brute).abs() <= 1e-9,
                format!("U={} p={:.9} brute={brute:.9}", r.statistic, r.p_value),
            );
        }
        Err(e) => check("mann_whitney_exact", false, e.to_string()),
    }
    out
}

/// Two-sided p by enumerating every split of the pooled sample, counting
/// splits whose min-U is at most the observed one.
pub fn brute_force_mwu_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let min_u = |mask: u32| {
        let mut u = 0.0;
        for i in 0..n {
            if mask & (1 << i) == 0 {
                continue;
            }
            for j in 0..n {
                if mask & (1 << j) != 0 {
                    continue;
                }
                u += if pooled[i] > pooled[j] {
                    1.0
                } else if pooled[i] == pooled[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        let total = (a.len() * b.len()) as f64;
        f64::min(u, total - u)
    };
    let observed = min_u((1u32 << a.len()) - 1);
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        total += 1;
        if min_u(mask) <= observed + 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}
