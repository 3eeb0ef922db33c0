//! Single-edit mutation engine.
//!
//! Sites are enumerated from the concrete syntax tree, one operator is applied
//! per mutant, and each mutant is assigned the third of the program (over
//! effective lines) that contains its site.

mod diff;
mod operators;
mod plan;
mod smoke;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_effective_line, Program};
use crate::lang::SyntaxError;

pub use diff::{edit_region, unified_diff, EditRegion};
pub use operators::{apply, enumerate_candidates, enumerate_sites, Candidate, EngineOptions};
pub use plan::{cell_seed, generate_plan, MutationPlan, Quota, Shortfall};
pub use smoke::{smoke_check, RunnerConfig, SmokeOutcome, SmokeVerdict};

#[derive(Debug, Error)]
pub enum MutationError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("line {line} is outside the program's {total} lines")]
    LineOutOfRange { line: usize, total: usize },
    #[error("no `{operator}` site at line {line} column {column}")]
    UnknownSite {
        operator: String,
        line: usize,
        column: usize,
    },
    #[error("`{fragment}` is not producible by `{operator}` at line {line}")]
    InvalidFragment {
        operator: String,
        line: usize,
        fragment: String,
    },
    #[error("mutated source no longer parses: {0}")]
    Unparseable(SyntaxError),
    #[error("program has no effective lines")]
    EmptyProgram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationType {
    Statement,
    Value,
    Decision,
}

impl MutationType {
    /// Report order.
    pub const ALL: [MutationType; 3] = [Self::Statement, Self::Decision, Self::Value];

    /// Short tag used in mutant names (`stmt`, `val`, `desc`).
    pub fn tag(self) -> &'static str {
        match self {
            Self::Statement => "stmt",
            Self::Value => "val",
            Self::Decision => "desc",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Statement => "Statement",
            Self::Value => "Value",
            Self::Decision => "Decision",
        }
    }
}

impl fmt::Display for MutationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MutationType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "statement" | "stmt" => Ok(Self::Statement),
            "value" | "val" => Ok(Self::Value),
            "decision" | "desc" => Ok(Self::Decision),
            other => Err(format!("unknown mutation type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LocationBucket {
    Beginning,
    Middle,
    End,
}

impl LocationBucket {
    pub const ALL: [LocationBucket; 3] = [Self::Beginning, Self::Middle, Self::End];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Beginning => "b",
            Self::Middle => "m",
            Self::End => "e",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Beginning => "Beginning",
            Self::Middle => "Middle",
            Self::End => "End",
        }
    }
}

impl fmt::Display for LocationBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LocationBucket {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "beginning" | "b" => Ok(Self::Beginning),
            "middle" | "m" => Ok(Self::Middle),
            "end" | "e" => Ok(Self::End),
            other => Err(format!("unknown location bucket `{other}`")),
        }
    }
}

/// Character columns (0-based, end exclusive). `start` is on the site's
/// first line and `end` on its last line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MutationSite {
    pub operator_id: String,
    pub mutation_type: MutationType,
    /// 1-based line of the first character of the site.
    pub line: usize,
    /// 1-based line of the last character; equals `line` for single-line sites.
    pub end_line: usize,
    pub span: ColumnSpan,
    pub original_fragment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutant {
    pub id: String,
    /// `{type}_{bucket}_{n}`, e.g. `val_b_2`.
    pub name: String,
    pub program_id: String,
    pub mutation_type: MutationType,
    pub bucket: LocationBucket,
    pub site: MutationSite,
    pub mutated_fragment: String,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub mutated_source: String,
    #[serde(default)]
    pub suspected_equivalent: bool,
    pub seed: u64,
}

impl Mutant {
    pub fn file_name(&self) -> String {
        format!("{}.py", self.name)
    }
}

pub(crate) fn mutant_id(program_id: &str, name: &str) -> String {
    format!("{program_id}.{name}")
}

/// Buckets a 1-based line by which third of the effective lines it falls in.
///
/// The effective line rank `r` (1-based) of the site's line out of `n`
/// effective lines gives bucket `floor(3 (r - 1) / n)`. A non-effective line
/// takes the rank of the nearest effective line before it.
pub fn bucket_of_line(source_text: &str, line: usize) -> Result<LocationBucket, MutationError> {
    let lines: Vec<&str> = source_text.lines().collect();
    if line == 0 || line > lines.len() {
        return Err(MutationError::LineOutOfRange {
            line,
            total: lines.len(),
        });
    }
    let effective = lines.iter().filter(|l| is_effective_line(l)).count();
    if effective == 0 {
        return Err(MutationError::EmptyProgram);
    }
    let rank = lines[..line]
        .iter()
        .filter(|l| is_effective_line(l))
        .count()
        .max(1);
    Ok(match 3 * (rank - 1) / effective {
        0 => LocationBucket::Beginning,
        1 => LocationBucket::Middle,
        _ => LocationBucket::End,
    })
}

pub fn bucket_of(site: &MutationSite, program: &Program) -> Result<LocationBucket, MutationError> {
    bucket_of_line(&program.source_text, site.line)
}
