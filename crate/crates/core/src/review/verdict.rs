use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "Positive",
            Label::Negative => "Negative",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "positive" | "p" | "pos" => Ok(Label::Positive),
            "negative" | "n" | "neg" => Ok(Label::Negative),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// Why a negative pair failed to surface the mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureMode {
    /// The summary omits the mutated logic entirely.
    TooAbstract,
    /// The summary states the pre-mutation behaviour for the mutated code.
    DescribesOriginal,
}

impl FailureMode {
    pub const ALL: [FailureMode; 2] = [FailureMode::TooAbstract, FailureMode::DescribesOriginal];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureMode::TooAbstract => "TooAbstract",
            FailureMode::DescribesOriginal => "DescribesOriginal",
        }
    }
}

impl FromStr for FailureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "tooabstract" | "1" => Ok(FailureMode::TooAbstract),
            "describesoriginal" | "2" => Ok(FailureMode::DescribesOriginal),
            other => Err(format!("unknown failure mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerdictError {
    #[error("failure_mode is only meaningful on a Negative verdict")]
    FailureModeOnPositive,
    #[error("recognized_as_bug requires a Positive verdict")]
    BugTagOnNegative,
    #[error("rater id `{0}` must be non-empty and use only letters, digits, `-` or `_`")]
    BadRater(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub mutant_id: String,
    pub rater_id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_mode: Option<FailureMode>,
    #[serde(default)]
    pub recognized_as_bug: bool,
    #[serde(default)]
    pub note: String,
    #[serde(default = "Utc::now")]
    pub decided_at: DateTime<Utc>,
    /// Notes appended when a rater overwrites an earlier verdict.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audit: Vec<String>,
}

impl Verdict {
    pub fn new(mutant_id: impl Into<String>, rater_id: impl Into<String>, label: Label) -> Self {
        Verdict {
            mutant_id: mutant_id.into(),
            rater_id: rater_id.into(),
            label,
            failure_mode: None,
            recognized_as_bug: false,
            note: String::new(),
            decided_at: Utc::now(),
            audit: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), VerdictError> {
        validate_rater(&self.rater_id)?;
        check_tags(self.label, self.failure_mode, self.recognized_as_bug)
    }
}

pub(crate) fn check_tags(
    label: Label,
    failure_mode: Option<FailureMode>,
    recognized_as_bug: bool,
) -> Result<(), VerdictError> {
    if failure_mode.is_some() && label != Label::Negative {
        return Err(VerdictError::FailureModeOnPositive);
    }
    if recognized_as_bug && label != Label::Positive {
        return Err(VerdictError::BugTagOnNegative);
    }
    Ok(())
}

pub fn validate_rater(rater: &str) -> Result<(), VerdictError> {
    let ok = !rater.is_empty()
        && rater
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(VerdictError::BadRater(rater.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReconcileSource {
    /// All raters agreed, or only one rater judged the item.
    Auto,
    /// A disagreement settled by a resolver.
    Resolved,
    /// A resolver overrode an agreement.
    Forced,
}

/// The label analytics reads for one mutant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconciledVerdict {
    pub mutant_id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_mode: Option<FailureMode>,
    #[serde(default)]
    pub recognized_as_bug: bool,
    pub resolver_id: String,
    #[serde(default)]
    pub note: String,
    pub source: ReconcileSource,
    pub rater_labels: BTreeMap<String, Label>,
    pub decided_at: DateTime<Utc>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_invariants() {
        let mut v = Verdict::new("p.val_b_1", "r1", Label::Positive);
        assert!(v.validate().is_ok());
        v.failure_mode = Some(FailureMode::TooAbstract);
        assert_eq!(v.validate(), Err(VerdictError::FailureModeOnPositive));
        v.label = Label::Negative;
        assert!(v.validate().is_ok());
        v.recognized_as_bug = true;
        assert_eq!(v.validate(), Err(VerdictError::BugTagOnNegative));
    }

    #[test]
    fn rater_ids_are_path_safe() {
        assert!(validate_rater("alice_1").is_ok());
        assert!(validate_rater("../x").is_err());
        assert!(validate_rater("").is_err());
    }

    #[test]
    fn parse_labels_and_modes() {
        assert_eq!("P".parse::<Label>().unwrap(), Label::Positive);
        assert_eq!("describes-original".parse::<FailureMode>().unwrap(), FailureMode::DescribesOriginal);
        assert_eq!("1".parse::<FailureMode>().unwrap(), FailureMode::TooAbstract);
    }
}
