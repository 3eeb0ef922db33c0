use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{Completion, Provider, SummaryError, SummaryRecord, SummaryRequest};

/// Serves canned summaries by cache key. Never touches the network.
#[derive(Debug, Default, Clone)]
pub struct ReplayProvider {
    entries: HashMap<String, String>,
}

#[derive(Deserialize)]
struct FixtureLine {
    cache_key: String,
    summary_text: String,
}

impl ReplayProvider {
    pub fn from_entries<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        ReplayProvider {
            entries: entries.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }

    /// Loads a JSONL fixture, or a directory of stored summary records.
    pub fn load(path: &Path) -> Result<Self, SummaryError> {
        if path.is_dir() {
            Self::load_dir(path)
        } else {
            Self::load_jsonl(path)
        }
    }

    pub fn load_jsonl(path: &Path) -> Result<Self, SummaryError> {
        let text = fs::read_to_string(path).map_err(|e| SummaryError::FixtureLoad {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: FixtureLine =
                serde_json::from_str(line).map_err(|e| SummaryError::FixtureLoad {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            entries.insert(parsed.cache_key, parsed.summary_text);
        }
        Ok(ReplayProvider { entries })
    }

    fn load_dir(dir: &Path) -> Result<Self, SummaryError> {
        let load_err = |p: &Path, m: String| SummaryError::FixtureLoad {
            path: p.display().to_string(),
            line: 0,
            message: m,
        };
        let mut entries = HashMap::new();
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| load_err(dir, e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for p in paths {
            let text = fs::read_to_string(&p).map_err(|e| load_err(&p, e.to_string()))?;
            let rec: SummaryRecord =
                serde_json::from_str(&text).map_err(|e| load_err(&p, e.to_string()))?;
            if rec.is_ok() {
                entries.insert(rec.cache_key, rec.summary_text);
            }
        }
        Ok(ReplayProvider { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Provider for ReplayProvider {
    fn complete(&self, request: &SummaryRequest<'_>) -> Result<Completion, SummaryError> {
        match self.entries.get(request.cache_key) {
            Some(text) => Ok(Completion::text(text.clone())),
            None => Err(SummaryError::FixtureMiss {
                key: request.cache_key.to_string(),
            }),
        }
    }
}
