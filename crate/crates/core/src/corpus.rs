//! Subject program ingestion, structural complexity classification and LOC.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::Node;

use crate::lang::{walk_all, Language, SyntaxError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("invalid field map: {0}")]
    FieldMap(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComplexityCategory {
    /// Single function.
    SF,
    /// Single class.
    SC,
    /// Multiple classes.
    MC,
    /// Multiple classes with multithreading.
    MT,
}

impl ComplexityCategory {
    pub const ALL: [ComplexityCategory; 4] = [Self::SF, Self::SC, Self::MC, Self::MT];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SF => "SF",
            Self::SC => "SC",
            Self::MC => "MC",
            Self::MT => "MT",
        }
    }
}

impl fmt::Display for ComplexityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Synthetic,
    Corpus,
    Custom,
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "synthetic" => Ok(Origin::Synthetic),
            "corpus" => Ok(Origin::Corpus),
            "custom" => Ok(Origin::Custom),
            other => Err(format!("unknown origin `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub id: String,
    #[serde(default)]
    pub language: Language,
    pub source_text: String,
    pub origin: Origin,
    pub complexity: ComplexityCategory,
    pub loc: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl Program {
    /// Builds a program from source, validating that it parses and has code.
    pub fn from_source(
        id: impl Into<String>,
        source_text: impl Into<String>,
        origin: Origin,
        title: Option<String>,
    ) -> Result<Program, Rejection> {
        let id = id.into();
        let source_text = source_text.into();
        let complexity = classify_complexity(&source_text).map_err(|e| Rejection {
            entry: id.clone(),
            line: None,
            reason: e.to_string(),
        })?;
        let loc = count_loc(&source_text);
        if loc == 0 {
            return Err(Rejection {
                entry: id,
                line: None,
                reason: "no effective lines of code".into(),
            });
        }
        Ok(Program {
            id,
            language: Language::Python,
            source_text,
            origin,
            complexity,
            loc,
            title,
        })
    }

    pub fn meta(&self) -> ProgramMeta {
        ProgramMeta {
            id: self.id.clone(),
            language: self.language,
            origin: self.origin,
            complexity: self.complexity,
            loc: self.loc,
            title: self.title.clone(),
        }
    }
}

/// Program metadata without the source text, as listed in manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramMeta {
    pub id: String,
    #[serde(default)]
    pub language: Language,
    pub origin: Origin,
    pub complexity: ComplexityCategory,
    pub loc: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// File name or record id.
    pub entry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestManifest {
    pub accepted: Vec<ProgramMeta>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, Default)]
pub struct Ingestion {
    pub programs: Vec<Program>,
    pub rejected: Vec<Rejection>,
}

impl Ingestion {
    pub fn manifest(&self) -> IngestManifest {
        IngestManifest {
            accepted: self.programs.iter().map(Program::meta).collect(),
            rejected: self.rejected.clone(),
        }
    }

    fn push_unique(&mut self, program: Program, seen: &mut HashSet<String>, line: Option<usize>) {
        if seen.insert(program.id.clone()) {
            self.programs.push(program);
        } else {
            self.rejected.push(Rejection {
                entry: program.id,
                line,
                reason: "duplicate program id".into(),
            });
        }
    }
}

/// Ingests every `*.py` file directly inside `path`, ordered by file name.
pub fn ingest_directory(path: &Path, origin: Origin) -> Result<Ingestion, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let ext = Language::Python.extension();
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(io_err)? {
        let entry = entry.map_err(io_err)?;
        let p = entry.path();
        if p.is_file() && p.extension().and_then(|e| e.to_str()) == Some(ext) {
            files.push(p);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let mut out = Ingestion::default();
    let mut seen = HashSet::new();
    for file in files {
        let name = file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let id = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = match fs::read_to_string(&file) {
            Ok(t) => t,
            Err(e) => {
                out.rejected.push(Rejection {
                    entry: name,
                    line: None,
                    reason: format!("unreadable: {e}"),
                });
                continue;
            }
        };
        match Program::from_source(id, text, origin, None) {
            Ok(p) => out.push_unique(p, &mut seen, None),
            Err(mut r) => {
                r.entry = name;
                out.rejected.push(r);
            }
        }
    }
    Ok(out)
}

/// Which record keys hold the program id, source and optional title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldMap {
    pub id: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            id: "id".into(),
            source: "source".into(),
            title: None,
        }
    }
}

impl FromStr for FieldMap {
    type Err = CorpusError;

    /// Parses `id=task_id,source=code[,title=name]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut map = FieldMap::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| CorpusError::FieldMap(format!("expected key=value, got `{part}`")))?;
            match k.trim() {
                "id" => map.id = v.trim().to_string(),
                "source" => map.source = v.trim().to_string(),
                "title" => map.title = Some(v.trim().to_string()),
                other => return Err(CorpusError::FieldMap(format!("unknown field `{other}`"))),
            }
        }
        Ok(map)
    }
}

/// Ingests a JSONL corpus, one record per line; rejections carry line numbers.
pub fn ingest_jsonl(path: &Path, field_map: &FieldMap) -> Result<Ingestion, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(fs::File::open(path).map_err(io_err)?);
    let mut out = Ingestion::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let reject = |reason: String| Rejection {
            entry: format!("line {lineno}"),
            line: Some(lineno),
            reason,
        };
        let record: BTreeMap<String, serde_json::Value> = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                out.rejected.push(reject(format!("malformed record: {e}")));
                continue;
            }
        };
        let id = match record.get(&field_map.id) {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(serde_json::Value::Number(n)) => n.to_string(),
            _ => {
                out.rejected
                    .push(reject(format!("missing key `{}`", field_map.id)));
                continue;
            }
        };
        let source = match record.get(&field_map.source).and_then(|v| v.as_str()) {
            Some(s) => s.to_string(),
            None => {
                out.rejected
                    .push(reject(format!("missing key `{}`", field_map.source)));
                continue;
            }
        };
        let title = field_map
            .title
            .as_ref()
            .and_then(|k| record.get(k))
            .and_then(|v| v.as_str())
            .map(str::to_string);
        let id = sanitize_id(&id);
        match Program::from_source(id, source, Origin::Corpus, title) {
            Ok(p) => out.push_unique(p, &mut seen, Some(lineno)),
            Err(mut r) => {
                r.line = Some(lineno);
                out.rejected.push(r);
            }
        }
    }
    Ok(out)
}

/// Ids become file names; path separators and other awkward characters are replaced.
fn sanitize_id(raw: &str) -> String {
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

const THREAD_MODULES: &[&str] = &["threading", "_thread", "concurrent"];
const THREAD_CONSTRUCTORS: &[&str] = &[
    "Thread",
    "Lock",
    "RLock",
    "Semaphore",
    "BoundedSemaphore",
    "Condition",
    "Barrier",
    "ThreadPoolExecutor",
    "start_new_thread",
    "allocate_lock",
];

/// Classifies by top-level class count plus threading constructs.
pub fn classify_complexity(source_text: &str) -> Result<ComplexityCategory, SyntaxError> {
    let grammar = Language::Python.grammar();
    let tree = grammar.parse(source_text)?;
    let root = tree.root_node();
    let src = source_text.as_bytes();

    let mut classes = 0usize;
    let mut cursor = root.walk();
    for child in root.named_children(&mut cursor) {
        let is_class = match child.kind() {
            "class_definition" => true,
            "decorated_definition" => child
                .child_by_field_name("definition")
                .is_some_and(|d| d.kind() == "class_definition"),
            _ => false,
        };
        if is_class {
            classes += 1;
        }
    }

    let threaded = classes >= 2 && uses_threading(root, src);
    Ok(match classes {
        0 => ComplexityCategory::SF,
        1 => ComplexityCategory::SC,
        _ if threaded => ComplexityCategory::MT,
        _ => ComplexityCategory::MC,
    })
}

fn uses_threading(root: Node<'_>, src: &[u8]) -> bool {
    let mut found = false;
    walk_all(root, |node| {
        if found {
            return;
        }
        match node.kind() {
            "import_statement" => {
                let mut c = node.walk();
                for name in node.children_by_field_name("name", &mut c) {
                    let dotted = match name.kind() {
                        "aliased_import" => name.child_by_field_name("name"),
                        _ => Some(name),
                    };
                    if let Some(d) = dotted {
                        let text = d.utf8_text(src).unwrap_or("");
                        let head = text.split('.').next().unwrap_or("");
                        if THREAD_MODULES.contains(&head) {
                            found = true;
                        }
                    }
                }
            }
            "import_from_statement" => {
                if let Some(m) = node.child_by_field_name("module_name") {
                    let text = m.utf8_text(src).unwrap_or("");
                    let head = text.split('.').next().unwrap_or("");
                    if THREAD_MODULES.contains(&head) {
                        found = true;
                    }
                }
            }
            "call" => {
                if let Some(f) = node.child_by_field_name("function") {
                    let name_node = match f.kind() {
                        "attribute" => f.child_by_field_name("attribute"),
                        "identifier" => Some(f),
                        _ => None,
                    };
                    if let Some(n) = name_node {
                        if THREAD_CONSTRUCTORS.contains(&n.utf8_text(src).unwrap_or("")) {
                            found = true;
                        }
                    }
                }
            }
            _ => {}
        }
    });
    found
}

/// True when the physical line carries code (not blank, not comment-only).
pub fn is_effective_line(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty() && !t.starts_with('#')
}

/// Counts non-blank, non-comment-only physical lines.
pub fn count_loc(source_text: &str) -> usize {
    source_text.lines().filter(|l| is_effective_line(l)).count()
}
