//! Subject-language adapter.
//!
//! Subject programs are carried as opaque text plus a language tag. The
//! harness only needs a concrete syntax tree with exact byte ranges, which
//! tree-sitter provides; each supported grammar implements [`Grammar`].

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::{Node, Parser, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
}

impl Language {
    pub fn extension(self) -> &'static str {
        match self {
            Language::Python => "py",
        }
    }

    pub fn grammar(self) -> &'static dyn Grammar {
        match self {
            Language::Python => &PYTHON,
        }
    }
}

impl Default for Language {
    fn default() -> Self {
        Language::Python
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at line {line}, column {column}: {detail}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub detail: String,
}

pub trait Grammar: Send + Sync {
    fn language(&self) -> Language;

    /// Parses `source`, failing on the first ERROR or MISSING node.
    fn parse(&self, source: &str) -> Result<Tree, SyntaxError>;

    /// Statement that does nothing, used to keep a block non-empty.
    fn noop_statement(&self) -> &'static str;

    fn parses(&self, source: &str) -> bool {
        self.parse(source).is_ok()
    }
}

pub struct PythonGrammar;

pub static PYTHON: PythonGrammar = PythonGrammar;

impl Grammar for PythonGrammar {
    fn language(&self) -> Language {
        Language::Python
    }

    fn parse(&self, source: &str) -> Result<Tree, SyntaxError> {
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("tree-sitter-python grammar is ABI compatible");
        let tree = parser.parse(source, None).ok_or_else(|| SyntaxError {
            line: 1,
            column: 1,
            detail: "parser returned no tree".into(),
        })?;
        let root = tree.root_node();
        if root.has_error() {
            let bad = first_error(root).unwrap_or(root);
            let pos = bad.start_position();
            let detail = if bad.is_missing() {
                format!("missing `{}`", bad.kind())
            } else {
                "unexpected input".to_string()
            };
            return Err(SyntaxError {
                line: pos.row + 1,
                column: pos.column + 1,
                detail,
            });
        }
        Ok(tree)
    }

    fn noop_statement(&self) -> &'static str {
        "pass"
    }
}

fn first_error(node: Node<'_>) -> Option<Node<'_>> {
    if node.is_error() || node.is_missing() {
        return Some(node);
    }
    if !node.has_error() {
        return None;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if let Some(found) = first_error(child) {
            return Some(found);
        }
    }
    None
}

/// Pre-order traversal over every node, named or anonymous.
pub fn walk_all<'t>(root: Node<'t>, mut visit: impl FnMut(Node<'t>)) {
    let mut cursor = root.walk();
    loop {
        visit(cursor.node());
        if cursor.goto_first_child() {
            continue;
        }
        loop {
            if cursor.goto_next_sibling() {
                break;
            }
            if !cursor.goto_parent() {
                return;
            }
        }
    }
}

/// Byte offset of the start of every line (0-based line index).
pub fn line_starts(source: &str) -> Vec<usize> {
    let mut starts = vec![0];
    for (i, b) in source.bytes().enumerate() {
        if b == b'\n' {
            starts.push(i + 1);
        }
    }
    starts
}
