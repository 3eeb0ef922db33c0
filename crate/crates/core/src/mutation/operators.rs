//! Mutation operators and site enumeration over the Python syntax tree.

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use super::{
    bucket_of_line, mutant_id, ColumnSpan, Mutant, MutationError, MutationSite, MutationType,
};
use crate::corpus::Program;
use crate::lang::{line_starts, walk_all, Grammar, Language};

pub const FLIP_COMPARATOR: &str = "flip-comparator";
pub const SWAP_ARITHMETIC: &str = "swap-arithmetic";
pub const SWAP_BOOLEAN: &str = "swap-boolean";
pub const SWAP_AUGMENTED: &str = "swap-augmented-assignment";
pub const PERTURB_NUMBER: &str = "perturb-number";
pub const PERTURB_DEFAULT: &str = "perturb-default";
pub const FLIP_INDEX: &str = "flip-index";
pub const FLIP_BOOLEAN_CONSTANT: &str = "flip-boolean-constant";
pub const PERTURB_STRING: &str = "perturb-string";
pub const DELETE_STATEMENT: &str = "delete-statement";
pub const DUPLICATE_STATEMENT: &str = "duplicate-statement";
pub const SWAP_STATEMENTS: &str = "swap-statements";
pub const DROP_RETURN_VALUE: &str = "drop-return-value";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineOptions {
    /// Enables the string-literal operator for Value mutations.
    #[serde(default)]
    pub include_strings: bool,
}

/// A site plus every fragment its operator can produce there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub site: MutationSite,
    pub byte_start: usize,
    pub byte_end: usize,
    pub replacements: Vec<String>,
}

fn comparator_flip(op: &str) -> Option<&'static str> {
    Some(match op {
        "==" => "!=",
        "!=" => "==",
        "<" => ">",
        ">" => "<",
        "<=" => ">=",
        ">=" => "<=",
        _ => return None,
    })
}

fn arithmetic_swaps(op: &str) -> &'static [&'static str] {
    match op {
        "+" => &["-"],
        "-" => &["+"],
        "*" => &["//"],
        "/" => &["//"],
        "//" => &["*", "/"],
        _ => &[],
    }
}

fn augmented_swaps(op: &str) -> &'static [&'static str] {
    match op {
        "+=" => &["-="],
        "-=" => &["+="],
        _ => &[],
    }
}

const NON_MUTABLE_STATEMENTS: &[&str] = &[
    "function_definition",
    "class_definition",
    "decorated_definition",
    "import_statement",
    "import_from_statement",
    "future_import_statement",
    "global_statement",
    "nonlocal_statement",
    "pass_statement",
    "type_alias_statement",
    "comment",
];

struct Ctx<'s> {
    src: &'s str,
    starts: Vec<usize>,
    grammar: &'static dyn Grammar,
}

impl<'s> Ctx<'s> {
    fn text(&self, node: Node<'_>) -> &'s str {
        &self.src[node.start_byte()..node.end_byte()]
    }

    /// 1-based line and 0-based char column of a byte offset.
    fn position(&self, byte: usize) -> (usize, usize) {
        let row = self.starts.partition_point(|&s| s <= byte) - 1;
        let col = self.src[self.starts[row]..byte].chars().count();
        (row + 1, col)
    }

    fn line_prefix(&self, byte: usize) -> &'s str {
        let row = self.starts.partition_point(|&s| s <= byte) - 1;
        &self.src[self.starts[row]..byte]
    }

    fn line_suffix(&self, byte: usize) -> &'s str {
        let rest = &self.src[byte..];
        match rest.find('\n') {
            Some(i) => &rest[..i],
            None => rest,
        }
    }

    fn candidate(
        &self,
        operator: &str,
        mutation_type: MutationType,
        start: usize,
        end: usize,
        replacements: impl IntoIterator<Item = String>,
    ) -> Option<Candidate> {
        let original = &self.src[start..end];
        let mut reps: Vec<String> = Vec::new();
        for r in replacements {
            if r != original && !reps.contains(&r) {
                let mut mutated = String::with_capacity(self.src.len() + r.len());
                mutated.push_str(&self.src[..start]);
                mutated.push_str(&r);
                mutated.push_str(&self.src[end..]);
                if self.grammar.parses(&mutated) {
                    reps.push(r);
                }
            }
        }
        if reps.is_empty() {
            return None;
        }
        let (line, start_col) = self.position(start);
        let (end_line, end_col) = self.position(end);
        Some(Candidate {
            site: MutationSite {
                operator_id: operator.to_string(),
                mutation_type,
                line,
                end_line,
                span: ColumnSpan {
                    start: start_col,
                    end: end_col,
                },
                original_fragment: original.to_string(),
            },
            byte_start: start,
            byte_end: end,
            replacements: reps,
        })
    }
}

/// Every applicable site of `mutation_type` with its producible fragments,
/// in document order.
pub fn enumerate_candidates(
    source: &str,
    mutation_type: MutationType,
    options: &EngineOptions,
) -> Result<Vec<Candidate>, MutationError> {
    let grammar = Language::Python.grammar();
    let tree = grammar.parse(source)?;
    let ctx = Ctx {
        src: source,
        starts: line_starts(source),
        grammar,
    };
    let root = tree.root_node();
    let mut out = match mutation_type {
        MutationType::Decision => decision_candidates(&ctx, root),
        MutationType::Value => value_candidates(&ctx, root, options),
        MutationType::Statement => statement_candidates(&ctx, root),
    };
    out.sort_by(|a, b| {
        (a.byte_start, a.byte_end, &a.site.operator_id).cmp(&(
            b.byte_start,
            b.byte_end,
            &b.site.operator_id,
        ))
    });
    Ok(out)
}

pub fn enumerate_sites(
    program: &Program,
    mutation_type: MutationType,
    options: &EngineOptions,
) -> Result<Vec<MutationSite>, MutationError> {
    Ok(
        enumerate_candidates(&program.source_text, mutation_type, options)?
            .into_iter()
            .map(|c| c.site)
            .collect(),
    )
}

/// Applies `fragment` at `site`, producing an unnamed mutant (`n = 0`).
pub fn apply(
    program: &Program,
    site: &MutationSite,
    fragment: &str,
) -> Result<Mutant, MutationError> {
    let options = EngineOptions {
        include_strings: site.operator_id == PERTURB_STRING,
    };
    let source = &program.source_text;
    let candidate = enumerate_candidates(source, site.mutation_type, &options)?
        .into_iter()
        .find(|c| {
            c.site.operator_id == site.operator_id
                && c.site.line == site.line
                && c.site.span == site.span
                && c.site.end_line == site.end_line
                && c.site.original_fragment == site.original_fragment
        })
        .ok_or_else(|| MutationError::UnknownSite {
            operator: site.operator_id.clone(),
            line: site.line,
            column: site.span.start + 1,
        })?;
    materialize(program, &candidate, fragment)
}

/// Builds the mutant for one of `candidate`'s fragments.
pub(crate) fn materialize(
    program: &Program,
    candidate: &Candidate,
    fragment: &str,
) -> Result<Mutant, MutationError> {
    let site = &candidate.site;
    if !candidate.replacements.iter().any(|r| r == fragment) {
        return Err(MutationError::InvalidFragment {
            operator: site.operator_id.clone(),
            line: site.line,
            fragment: fragment.to_string(),
        });
    }
    let source = &program.source_text;
    let mutated_source = splice(source, candidate.byte_start, candidate.byte_end, fragment);
    Language::Python
        .grammar()
        .parse(&mutated_source)
        .map_err(MutationError::Unparseable)?;
    let bucket = bucket_of_line(source, site.line)?;
    let name = format!("{}_{}_0", site.mutation_type.tag(), bucket.tag());
    Ok(Mutant {
        id: mutant_id(&program.id, &name),
        name,
        program_id: program.id.clone(),
        mutation_type: site.mutation_type,
        bucket,
        site: site.clone(),
        mutated_fragment: fragment.to_string(),
        mutated_source,
        suspected_equivalent: false,
        seed: 0,
    })
}

fn splice(source: &str, start: usize, end: usize, fragment: &str) -> String {
    let mut s = String::with_capacity(source.len() + fragment.len());
    s.push_str(&source[..start]);
    s.push_str(fragment);
    s.push_str(&source[end..]);
    s
}

fn decision_candidates(ctx: &Ctx<'_>, root: Node<'_>) -> Vec<Candidate> {
    let mut out = Vec::new();
    walk_all(root, |node| match node.kind() {
        "comparison_operator" => {
            let mut cursor = node.walk();
            for op in node.children_by_field_name("operators", &mut cursor) {
                if let Some(flip) = comparator_flip(op.kind()) {
                    out.extend(ctx.candidate(
                        FLIP_COMPARATOR,
                        MutationType::Decision,
                        op.start_byte(),
                        op.end_byte(),
                        [flip.to_string()],
                    ));
                }
            }
        }
        "binary_operator" => {
            if let Some(op) = node.child_by_field_name("operator") {
                let swaps = arithmetic_swaps(op.kind());
                out.extend(ctx.candidate(
                    SWAP_ARITHMETIC,
                    MutationType::Decision,
                    op.start_byte(),
                    op.end_byte(),
                    swaps.iter().map(|s| s.to_string()),
                ));
            }
        }
        "boolean_operator" => {
            if let Some(op) = node.child_by_field_name("operator") {
                let swap = match op.kind() {
                    "and" => Some("or"),
                    "or" => Some("and"),
                    _ => None,
                };
                out.extend(swap.and_then(|s| {
                    ctx.candidate(
                        SWAP_BOOLEAN,
                        MutationType::Decision,
                        op.start_byte(),
                        op.end_byte(),
                        [s.to_string()],
                    )
                }));
            }
        }
        "augmented_assignment" => {
            if let Some(op) = node.child_by_field_name("operator") {
                let swaps = augmented_swaps(op.kind());
                out.extend(ctx.candidate(
                    SWAP_AUGMENTED,
                    MutationType::Decision,
                    op.start_byte(),
                    op.end_byte(),
                    swaps.iter().map(|s| s.to_string()),
                ));
            }
        }
        _ => {}
    });
    out
}

fn is_index(node: Node<'_>) -> bool {
    let Some(parent) = node.parent() else {
        return false;
    };
    if parent.kind() != "subscript" {
        return false;
    }
    let mut cursor = parent.walk();
    let found = parent
        .children_by_field_name("subscript", &mut cursor)
        .any(|c| c.id() == node.id());
    found
}

fn is_default_value(node: Node<'_>) -> bool {
    node.parent().is_some_and(|p| {
        matches!(p.kind(), "default_parameter" | "typed_default_parameter")
            && p.child_by_field_name("value").is_some_and(|v| v.id() == node.id())
    })
}

fn integer_neighbors(n: u128, index_zero: bool) -> Vec<String> {
    let mut v = vec![(n + 1).to_string()];
    if n >= 1 {
        v.push((n - 1).to_string());
    } else if !index_zero {
        v.push("-1".to_string());
    }
    if n >= 2 {
        if let Some(d) = n.checked_mul(2) {
            v.push(d.to_string());
        }
    }
    v
}

fn format_float(v: f64) -> Option<String> {
    if !v.is_finite() {
        return None;
    }
    let s = format!("{v}");
    if s.contains('e') || s.contains("inf") || s.contains("NaN") {
        return None;
    }
    Some(if s.contains('.') { s } else { format!("{s}.0") })
}

fn float_neighbors(text: &str) -> Vec<String> {
    let plain = !text.is_empty()
        && text.chars().all(|c| c.is_ascii_digit() || c == '.')
        && text.matches('.').count() == 1;
    if !plain {
        return Vec::new();
    }
    let Ok(v) = text.parse::<f64>() else {
        return Vec::new();
    };
    let mut out = vec![v + 1.0];
    if v >= 1.0 {
        out.push(v - 1.0);
    }
    if v != 0.0 {
        out.push(v * 2.0);
    }
    out.into_iter().filter_map(format_float).collect()
}

fn is_docstring_like(node: Node<'_>) -> bool {
    if node.kind() != "expression_statement" {
        return false;
    }
    let mut cursor = node.walk();
    let all_strings = node
        .named_children(&mut cursor)
        .all(|c| matches!(c.kind(), "string" | "concatenated_string"));
    all_strings
}

fn value_candidates(ctx: &Ctx<'_>, root: Node<'_>, options: &EngineOptions) -> Vec<Candidate> {
    let mut out = Vec::new();
    walk_all(root, |node| {
        let text = ctx.text(node);
        match node.kind() {
            "integer" => {
                let decimal = text.chars().all(|c| c.is_ascii_digit())
                    && (text == "0" || !text.starts_with('0'));
                let Some(n) = decimal.then(|| text.parse::<u128>().ok()).flatten() else {
                    return;
                };
                let index = is_index(node);
                if index && n == 0 {
                    out.extend(ctx.candidate(
                        FLIP_INDEX,
                        MutationType::Value,
                        node.start_byte(),
                        node.end_byte(),
                        ["-1".to_string()],
                    ));
                }
                let op = if is_default_value(node) {
                    PERTURB_DEFAULT
                } else {
                    PERTURB_NUMBER
                };
                out.extend(ctx.candidate(
                    op,
                    MutationType::Value,
                    node.start_byte(),
                    node.end_byte(),
                    integer_neighbors(n, index),
                ));
            }
            "float" => {
                let op = if is_default_value(node) {
                    PERTURB_DEFAULT
                } else {
                    PERTURB_NUMBER
                };
                out.extend(ctx.candidate(
                    op,
                    MutationType::Value,
                    node.start_byte(),
                    node.end_byte(),
                    float_neighbors(text),
                ));
            }
            "true" | "false" => {
                let flipped = if node.kind() == "true" { "False" } else { "True" };
                out.extend(ctx.candidate(
                    FLIP_BOOLEAN_CONSTANT,
                    MutationType::Value,
                    node.start_byte(),
                    node.end_byte(),
                    [flipped.to_string()],
                ));
            }
            "unary_operator" if is_index(node) && text.replace(' ', "") == "-1" => {
                out.extend(ctx.candidate(
                    FLIP_INDEX,
                    MutationType::Value,
                    node.start_byte(),
                    node.end_byte(),
                    ["0".to_string()],
                ));
            }
            "string" if options.include_strings => {
                let in_docstring = node.parent().is_some_and(is_docstring_like);
                let mut cursor = node.walk();
                let interpolated = node
                    .named_children(&mut cursor)
                    .any(|c| c.kind() == "interpolation");
                if in_docstring || interpolated {
                    return;
                }
                let mut cursor = node.walk();
                let content = node
                    .named_children(&mut cursor)
                    .find(|c| c.kind() == "string_content");
                if let Some(content) = content {
                    let body = ctx.text(content);
                    if body.contains('\n') {
                        return;
                    }
                    out.extend(ctx.candidate(
                        PERTURB_STRING,
                        MutationType::Value,
                        content.start_byte(),
                        content.end_byte(),
                        [format!("{body}X")],
                    ));
                }
            }
            _ => {}
        }
    });
    out
}

/// Block members other than comments.
fn block_statements(block: Node<'_>) -> Vec<Node<'_>> {
    let mut cursor = block.walk();
    let items: Vec<_> = block
        .named_children(&mut cursor)
        .filter(|c| c.kind() != "comment")
        .collect();
    items
}

fn alone_on_lines(ctx: &Ctx<'_>, node: Node<'_>) -> bool {
    let before = ctx.line_prefix(node.start_byte());
    let after = ctx.line_suffix(node.end_byte()).trim_start();
    before.chars().all(char::is_whitespace) && (after.is_empty() || after.starts_with('#'))
}

fn mutable_statement(ctx: &Ctx<'_>, node: Node<'_>) -> bool {
    node.parent().is_some_and(|p| p.kind() == "block")
        && !NON_MUTABLE_STATEMENTS.contains(&node.kind())
        && !is_docstring_like(node)
        && alone_on_lines(ctx, node)
}

fn identifiers<'s>(ctx: &Ctx<'s>, node: Node<'_>) -> Vec<&'s str> {
    let mut ids = Vec::new();
    walk_all(node, |n| {
        if n.kind() == "identifier" {
            ids.push(ctx.text(n));
        }
    });
    ids
}

/// Statements whose repetition changes state or output.
fn duplicable(ctx: &Ctx<'_>, node: Node<'_>) -> bool {
    if node.kind() != "expression_statement" || node.named_child_count() != 1 {
        return false;
    }
    let Some(expr) = node.named_child(0) else {
        return false;
    };
    match expr.kind() {
        "augmented_assignment" | "call" => true,
        "assignment" => {
            let (Some(left), Some(right)) = (
                expr.child_by_field_name("left"),
                expr.child_by_field_name("right"),
            ) else {
                return false;
            };
            let lhs = identifiers(ctx, left);
            identifiers(ctx, right).iter().any(|id| lhs.contains(id))
        }
        _ => false,
    }
}

fn statement_candidates(ctx: &Ctx<'_>, root: Node<'_>) -> Vec<Candidate> {
    let mut out = Vec::new();
    let noop = ctx.grammar.noop_statement();
    walk_all(root, |node| {
        if node.kind() == "return_statement" && node.named_child_count() > 0 {
            out.extend(ctx.candidate(
                DROP_RETURN_VALUE,
                MutationType::Statement,
                node.start_byte(),
                node.end_byte(),
                ["return".to_string()],
            ));
        }
        if node.kind() != "block" {
            return;
        }
        let stmts = block_statements(node);
        for (i, &stmt) in stmts.iter().enumerate() {
            if !mutable_statement(ctx, stmt) {
                continue;
            }
            let sole = stmts.len() == 1;
            let replacement = if sole { noop.to_string() } else { String::new() };
            out.extend(ctx.candidate(
                DELETE_STATEMENT,
                MutationType::Statement,
                stmt.start_byte(),
                stmt.end_byte(),
                [replacement],
            ));

            if duplicable(ctx, stmt) {
                let text = ctx.text(stmt);
                let indent = ctx.line_prefix(stmt.start_byte());
                out.extend(ctx.candidate(
                    DUPLICATE_STATEMENT,
                    MutationType::Statement,
                    stmt.start_byte(),
                    stmt.end_byte(),
                    [format!("{text}\n{indent}{text}")],
                ));
            }

            if let Some(&next) = stmts.get(i + 1) {
                if mutable_statement(ctx, next) && ctx.text(stmt) != ctx.text(next) {
                    let between = &ctx.src[stmt.end_byte()..next.start_byte()];
                    let swapped = format!("{}{}{}", ctx.text(next), between, ctx.text(stmt));
                    out.extend(ctx.candidate(
                        SWAP_STATEMENTS,
                        MutationType::Statement,
                        stmt.start_byte(),
                        next.end_byte(),
                        [swapped],
                    ));
                }
            }
        }
    });
    out
}
