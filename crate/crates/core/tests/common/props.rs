//! Invariants every generated mutant must satisfy, shared by the property
//! tests and the acceptance target.

use similar::{DiffTag, TextDiff};
use sumtrace::corpus::Program;
use sumtrace::lang::Language;
use sumtrace::mutation::{
    apply, bucket_of, enumerate_candidates, generate_plan, EngineOptions, Mutant, MutationType, Quota,
};

/// Checks one mutant against its program. `inert_lines` are comment or
/// docstring lines that must never be edited.
pub fn check_mutant(program: &Program, m: &Mutant, inert_lines: &[usize]) -> Result<(), String> {
    let ctx = |what: &str| format!("{}: {what}", m.id);
    if !Language::Python.grammar().parses(&m.mutated_source) {
        return Err(ctx("mutated source does not parse"));
    }
    if m.mutated_source == program.source_text {
        return Err(ctx("mutant is identical to the original"));
    }
    single_region(&program.source_text, &m.mutated_source, m.site.line, m.site.end_line)
        .map_err(|e| ctx(&e))?;
    let bucket = bucket_of(&m.site, program).map_err(|e| ctx(&e.to_string()))?;
    if bucket != m.bucket {
        return Err(ctx(&format!("stored bucket {:?}, recomputed {bucket:?}", m.bucket)));
    }
    let again = apply(program, &m.site, &m.mutated_fragment).map_err(|e| ctx(&e.to_string()))?;
    if again.mutated_source != m.mutated_source {
        return Err(ctx("re-applying the site does not reproduce the mutant"));
    }
    // Statement sites may span a block that contains a comment; the site
    // itself must not start on one.
    if inert_lines.contains(&m.site.line) {
        return Err(ctx(&format!("edit on comment or docstring line {}", m.site.line)));
    }
    if m.site.operator_id == "flip-comparator" {
        flip_is_involution(program, m).map_err(|e| ctx(&e))?;
    }
    Ok(())
}

/// Every changed line lies inside one window around the site, found by an
/// independent line diff. A swap shows up as delete/equal/insert, so the
/// window is the site's line range rather than "no equal run in between".
fn single_region(original: &str, mutated: &str, line: usize, end_line: usize) -> Result<(), String> {
    let diff = TextDiff::from_lines(original, mutated);
    let changed: Vec<_> = diff.ops().iter().filter(|op| op.tag() != DiffTag::Equal).collect();
    if changed.is_empty() {
        return Err("no changed lines".into());
    }
    let lo = changed.iter().map(|op| op.old_range().start).min().unwrap();
    let hi = changed.iter().map(|op| op.old_range().end).max().unwrap();
    // 0-based half-open; an insertion right after the site has lo == hi == end_line.
    if lo + 1 < line || hi > end_line {
        return Err(format!(
            "changed lines {}..{} fall outside site lines {line}..={end_line}",
            lo + 1,
            hi
        ));
    }
    Ok(())
}

/// Flipping the flipped comparator gives back the original text.
fn flip_is_involution(program: &Program, m: &Mutant) -> Result<(), String> {
    let back = enumerate_candidates(&m.mutated_source, MutationType::Decision, &EngineOptions::default())
        .map_err(|e| e.to_string())?
        .into_iter()
        .find(|c| {
            c.site.operator_id == "flip-comparator" && c.site.line == m.site.line && c.site.span.start == m.site.span.start
        })
        .ok_or("flipped comparator is not itself a flip site")?;
    let restored = format!(
        "{}{}{}",
        &m.mutated_source[..back.byte_start],
        back.replacements.first().ok_or("no flip replacement")?,
        &m.mutated_source[back.byte_end..]
    );
    if restored != program.source_text {
        return Err("double flip does not restore the original".into());
    }
    Ok(())
}

/// Generates a plan twice, checks determinism and every mutant. Returns the
/// number of mutants checked.
pub fn check_program(program: &Program, quota: &Quota, seed: u64, inert_lines: &[usize]) -> Result<usize, String> {
    let options = EngineOptions::default();
    let plan = generate_plan(program, quota, seed, &options).map_err(|e| format!("{}: {e}", program.id))?;
    let again = generate_plan(program, quota, seed, &options).map_err(|e| format!("{}: {e}", program.id))?;
    let bytes = |p: &sumtrace::mutation::MutationPlan| serde_json::to_vec(p).unwrap();
    if bytes(&plan) != bytes(&again) {
        return Err(format!("{}: plan differs between runs with seed {seed}", program.id));
    }
    for m in &plan.mutants {
        check_mutant(program, m, inert_lines)?;
    }
    flip_involution_everywhere(program)?;
    Ok(plan.mutants.len())
}

/// Applies every flip-comparator candidate of `program` and flips it back.
/// Returns the number of sites checked.
pub fn flip_involution_everywhere(program: &Program) -> Result<usize, String> {
    let sites = enumerate_candidates(&program.source_text, MutationType::Decision, &EngineOptions::default())
        .map_err(|e| format!("{}: {e}", program.id))?;
    let mut n = 0;
    for c in sites.iter().filter(|c| c.site.operator_id == "flip-comparator") {
        for r in &c.replacements {
            let m = apply(program, &c.site, r).map_err(|e| format!("{}: {e}", program.id))?;
            flip_is_involution(program, &m).map_err(|e| format!("{} line {}: {e}", program.id, c.site.line))?;
            n += 1;
        }
    }
    Ok(n)
}
