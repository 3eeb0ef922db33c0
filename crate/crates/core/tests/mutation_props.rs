mod common;

use common::{fuzz, props};
use proptest::prelude::*;
use sumtrace::corpus::{ingest_directory, Origin, Program};
use sumtrace::lang::Language;
use sumtrace::mutation::{apply, enumerate_candidates, EngineOptions, MutationType, Quota};

fn demo_programs() -> Vec<Program> {
    ingest_directory(&common::demo_dir().join("corpus"), Origin::Synthetic)
        .unwrap()
        .programs
}

fn fuzz_program(seed: u64) -> (Program, Vec<usize>) {
    let f = fuzz::program(seed);
    let p = Program::from_source(format!("fuzz_{seed}"), f.source, Origin::Synthetic, None).unwrap();
    (p, f.inert_lines)
}

#[test]
fn fuzz_generator_emits_valid_python() {
    for seed in 0..200 {
        let f = fuzz::program(seed);
        assert!(Language::Python.grammar().parses(&f.source), "seed {seed}:\n{}", f.source);
        assert!(!f.inert_lines.is_empty());
    }
}

#[test]
fn every_demo_candidate_satisfies_invariants() {
    let options = EngineOptions::default();
    let mut checked = 0;
    for program in demo_programs() {
        for t in MutationType::ALL {
            for c in enumerate_candidates(&program.source_text, t, &options).unwrap() {
                for r in &c.replacements {
                    let m = apply(&program, &c.site, r).unwrap();
                    props::check_mutant(&program, &m, &[]).unwrap();
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 100, "only {checked} mutants");
}

#[test]
fn demo_plans_are_deterministic_and_valid() {
    for program in demo_programs() {
        for seed in [0, 7, 99] {
            let n = props::check_program(&program, &Quota::uniform(3), seed, &[]).unwrap();
            assert!(n > 0);
        }
    }
}

#[test]
fn fifty_fuzz_programs_satisfy_invariants() {
    let mut total = 0;
    for seed in 0..50 {
        let (program, inert) = fuzz_program(seed);
        total += props::check_program(&program, &Quota::uniform(2), seed, &inert)
            .unwrap_or_else(|e| panic!("{e}\n{}", program.source_text));
    }
    assert!(total > 200, "only {total} mutants");
}

#[test]
fn different_seeds_usually_pick_different_plans() {
    let program = &demo_programs()[0];
    let opts = EngineOptions::default();
    let a = sumtrace::mutation::generate_plan(program, &Quota::uniform(1), 1, &opts).unwrap();
    let b = sumtrace::mutation::generate_plan(program, &Quota::uniform(1), 2, &opts).unwrap();
    assert_ne!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 24,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn random_programs_and_seeds(program_seed in 1000u64..1_000_000, plan_seed in any::<u64>()) {
        let (program, inert) = fuzz_program(program_seed);
        let r = props::check_program(&program, &Quota::uniform(1), plan_seed, &inert);
        prop_assert!(r.is_ok(), "{}\n{}", r.unwrap_err(), program.source_text);
    }
}

/// True when `block` appears as consecutive lines of `source`, ignoring
/// leading and trailing whitespace on each line.
fn contains_block(source: &str, block: &str) -> bool {
    let want: Vec<&str> = block.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let have: Vec<&str> = source.lines().map(str::trim).collect();
    have.windows(want.len()).any(|w| w == want.as_slice())
}

fn reproduces(program_id: &str, original: &str, mutated: &str) -> bool {
    let programs = demo_programs();
    let program = programs.iter().find(|p| p.id == program_id).unwrap();
    assert!(contains_block(&program.source_text, original), "{program_id} lacks the original snippet");
    let options = EngineOptions::default();
    MutationType::ALL.into_iter().any(|t| {
        enumerate_candidates(&program.source_text, t, &options)
            .unwrap()
            .iter()
            .flat_map(|c| c.replacements.iter().map(move |r| (c, r)))
            .any(|(c, r)| contains_block(&apply(program, &c.site, r).unwrap().mutated_source, mutated))
    })
}

#[test]
fn index_flip_in_get_min() {
    assert!(reproduces(
        "min_heap",
        "def get_min(self):\n    if not self.heap:\n        return None\n    return self.heap[0]",
        "def get_min(self):\n    if not self.heap:\n        return None\n    return self.heap[-1]",
    ));
}

#[test]
fn merge_sort_guard_and_midpoint_edits() {
    let original = "def merge_sort(arr):\n    if len(arr) > 1:\n        mid = len(arr) // 2";
    for mutated in [
        "def merge_sort(arr):\n    if len(arr) > 2:\n        mid = len(arr) // 2",
        "def merge_sort(arr):\n    if len(arr) > 1:\n        mid = len(arr) // 3",
        "def merge_sort(arr):\n    if len(arr) < 1:\n        mid = len(arr) // 2",
    ] {
        assert!(reproduces("merge_sort", original, mutated), "{mutated}");
    }
}

#[test]
fn find_comparator_and_return_edits() {
    let original = "def find(parent, i):\n    if parent[i] == i:\n        return i\n    return find(parent, parent[i])";
    for mutated in [
        "def find(parent, i):\n    if parent[i] != i:\n        return i\n    return find(parent, parent[i])",
        "def find(parent, i):\n    if parent[i] == i:\n        return\n    return find(parent, parent[i])",
    ] {
        assert!(reproduces("kruskal", original, mutated), "{mutated}");
    }
}

/// Cross-checks the tree-sitter parse with CPython's own parser when a
/// `python3` is on PATH.
#[test]
fn mutants_compile_under_cpython() {
    let mut sources = Vec::new();
    let mut add = |program: &Program| {
        let plan =
            sumtrace::mutation::generate_plan(program, &Quota::uniform(2), 7, &EngineOptions::default()).unwrap();
        sources.push(program.source_text.clone());
        sources.extend(plan.mutants.into_iter().map(|m| m.mutated_source));
    };
    demo_programs().iter().for_each(&mut add);
    (0..50).for_each(|s| add(&fuzz_program(s).0));

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("sources.json");
    std::fs::write(&input, serde_json::to_vec(&sources).unwrap()).unwrap();
    let script = "import ast, json, sys\n\
                  bad = 0\n\
                  for i, s in enumerate(json.load(open(sys.argv[1]))):\n\
                  \x20   try:\n\
                  \x20       ast.parse(s)\n\
                  \x20   except SyntaxError as e:\n\
                  \x20       bad += 1\n\
                  \x20       print(i, e)\n\
                  sys.exit(1 if bad else 0)\n";
    let out = match std::process::Command::new("python3").arg("-c").arg(script).arg(&input).output() {
        Ok(out) => out,
        Err(_) => {
            eprintln!("python3 not found; skipping");
            return;
        }
    };
    assert!(
        out.status.success(),
        "{} of {} sources rejected:\n{}",
        String::from_utf8_lossy(&out.stdout).lines().count(),
        sources.len(),
        String::from_utf8_lossy(&out.stdout)
    );
}
