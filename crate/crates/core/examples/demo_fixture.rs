//! Regenerates the demo replay fixture and scripted verdicts:
//!
//! ```text
//! cargo run -p sumtrace --example demo_fixture
//! ```
//!
//! Summaries are canned text, not model output. Each mutant is assigned one
//! of three outcomes from a digest of its id: the mutated summary names the
//! change (Positive), repeats the original summary (DescribesOriginal) or
//! collapses to a vague sentence (TooAbstract). The verdict script records
//! the matching judgement.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;
use sha2::{Digest, Sha256};
use sumtrace::corpus::{ingest_directory, Origin};
use sumtrace::mutation::{generate_plan, EngineOptions, Mutant, Quota};
use sumtrace::summary::{build_prompt, cache_key};

pub const MODEL: &str = "gpt-4-1106-preview";
pub const SEED: u64 = 7;

fn original_summary(program_id: &str) -> &'static str {
    match program_id {
        "merge_sort" => {
            "This function sorts a list in place using merge sort. It first checks if the length of the list is \
             greater than 1, because a list with only one element is already sorted. It splits the list into two \
             halves at the midpoint, sorts each half recursively, and then merges the halves back by repeatedly \
             copying the smaller front element. Any elements left over in either half are copied at the end, and \
             the sorted list is returned."
        }
        "kruskal" => {
            "The code implements Kruskal's algorithm for a minimum spanning tree. The find function returns the root \
             of the set containing i: if i is its own parent it returns i, otherwise it recursively follows the \
             parent links. The union function joins two sets by rank, attaching the shorter tree under the taller \
             one and increasing the rank when both are equal. The kruskal function sorts the edges by weight, \
             starts every vertex in its own set, and adds each edge whose endpoints lie in different sets until the \
             tree has vertices - 1 edges. It returns the chosen edges and their total weight."
        }
        "min_heap" => {
            "This class implements a binary min-heap stored in a list. push appends a value and sifts it up until \
             its parent is smaller. get_min returns the smallest element in the heap, or None when the heap is \
             empty. pop removes and returns the smallest element by moving the last element to the root and \
             sifting it down, swapping with the smaller child while that child is smaller."
        }
        _ => "This code defines a small program.",
    }
}

fn abstract_summary(program_id: &str) -> &'static str {
    match program_id {
        "merge_sort" => "This function sorts the given list using a divide-and-conquer strategy and returns it.",
        "kruskal" => "The code computes a minimum spanning tree of a weighted graph using a union-find structure.",
        "min_heap" => "This class provides a priority queue that keeps track of the smallest element.",
        _ => "This code defines a small program.",
    }
}

fn describe_change(m: &Mutant) -> String {
    let line = m.site.line;
    let orig = m.site.original_fragment.lines().next().unwrap_or("").trim();
    let new = m.mutated_fragment.lines().next().unwrap_or("").trim();
    match m.site.operator_id.as_str() {
        "delete-statement" if new.is_empty() || new == "pass" => {
            format!("Notably, the statement `{orig}` on line {line} is missing, so that step never happens.")
        }
        "swap-statements" => format!(
            "On line {line} the order of two statements is reversed: `{new}` now runs before `{orig}`."
        ),
        "drop-return-value" => format!("On line {line} the code returns without a value instead of `{orig}`."),
        _ => format!("On line {line} the code uses `{new}` where `{orig}` would be expected."),
    }
}

fn outcome(id: &str) -> u8 {
    Sha256::digest(id.as_bytes())[0]
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo");
    let ingestion = ingest_directory(&demo.join("corpus"), Origin::Synthetic)?;
    let quota = Quota::uniform(1);
    let mut fixture = String::new();
    let mut script = String::new();
    let mut push = |code: &str, text: &str| {
        let key = cache_key(MODEL, &build_prompt(code), code);
        fixture.push_str(&json!({ "cache_key": key, "summary_text": text }).to_string());
        fixture.push('\n');
    };
    for program in &ingestion.programs {
        let original = original_summary(&program.id);
        push(&program.source_text, original);
        let plan = generate_plan(program, &quota, SEED, &EngineOptions::default())?;
        for m in &plan.mutants {
            let o = outcome(&m.id);
            let (text, verdict) = match o % 3 {
                0 => {
                    let bug = o % 2 == 0;
                    let mut text = format!("{original} {}", describe_change(m));
                    if bug {
                        text.push_str(" This looks like a bug and will give incorrect results.");
                    }
                    (
                        text,
                        json!({ "mutant_id": m.id, "label": "Positive", "recognized_as_bug": bug }),
                    )
                }
                1 => (
                    original.to_string(),
                    json!({ "mutant_id": m.id, "label": "Negative", "failure_mode": "DescribesOriginal" }),
                ),
                _ => (
                    abstract_summary(&program.id).to_string(),
                    json!({ "mutant_id": m.id, "label": "Negative", "failure_mode": "TooAbstract" }),
                ),
            };
            push(&m.mutated_source, &text);
            let _ = writeln!(script, "{verdict}");
        }
    }
    fs::write(demo.join("summaries.jsonl"), fixture)?;
    fs::write(demo.join("verdicts.jsonl"), script)?;
    println!("wrote {}", demo.display());
    Ok(())
}
