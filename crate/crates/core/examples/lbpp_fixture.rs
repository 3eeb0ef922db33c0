//! Regenerates the bundled LBPP-style verdict fixture:
//!
//! ```text
//! cargo run -p sumtrace --example lbpp_fixture
//! ```
//!
//! Fifty single-function programs with one statement, one decision and one
//! value mutant each, scored for two models. Only the per-type positive
//! counts and the recognized-as-bug count are fixed; which programs carry a
//! positive is a seeded shuffle.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sumtrace::analytics::ScoredMutant;
use sumtrace::corpus::ComplexityCategory;
use sumtrace::mutation::{LocationBucket, MutationType};
use sumtrace::review::{FailureMode, Label};

const PROGRAMS: usize = 50;

struct ModelSpec {
    model_id: &'static str,
    file: &'static str,
    /// Positives for statement, decision, value.
    positives: [usize; 3],
    recognized_as_bug: usize,
    seed: u64,
}

const MODELS: [ModelSpec; 2] = [
    ModelSpec {
        model_id: "gpt-4-1106-preview",
        file: "gpt-4.jsonl",
        positives: [23, 22, 29],
        recognized_as_bug: 0,
        seed: 4,
    },
    ModelSpec {
        model_id: "gpt-5.2",
        file: "gpt-5.2.jsonl",
        positives: [38, 44, 46],
        recognized_as_bug: 62,
        seed: 52,
    },
];

fn loc_of(program: usize) -> usize {
    14 + (program * 17) % 37
}

fn rows_for(spec: &ModelSpec) -> Vec<ScoredMutant> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::new();
    for (ti, t) in MutationType::ALL.into_iter().enumerate() {
        let mut order: Vec<usize> = (0..PROGRAMS).collect();
        order.shuffle(&mut rng);
        let positive: Vec<bool> = {
            let mut v = vec![false; PROGRAMS];
            for &p in &order[..spec.positives[ti]] {
                v[p] = true;
            }
            v
        };
        for p in 0..PROGRAMS {
            let program_id = format!("lbpp_{:03}", p + 1);
            let bucket = LocationBucket::ALL[(p + ti) % 3];
            let name = format!("{}_{}_1", t.tag(), bucket.tag());
            let label = if positive[p] { Label::Positive } else { Label::Negative };
            let failure_mode = (!positive[p]).then(|| {
                if (p + ti) % 2 == 0 {
                    FailureMode::DescribesOriginal
                } else {
                    FailureMode::TooAbstract
                }
            });
            rows.push(ScoredMutant {
                mutant_id: format!("{program_id}.{name}"),
                program_id,
                model_id: spec.model_id.to_string(),
                complexity: ComplexityCategory::SF,
                mutation_type: t,
                bucket,
                loc: loc_of(p),
                label,
                failure_mode,
                recognized_as_bug: false,
            });
        }
    }
    let mut detected: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].is_positive()).collect();
    detected.shuffle(&mut rng);
    for &i in &detected[..spec.recognized_as_bug] {
        rows[i].recognized_as_bug = true;
    }
    rows.sort_by(|a, b| a.mutant_id.cmp(&b.mutant_id));
    rows
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("lbpp");
    fs::create_dir_all(&dir)?;
    for spec in &MODELS {
        let mut out = String::new();
        for row in rows_for(spec) {
            out.push_str(&serde_json::to_string(&row)?);
            out.push('\n');
        }
        fs::write(dir.join(spec.file), out)?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}
