//! Acceptance run: one PASS/FAIL line per criterion, details indented below.
//! Exits non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sumtrace::analytics::stats::{chi_square, chi_square_sf, cohens_kappa, mann_whitney_u, Confusion, ContingencyTable};
use sumtrace::analytics::{detection_rates, format_pp, load_rows, Dimension, ScoredMutant};
use sumtrace::corpus::{ingest_directory, Origin, Program};
use sumtrace::mutation::{apply, enumerate_candidates, EngineOptions, MutationType, Quota};

type Check = Result<Vec<String>, Vec<String>>;

/// Collects sub-check results; the criterion passes when none failed.
#[derive(Default)]
struct Notes {
    lines: Vec<String>,
    failed: bool,
}

impl Notes {
    fn check(&mut self, ok: bool, detail: impl Into<String>) {
        let detail = detail.into();
        self.lines.push(format!("{} {detail}", if ok { "ok  " } else { "FAIL" }));
        self.failed |= !ok;
    }

    fn timed<T>(&mut self, what: &str, limit: Duration, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        self.check(took < limit, format!("{what} took {took:.2?} (limit {limit:?})"));
        out
    }

    fn finish(self) -> Check {
        if self.failed {
            Err(self.lines)
        } else {
            Ok(self.lines)
        }
    }
}

// --- statistics reproduction ------------------------------------------------

/// Pearson χ² computed directly from expected counts, as an oracle.
fn chi_square_oracle(counts: &[[u64; 2]]) -> f64 {
    let n: u64 = counts.iter().flatten().sum();
    let cols = [0, 1].map(|j| counts.iter().map(|r| r[j]).sum::<u64>());
    counts
        .iter()
        .flat_map(|r| {
            let row: u64 = r.iter().sum();
            (0..2).map(move |j| (r[j], row))
        })
        .enumerate()
        .map(|(k, (o, row))| {
            let e = row as f64 * cols[k % 2] as f64 / n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

fn percents(rows: &[ScoredMutant]) -> Vec<String> {
    let b = detection_rates(rows, Dimension::MutationType).unwrap();
    b.groups.iter().chain([&b.overall]).map(|g| format!("{} {}", g.group, g.percent())).collect()
}

fn statistics_reproduction() -> Check {
    let mut n = Notes::default();
    let limit = Duration::from_secs(1);

    let counts = [[62, 19], [27, 54], [23, 58], [14, 67]];
    let r = n.timed("chi_square", limit, || {
        chi_square(&ContingencyTable::from_counts(counts.iter().map(|r| r.to_vec()).collect())).unwrap()
    });
    let v = r.effect_size.unwrap().value;
    let oracle = chi_square_oracle(&counts);
    n.check((r.statistic - 69.04).abs() <= 0.05, format!("chi2 = {:.4} (target 69.04 +- 0.05)", r.statistic));
    n.check((r.statistic - oracle).abs() < 1e-9, format!("chi2 matches direct computation {oracle:.6}"));
    n.check(r.degrees_of_freedom == Some(3), format!("df = {:?}", r.degrees_of_freedom));
    n.check(r.p_value < 0.001, format!("p = {:.3e}", r.p_value));
    n.check((v - 0.462).abs() <= 0.005, format!("Cramer's V = {v:.4} (target 0.462 +- 0.005)"));

    let confusion = Confusion::new([[120, 6], [5, 193]]);
    let k = n.timed("cohens_kappa", limit, || cohens_kappa(&confusion).unwrap());
    let m = confusion.matrix();
    n.check(
        confusion.total() == 324 && confusion.agreements() == 313,
        format!("{} items, {} agreements", confusion.total(), confusion.agreements()),
    );
    n.check(
        m[0][0] + m[0][1] == 126 && m[0][0] + m[1][0] == 125,
        format!("positive marginals {} / {}", m[0][0] + m[0][1], m[0][0] + m[1][0]),
    );
    n.check((k - 0.928).abs() <= 0.005, format!("kappa = {k:.5} (target 0.928 +- 0.005)"));
    let pct = confusion.percent_agreement() * 100.0;
    n.check((pct - 96.6).abs() <= 0.1, format!("agreement = {pct:.3}% (target 96.6 +- 0.1)"));

    let dir = common::lbpp_dir();
    let (gpt4, gpt52) = n.timed("detection_rates on both fixtures", limit, || {
        let a = load_rows(&dir.join("gpt-4.jsonl")).unwrap();
        let b = load_rows(&dir.join("gpt-5.2.jsonl")).unwrap();
        (a, b)
    });
    let want4 = ["Statement 46.0%", "Decision 44.0%", "Value 58.0%", "Overall 49.3%"];
    let want52 = ["Statement 76.0%", "Decision 88.0%", "Value 92.0%", "Overall 85.3%"];
    let got4 = percents(&gpt4);
    let got52 = percents(&gpt52);
    n.check(got4 == want4, format!("GPT-4: {}", got4.join(", ")));
    n.check(got52 == want52, format!("GPT-5.2: {}", got52.join(", ")));
    let o4 = detection_rates(&gpt4, Dimension::MutationType).unwrap().overall;
    let o52 = detection_rates(&gpt52, Dimension::MutationType).unwrap().overall;
    let pp = format_pp(o4.positives, o4.total, o52.positives, o52.total);
    n.check(pp == "+36.0pp", format!("improvement {pp}"));
    n.finish()
}

// --- statistical oracles ----------------------------------------------------

/// Two-sided exact p by enumerating every labelling of the pooled sample.
fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (na, total) = (a.len(), pooled.len());
    let u_of = |in_a: &dyn Fn(usize) -> bool| -> f64 {
        let mut u: f64 = 0.0;
        for i in (0..total).filter(|&i| in_a(i)) {
            for j in (0..total).filter(|&j| !in_a(j)) {
                u += match pooled[i].partial_cmp(&pooled[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
        let max = (na * (total - na)) as f64;
        u.min(max - u)
    };
    let observed = u_of(&|i| i < na);
    let (mut hits, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != na {
            continue;
        }
        all += 1;
        if u_of(&|i| mask & (1 << i) != 0) <= observed + 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / all as f64
}

/// κ from two expanded rating vectors.
fn kappa_oracle(m: [[u64; 2]; 2]) -> Option<f64> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, row) in m.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            for _ in 0..count {
                a.push(i == 0);
                b.push(j == 0);
            }
        }
    }
    let n = a.len() as f64;
    let p_o = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / n;
    let pa = a.iter().filter(|&&x| x).count() as f64 / n;
    let pb = b.iter().filter(|&&x| x).count() as f64 / n;
    let p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
    (p_e < 1.0).then(|| (p_o - p_e) / (1.0 - p_e))
}

fn statistical_oracles() -> Check {
    let mut n = Notes::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac1e);

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let na = rng.gen_range(1..=9);
        let nb = rng.gen_range(1..=10 - na);
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.gen_range(0..6) as f64).collect() };
        let (a, b) = (draw(na), draw(nb));
        let p = mann_whitney_u(&a, &b).unwrap().p_value;
        worst = worst.max((p - brute_force_p(&a, &b)).abs());
    }
    n.check(worst <= 1e-9, format!("Mann-Whitney exact vs enumeration, 200 instances, max |dp| = {worst:.2e}"));

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 500 {
        let m = [[0; 2]; 2].map(|r: [u64; 2]| r.map(|_| rng.gen_range(0..40)));
        let Some(want) = kappa_oracle(m) else { continue };
        worst = worst.max((cohens_kappa(&Confusion::new(m)).unwrap() - want).abs());
        checked += 1;
    }
    n.check(worst <= 1e-12, format!("kappa vs expanded vectors, 500 matrices, max |dk| = {worst:.2e}"));

    for (df, x) in [(1.0, 3.84), (2.0, 5.99), (3.0, 7.81)] {
        let p = chi_square_sf(x, df);
        n.check((p - 0.05).abs() <= 5e-4, format!("chi2 sf(df={df}, x={x}) = {p:.6}"));
    }
    // Two degrees of freedom have a closed form.
    let p = chi_square_sf(5.99, 2.0);
    n.check((p - (-5.99f64 / 2.0).exp()).abs() < 1e-12, "chi2 sf(df=2) equals exp(-x/2)");
    n.finish()
}

// --- mutation engine ----------------------------------------------------------

fn contains_block(source: &str, block: &str) -> bool {
    let want: Vec<&str> = block.lines().map(str::trim).collect();
    let have: Vec<&str> = source.lines().map(str::trim).collect();
    have.windows(want.len()).any(|w| w == want.as_slice())
}

fn can_produce(program: &Program, original: &str, mutated: &str) -> bool {
    let options = EngineOptions::default();
    contains_block(&program.source_text, original)
        && MutationType::ALL.into_iter().any(|t| {
            enumerate_candidates(&program.source_text, t, &options)
                .unwrap()
                .iter()
                .flat_map(|c| c.replacements.iter().map(move |r| (c, r)))
                .any(|(c, r)| contains_block(&apply(program, &c.site, r).unwrap().mutated_source, mutated))
        })
}

fn mutation_properties() -> Check {
    let mut n = Notes::default();
    let start = Instant::now();
    let demo = ingest_directory(&common::demo_dir().join("corpus"), Origin::Synthetic)
        .unwrap()
        .programs;

    let mut mutants = 0;
    let mut flips = 0;
    let mut errors = Vec::new();
    for program in &demo {
        match props_for(program, &[]) {
            Ok((m, f)) => (mutants, flips) = (mutants + m, flips + f),
            Err(e) => errors.push(e),
        }
    }
    for seed in 0..50 {
        let f = common::fuzz::program(seed);
        let program = Program::from_source(format!("fuzz_{seed}"), f.source, Origin::Synthetic, None).unwrap();
        match props_for(&program, &f.inert_lines) {
            Ok((m, fl)) => (mutants, flips) = (mutants + m, flips + fl),
            Err(e) => errors.push(e),
        }
    }
    n.check(
        errors.is_empty(),
        format!("{mutants} mutants over 3 demo + 50 fuzz programs parse, edit one region, keep their bucket, re-apply, regenerate identically; {flips} flip sites are involutions"),
    );
    for e in errors.iter().take(5) {
        n.check(false, e.clone());
    }

    let find = |id: &str| demo.iter().find(|p| p.id == id).unwrap();
    let listings = [
        ("min_heap", "return self.heap[0]", "return self.heap[-1]", "heap[0] -> heap[-1]"),
        ("merge_sort", "if len(arr) > 1:", "if len(arr) > 2:", "> 1 -> > 2"),
        ("merge_sort", "mid = len(arr) // 2", "mid = len(arr) // 3", "// 2 -> // 3"),
        ("merge_sort", "if len(arr) > 1:", "if len(arr) < 1:", "> -> <"),
        ("kruskal", "if parent[i] == i:\n    return i", "if parent[i] != i:\n    return i", "== -> !="),
        ("kruskal", "if parent[i] == i:\n    return i", "if parent[i] == i:\n    return", "return i -> return"),
    ];
    for (id, original, mutated, what) in listings {
        n.check(can_produce(find(id), original, mutated), format!("{id}: {what}"));
    }
    let took = start.elapsed();
    n.check(took < Duration::from_secs(30), format!("suite took {took:.2?} (limit 30s)"));
    n.finish()
}

fn props_for(program: &Program, inert: &[usize]) -> Result<(usize, usize), String> {
    let m = common::props::check_program(program, &Quota::uniform(1), 7, inert)?;
    let f = common::props::flip_involution_everywhere(program)?;
    Ok((m, f))
}

// --- end-to-end replay --------------------------------------------------------

fn sumtrace(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sumtrace"))
        .arg("-C")
        .arg(root)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn end_to_end_replay() -> Check {
    let mut n = Notes::default();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("demo");
    let demo = common::demo_dir();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (corpus, fixture, script) = (
        s(&demo.join("corpus")),
        s(&demo.join("summaries.jsonl")),
        s(&demo.join("verdicts.jsonl")),
    );
    let stages: Vec<(&str, Vec<&str>)> = vec![
        ("ingest", vec!["ingest", "--corpus", &corpus, "--quota", "1", "--seed", "7"]),
        ("mutate", vec!["mutate"]),
        ("summarize", vec!["summarize", "--replay", &fixture, "--model", common::DEMO_MODEL]),
        ("review", vec!["review", "--rater", common::DEMO_RATER, "--script", &script]),
        ("reconcile", vec!["reconcile"]),
        ("report", vec!["report"]),
    ];
    for (name, args) in &stages {
        let o = sumtrace(&root, args);
        n.check(o.status.success(), format!("{name} exits {:?}", o.status.code()));
        if !o.status.success() {
            n.lines.push(String::from_utf8_lossy(&o.stderr).trim().to_string());
            return n.finish();
        }
    }
    let store = sumtrace::store::Store::open_read_only(&root).unwrap();
    let mutants = store.mutants().map(|m| m.len()).unwrap_or(0);
    n.check(mutants == 27, format!("{mutants} mutants over 3 programs"));
    let bad = common::golden_mismatches(&root);
    n.check(bad.is_empty(), format!("report tables match goldens byte-for-byte {bad:?}"));

    let before = common::snapshot(&root);
    for (name, args) in &stages {
        let mut args = args.clone();
        if *name == "ingest" {
            args.push("--resume");
        }
        let code = sumtrace(&root, &args).status.code();
        let after = common::snapshot(&root);
        let added = after.keys().filter(|k| !before.contains_key(*k)).count();
        let changed = after.iter().filter(|(k, v)| before.get(*k).is_some_and(|b| b != *v)).count();
        n.check(
            code == Some(0) && added == 0 && changed == 0,
            format!("re-running {name} (exit {code:?}): {added} new, {changed} modified of {} files", after.len()),
        );
    }
    n.finish()
}

// --- crash safety -------------------------------------------------------------

fn crash_safety() -> Check {
    let mut n = Notes::default();
    let total = common::demo_write_count();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc4a5);
    let mut failures = Vec::new();
    for _ in 0..100 {
        let fail_at = rng.gen_range(0..total);
        let frac = rng.gen_range(0.0..1.0);
        if let Err(e) = common::crash_trial(fail_at, frac) {
            failures.push(e);
        }
    }
    n.check(
        failures.is_empty(),
        format!("100 interrupted runs over {total} writes: {} failed integrity or resume", failures.len()),
    );
    for e in failures.iter().take(5) {
        n.check(false, e.clone());
    }
    n.finish()
}

fn main() {
    let criteria: [(&str, fn() -> Check); 5] = [
        ("statistics reproduction", statistics_reproduction),
        ("statistical oracles", statistical_oracles),
        ("mutation engine property suite", mutation_properties),
        ("end-to-end replay", end_to_end_replay),
        ("store crash safety", crash_safety),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(vec![format!("panicked: {msg}")])
        });
        let (verdict, lines) = match result {
            Ok(lines) => ("PASS", lines),
            Err(lines) => {
                failed += 1;
                ("FAIL", lines)
            }
        };
        println!("{verdict} {name} ({:.1?})", start.elapsed());
        for l in lines {
            println!("    {l}");
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
