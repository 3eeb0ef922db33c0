use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;

use super::stats::{chi_square, mann_whitney_u, StatResult};
use super::{detection_rates, format_pp, format_percent, reportable_rows, Dimension, GroupRate, RateBreakdown, Result, ScoredMutant};
use crate::corpus::ComplexityCategory;
use crate::mutation::{LocationBucket, MutationType};
use crate::review::{FailureMode, Label};
use crate::store::{Phase, Store};

/// Report files keyed by path relative to `report/`. Contents carry no
/// timestamps, so the same verdicts always render the same bytes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportBundle {
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn get(&self, rel: &str) -> Option<&str> {
        self.files.get(rel).map(String::as_str)
    }
}

/// Renders and writes the report, then advances the campaign to Reported.
/// Returns the bundle and the number of files whose bytes changed.
pub fn emit_report(store: &mut Store, baselines: &[Vec<ScoredMutant>]) -> Result<(ReportBundle, usize)> {
    let rows = reportable_rows(store)?;
    let bundle = render_report(store.id(), &rows, baselines)?;
    let mut changed = 0;
    for (rel, text) in &bundle.files {
        if store.write_report_file(rel, text.as_bytes())? {
            changed += 1;
        }
    }
    store.advance(Phase::Reported)?;
    Ok((bundle, changed))
}

struct Test {
    name: &'static str,
    dimension: &'static str,
    outcome: std::result::Result<StatResult, String>,
}

pub fn render_report(title: &str, rows: &[ScoredMutant], baselines: &[Vec<ScoredMutant>]) -> Result<ReportBundle> {
    let mut files = BTreeMap::new();
    let complexity = detection_rates(rows, Dimension::Complexity)?;
    let types = detection_rates(rows, Dimension::MutationType)?;
    let location = detection_rates(rows, Dimension::Location)?;

    let mut tests = Vec::new();
    for (b, dim) in [(&complexity, "complexity"), (&types, "mutation_type"), (&location, "location")] {
        tests.push(Test {
            name: "chi_square",
            dimension: dim,
            outcome: chi_square(&b.table()).map_err(|e| e.to_string()),
        });
    }
    let loc_pos: Vec<f64> = rows.iter().filter(|r| r.is_positive()).map(|r| r.loc as f64).collect();
    let loc_neg: Vec<f64> = rows.iter().filter(|r| !r.is_positive()).map(|r| r.loc as f64).collect();
    tests.push(Test {
        name: "mann_whitney_u",
        dimension: "loc_positive_vs_negative",
        outcome: mann_whitney_u(&loc_pos, &loc_neg).map_err(|e| e.to_string()),
    });

    let mut models: Vec<(String, &[ScoredMutant])> = Vec::new();
    for (i, b) in baselines.iter().enumerate() {
        models.push((model_name(b, &format!("baseline{}", i + 1)), b.as_slice()));
    }
    models.push((model_name(rows, "campaign"), rows));

    files.insert("tables/complexity.csv".into(), breakdown_csv(&complexity));
    files.insert("tables/mutation_type.csv".into(), breakdown_csv(&types));
    files.insert("tables/location.csv".into(), breakdown_csv(&location));
    files.insert("tables/program.csv".into(), program_csv(rows));
    files.insert("tables/model_comparison.csv".into(), comparison_csv(&models)?);
    files.insert("tables/tests.csv".into(), tests_csv(&tests));
    files.insert("figures/programs.json".into(), to_json(&programs_figure(rows)));
    files.insert("figures/complexity.json".into(), to_json(&breakdown_figure("complexity", &complexity)));
    files.insert(
        "figures/mutation_type_by_complexity.json".into(),
        to_json(&by_complexity_figure(rows, Dimension::MutationType)?),
    );
    files.insert(
        "figures/location_by_complexity.json".into(),
        to_json(&by_complexity_figure(rows, Dimension::Location)?),
    );
    let mut jsonl = String::new();
    for r in rows {
        jsonl.push_str(&serde_json::to_string(r).expect("row serializes"));
        jsonl.push('\n');
    }
    files.insert("rows.jsonl".into(), jsonl);
    files.insert(
        "report.md".into(),
        markdown(title, rows, &[&complexity, &types, &location], &tests, &models, &loc_pos, &loc_neg)?,
    );
    Ok(ReportBundle { files })
}

fn model_name(rows: &[ScoredMutant], fallback: &str) -> String {
    rows.first()
        .map(|r| r.model_id.clone())
        .filter(|m| !m.is_empty())
        .unwrap_or_else(|| fallback.to_string())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("figure serializes");
    s.push('\n');
    s
}

fn breakdown_csv(b: &RateBreakdown) -> String {
    let mut out = format!("{},positive,negative,total,rate\n", b.dimension.as_str());
    for g in b.groups.iter().chain(std::iter::once(&b.overall)) {
        let _ = writeln!(out, "{},{},{},{},{}", g.group, g.positives, g.negatives(), g.total, g.percent());
    }
    out
}

fn program_csv(rows: &[ScoredMutant]) -> String {
    let mut per: BTreeMap<&str, (ComplexityCategory, usize, u64, u64)> = BTreeMap::new();
    for r in rows {
        let e = per.entry(&r.program_id).or_insert((r.complexity, r.loc, 0, 0));
        e.2 += u64::from(r.is_positive());
        e.3 += 1;
    }
    let mut out = String::from("program,complexity,loc,positive,negative,total,rate\n");
    for (p, (c, loc, pos, total)) in per {
        let _ = writeln!(out, "{p},{c},{loc},{pos},{},{total},{}", total - pos, format_percent(pos, total));
    }
    out
}

fn type_rates(rows: &[ScoredMutant]) -> Vec<GroupRate> {
    let mut out: Vec<GroupRate> = MutationType::ALL
        .iter()
        .map(|t| {
            let of_type = rows.iter().filter(|r| r.mutation_type == *t);
            GroupRate {
                group: t.as_str().into(),
                positives: of_type.clone().filter(|r| r.is_positive()).count() as u64,
                total: of_type.count() as u64,
            }
        })
        .collect();
    out.push(GroupRate {
        group: "Overall".into(),
        positives: rows.iter().filter(|r| r.is_positive()).count() as u64,
        total: rows.len() as u64,
    });
    out
}

fn comparison_rows(models: &[(String, &[ScoredMutant])]) -> Vec<Vec<String>> {
    let rates: Vec<Vec<GroupRate>> = models.iter().map(|(_, r)| type_rates(r)).collect();
    let mut out = Vec::new();
    for i in 0..rates[0].len() {
        let mut line = vec![rates[0][i].group.clone()];
        for m in &rates {
            line.push(m[i].percent());
        }
        if rates.len() > 1 {
            let (a, b) = (&rates[0][i], &rates[rates.len() - 1][i]);
            line.push(format_pp(a.positives, a.total, b.positives, b.total));
        }
        out.push(line);
    }
    out
}

fn comparison_header(models: &[(String, &[ScoredMutant])]) -> Vec<String> {
    let mut h = vec!["mutation_type".to_string()];
    h.extend(models.iter().map(|(m, _)| m.clone()));
    if models.len() > 1 {
        h.push("improvement".into());
    }
    h
}

fn comparison_csv(models: &[(String, &[ScoredMutant])]) -> Result<String> {
    let mut out = comparison_header(models).join(",");
    out.push('\n');
    for line in comparison_rows(models) {
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn tests_csv(tests: &[Test]) -> String {
    let mut out = String::from("test,dimension,statistic,df,p_value,effect_size,effect_kind,n,note\n");
    for t in tests {
        match &t.outcome {
            Ok(r) => {
                let (es, kind) = match &r.effect_size {
                    Some(e) => (format!("{:.6}", e.value), format!("{:?}", e.kind)),
                    None => (String::new(), String::new()),
                };
                let df = r.degrees_of_freedom.map(|d| d.to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{df},{:.6e},{es},{kind},{},",
                    t.name, t.dimension, r.statistic, r.p_value, r.n
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{},{},,,,,,,not computable: {}", t.name, t.dimension, e.replace(',', ";"));
            }
        }
    }
    out
}

fn programs_figure(rows: &[ScoredMutant]) -> serde_json::Value {
    let mut per: BTreeMap<&str, (ComplexityCategory, u64, u64)> = BTreeMap::new();
    for r in rows {
        let e = per.entry(&r.program_id).or_insert((r.complexity, 0, 0));
        if r.is_positive() {
            e.1 += 1;
        } else {
            e.2 += 1;
        }
    }
    let mut order: Vec<(&str, (ComplexityCategory, u64, u64))> = per.into_iter().collect();
    order.sort_by_key(|(id, (c, _, _))| (*c, id.to_string()));
    json!({
        "figure": "detections per program",
        "x": order.iter().map(|(id, _)| id).collect::<Vec<_>>(),
        "complexity": order.iter().map(|(_, v)| v.0.as_str()).collect::<Vec<_>>(),
        "positive": order.iter().map(|(_, v)| v.1).collect::<Vec<_>>(),
        "negative": order.iter().map(|(_, v)| v.2).collect::<Vec<_>>(),
    })
}

fn breakdown_figure(name: &str, b: &RateBreakdown) -> serde_json::Value {
    json!({
        "figure": format!("detections by {name}"),
        "x": b.groups.iter().map(|g| &g.group).collect::<Vec<_>>(),
        "positive": b.groups.iter().map(|g| g.positives).collect::<Vec<_>>(),
        "negative": b.groups.iter().map(|g| g.negatives()).collect::<Vec<_>>(),
    })
}

fn by_complexity_figure(rows: &[ScoredMutant], dim: Dimension) -> Result<serde_json::Value> {
    let mut groups = Vec::new();
    for c in ComplexityCategory::ALL {
        let subset: Vec<ScoredMutant> = rows.iter().filter(|r| r.complexity == c).cloned().collect();
        if subset.is_empty() {
            continue;
        }
        let labels: Vec<&str> = match dim {
            Dimension::MutationType => MutationType::ALL.iter().map(|t| t.as_str()).collect(),
            _ => LocationBucket::ALL.iter().map(|b| b.as_str()).collect(),
        };
        let b = detection_rates(&subset, dim)?;
        let count = |name: &str, pos: bool| {
            b.group(name)
                .map(|g| if pos { g.positives } else { g.negatives() })
                .unwrap_or(0)
        };
        groups.push(json!({
            "complexity": c.as_str(),
            "x": labels,
            "positive": labels.iter().map(|l| count(l, true)).collect::<Vec<_>>(),
            "negative": labels.iter().map(|l| count(l, false)).collect::<Vec<_>>(),
        }));
    }
    Ok(json!({
        "figure": format!("detections by {} within complexity", dim.as_str()),
        "groups": groups,
    }))
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        "p < 0.001".into()
    } else {
        format!("p = {p:.3}")
    }
}

fn describe(t: &Test) -> String {
    match &t.outcome {
        Ok(r) if t.name == "chi_square" => {
            let v = r.effect_size.as_ref().map(|e| format!(", Cramér's V = {:.3}", e.value)).unwrap_or_default();
            format!(
                "χ²({}) = {:.2}, {}{v}, n = {}.",
                r.degrees_of_freedom.unwrap_or(0),
                r.statistic,
                fmt_p(r.p_value),
                r.n
            )
        }
        Ok(r) => {
            let es = r
                .effect_size
                .as_ref()
                .map(|e| format!(", rank-biserial r = {:.3}", e.value))
                .unwrap_or_default();
            format!("Mann-Whitney U = {}, {} (two-sided){es}, n = {}.", trim_float(r.statistic), fmt_p(r.p_value), r.n)
        }
        Err(e) => format!("{} not computable: {e}.", if t.name == "chi_square" { "χ²" } else { "Mann-Whitney U" }),
    }
}

fn trim_float(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x}")
    }
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn md_table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}|", header.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
}

fn breakdown_md(out: &mut String, heading: &str, b: &RateBreakdown, test: &Test) {
    let _ = writeln!(out, "## Detection by {heading}\n");
    let header: Vec<String> = [heading, "Positive", "Negative", "Total", "Rate"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = b
        .groups
        .iter()
        .chain(std::iter::once(&b.overall))
        .map(|g| vec![g.group.clone(), g.positives.to_string(), g.negatives().to_string(), g.total.to_string(), g.percent()])
        .collect();
    md_table(out, &header, &rows);
    let _ = writeln!(out, "\n{}\n", describe(test));
}

fn markdown(
    title: &str,
    rows: &[ScoredMutant],
    breakdowns: &[&RateBreakdown; 3],
    tests: &[Test],
    models: &[(String, &[ScoredMutant])],
    loc_pos: &[f64],
    loc_neg: &[f64],
) -> Result<String> {
    let mut out = String::new();
    let positives = rows.iter().filter(|r| r.is_positive()).count() as u64;
    let programs: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.program_id.as_str()).collect();
    let _ = writeln!(out, "# Summary evaluation report: {title}\n");
    let _ = writeln!(
        out,
        "Model `{}`. {} programs, {} scored mutants, {} detected ({}).\n",
        models.last().map(|m| m.0.as_str()).unwrap_or(""),
        programs.len(),
        rows.len(),
        positives,
        format_percent(positives, rows.len() as u64)
    );
    breakdown_md(&mut out, "complexity", breakdowns[0], &tests[0]);
    breakdown_md(&mut out, "mutation type", breakdowns[1], &tests[1]);
    breakdown_md(&mut out, "location", breakdowns[2], &tests[2]);

    let _ = writeln!(out, "## Program size\n");
    let fmt_med = |v: &[f64]| median(v).map(trim_float).unwrap_or_else(|| "n/a".into());
    let _ = writeln!(
        out,
        "Median LOC of positive cases {}, of negative cases {}. {}\n",
        fmt_med(loc_pos),
        fmt_med(loc_neg),
        describe(&tests[3])
    );

    let _ = writeln!(out, "## Model comparison\n");
    let header: Vec<String> = comparison_header(models)
        .into_iter()
        .enumerate()
        .map(|(i, h)| match (i, h.as_str()) {
            (0, _) => "Mutation Type".to_string(),
            (_, "improvement") => "Improvement".to_string(),
            _ => h,
        })
        .collect();
    md_table(&mut out, &header, &comparison_rows(models));
    out.push('\n');

    let _ = writeln!(out, "## Failure modes\n");
    let negatives: Vec<&ScoredMutant> = rows.iter().filter(|r| r.label == Label::Negative).collect();
    if negatives.is_empty() {
        let _ = writeln!(out, "No negative verdicts.\n");
    } else {
        let n = negatives.len() as u64;
        let mut table = Vec::new();
        for mode in FailureMode::ALL {
            let k = negatives.iter().filter(|r| r.failure_mode == Some(mode)).count() as u64;
            table.push(vec![mode.as_str().to_string(), k.to_string(), format_percent(k, n)]);
        }
        let untagged = negatives.iter().filter(|r| r.failure_mode.is_none()).count() as u64;
        table.push(vec!["Untagged".into(), untagged.to_string(), format_percent(untagged, n)]);
        md_table(&mut out, &["Failure mode".into(), "Count".into(), "Share of negatives".into()], &table);
        out.push('\n');
    }

    let _ = writeln!(out, "## Recognized as bug\n");
    let bugs = rows.iter().filter(|r| r.is_positive() && r.recognized_as_bug).count() as u64;
    if positives == 0 {
        let _ = writeln!(out, "No positive verdicts.");
    } else {
        let _ = writeln!(
            out,
            "{bugs} of {positives} detected mutations ({}) were described as an error.",
            format_percent(bugs, positives)
        );
    }
    Ok(out)
}
