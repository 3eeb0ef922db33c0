mod common;

use sumtrace::analytics::stats::{chi_square, cohens_kappa, ContingencyTable, Confusion};
use sumtrace::analytics::{
    detection_rates, format_pp, load_rows, render_report, reportable_rows, scored_rows, AnalyticsError, Dimension,
    ScoredMutant,
};
use sumtrace::store::{InitOptions, Store};

fn lbpp(model: &str) -> Vec<ScoredMutant> {
    load_rows(&common::lbpp_dir().join(format!("{model}.jsonl"))).unwrap()
}

fn percents(rows: &[ScoredMutant]) -> Vec<(String, String)> {
    let b = detection_rates(rows, Dimension::MutationType).unwrap();
    b.groups
        .iter()
        .chain(std::iter::once(&b.overall))
        .map(|g| (g.group.clone(), g.percent()))
        .collect()
}

fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
    v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

#[test]
fn lbpp_gpt4_rates_by_type() {
    let rows = lbpp("gpt-4");
    assert_eq!(rows.len(), 150);
    assert_eq!(
        percents(&rows),
        pairs(&[("Statement", "46.0%"), ("Decision", "44.0%"), ("Value", "58.0%"), ("Overall", "49.3%")])
    );
    let overall = detection_rates(&rows, Dimension::MutationType).unwrap().overall;
    assert_eq!((overall.positives, overall.total), (74, 150));
}

#[test]
fn lbpp_gpt52_rates_by_type() {
    let rows = lbpp("gpt-5.2");
    assert_eq!(
        percents(&rows),
        pairs(&[("Statement", "76.0%"), ("Decision", "88.0%"), ("Value", "92.0%"), ("Overall", "85.3%")])
    );
    let by_type = detection_rates(&rows, Dimension::MutationType).unwrap();
    let missed: Vec<u64> = by_type.groups.iter().map(|g| g.negatives()).collect();
    assert_eq!(missed, vec![12, 6, 4]);
    assert_eq!(by_type.overall.negatives(), 22);
}

#[test]
fn lbpp_single_group_dimension_equals_overall() {
    let rows = lbpp("gpt-4");
    let b = detection_rates(&rows, Dimension::Complexity).unwrap();
    assert_eq!(b.groups.len(), 1);
    assert_eq!(b.groups[0].positives, b.overall.positives);
    assert_eq!(b.groups[0].total, b.overall.total);
}

#[test]
fn lbpp_improvement_column() {
    assert_eq!(format_pp(74, 150, 128, 150), "+36.0pp");
    assert_eq!(format_pp(23, 50, 38, 50), "+30.0pp");
    assert_eq!(format_pp(22, 50, 44, 50), "+44.0pp");
    assert_eq!(format_pp(29, 50, 46, 50), "+34.0pp");
    assert_eq!(format_pp(128, 150, 74, 150), "-36.0pp");
}

#[test]
fn lbpp_model_comparison_table() {
    let gpt4 = lbpp("gpt-4");
    let gpt52 = lbpp("gpt-5.2");
    let bundle = render_report("lbpp", &gpt52, &[gpt4]).unwrap();
    let csv = bundle.get("tables/model_comparison.csv").unwrap();
    assert_eq!(
        csv,
        "mutation_type,gpt-4-1106-preview,gpt-5.2,improvement\n\
         Statement,46.0%,76.0%,+30.0pp\n\
         Decision,44.0%,88.0%,+44.0pp\n\
         Value,58.0%,92.0%,+34.0pp\n\
         Overall,49.3%,85.3%,+36.0pp\n"
    );
    let md = bundle.get("report.md").unwrap();
    assert!(md.contains("62 of 128 detected mutations (48.4%) were described as an error."), "{md}");
}

#[test]
fn lbpp_recognized_as_bug_share_exceeds_48_percent() {
    let rows = lbpp("gpt-5.2");
    let detected: Vec<_> = rows.iter().filter(|r| r.is_positive()).collect();
    let bugs = detected.iter().filter(|r| r.recognized_as_bug).count();
    assert_eq!((bugs, detected.len()), (62, 128));
    assert!(bugs as f64 / detected.len() as f64 > 0.48);
    assert!(rows.iter().all(|r| r.is_positive() || !r.recognized_as_bug));
}

#[test]
fn lbpp_negatives_carry_a_failure_mode() {
    for model in ["gpt-4", "gpt-5.2"] {
        for r in lbpp(model) {
            assert_eq!(r.failure_mode.is_some(), !r.is_positive(), "{}", r.mutant_id);
        }
    }
}

#[test]
fn complexity_chi_square_reproduces_the_reported_statistic() {
    let table = ContingencyTable::from_counts(vec![vec![62, 19], vec![27, 54], vec![23, 58], vec![14, 67]]);
    let r = chi_square(&table).unwrap();
    assert!((r.statistic - 69.04).abs() < 0.05, "{}", r.statistic);
    assert!((r.statistic - 69.038_961_038_961_05).abs() < 1e-9);
    assert_eq!(r.degrees_of_freedom, Some(3));
    assert!(r.p_value < 0.001);
    assert!((r.effect_size.unwrap().value - 0.462).abs() < 0.005);
}

#[test]
fn kappa_on_the_reconstructed_agreement_matrix() {
    let c = Confusion::new([[120, 6], [5, 193]]);
    assert_eq!(c.total(), 324);
    assert_eq!(c.agreements(), 313);
    let k = cohens_kappa(&c).unwrap();
    assert!((k - 0.928).abs() < 0.005, "{k}");
    assert!((c.percent_agreement() * 100.0 - 96.6).abs() < 0.1);
}

#[test]
fn report_requires_every_mutant_reconciled() {
    let dir = tempfile::tempdir().unwrap();
    common::run_demo(dir.path(), Default::default()).unwrap();
    std::fs::remove_file(dir.path().join("reconciled/min_heap.val_e_1.json")).unwrap();
    let store = Store::open_read_only(dir.path()).unwrap();
    match scored_rows(&store) {
        Err(AnalyticsError::Unreconciled(ids)) => assert_eq!(ids, vec!["min_heap.val_e_1".to_string()]),
        other => panic!("expected Unreconciled, got {other:?}"),
    }
}

#[test]
fn report_refuses_before_reconciliation() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::init(dir.path(), "c1", common::demo_config(), InitOptions::default()).unwrap();
    assert!(reportable_rows(&store).is_err());
}

#[test]
fn demo_rows_round_trip_through_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    common::run_demo(dir.path(), Default::default()).unwrap();
    let store = Store::open_read_only(dir.path()).unwrap();
    let rows = scored_rows(&store).unwrap();
    let reloaded = load_rows(&dir.path().join("report/rows.jsonl")).unwrap();
    assert_eq!(rows, reloaded);
}
