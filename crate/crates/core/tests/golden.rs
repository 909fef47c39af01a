//! Conformance against dumps written independently by
//! `fixtures/make_golden.py` (plain `struct.pack`), with metrics computed there
//! by brute force.

mod common;

use common::fixture;
use oodbench::dataio::{decode_dump, encode_dump, read_dump, DUMP_HEADER_LEN};
use oodbench::harness::{cmd_evaluate, EvaluateOpts, RunContext};
use oodbench::supervisors::SupervisorKind;
use serde_json::Value;

fn expected() -> Value {
    let text = std::fs::read_to_string(fixture("golden_expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn python_dumps_decode_and_reencode_byte_identically() {
    for name in ["golden_inliers.ooda", "golden_outliers.ooda"] {
        let bytes = std::fs::read(fixture(name)).unwrap();
        let records = decode_dump(&bytes).unwrap();
        assert_eq!(encode_dump(&records).unwrap(), bytes, "{name}");
    }
}

#[test]
fn python_dump_header_and_first_record() {
    let bytes = std::fs::read(fixture("golden_inliers.ooda")).unwrap();
    assert_eq!(&bytes[..4], b"OODA");
    let records = read_dump(fixture("golden_inliers.ooda")).unwrap();
    assert_eq!(records.len(), 40);
    assert_eq!(bytes.len(), DUMP_HEADER_LEN + 40 * (4 + 4 * (3 + 2)));

    let exp = &expected()["first_inlier"];
    let r = &records[0];
    assert_eq!(r.label as i64, exp["label"].as_i64().unwrap());
    let as_vec = |v: &Value| -> Vec<f64> {
        v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
    };
    assert_eq!(r.logits, as_vec(&exp["logits"]));
    assert_eq!(r.features.as_deref().unwrap(), as_vec(&exp["features"]).as_slice());

    let outliers = read_dump(fixture("golden_outliers.ooda")).unwrap();
    assert_eq!(outliers.len(), 30);
    assert!(outliers.iter().all(|r| r.label == -1));
}

fn run_golden_evaluate(dir: &std::path::Path) -> oodbench::metrics::EvaluationReport {
    let mut ctx = RunContext::new(dir, 0).unwrap();
    let opts = EvaluateOpts {
        checkpoint: None,
        train_data: None,
        inliers: fixture("golden_inliers.ooda"),
        outliers: fixture("golden_outliers.ooda"),
        ood_name: None,
        supervisor: SupervisorKind::Baseline,
        config: None,
    };
    cmd_evaluate(&mut ctx, &opts).unwrap()
}

#[test]
fn baseline_metrics_match_python_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_golden_evaluate(dir.path());
    let exp = expected();
    let close = |got: f64, key: &str| {
        let want = exp[key].as_f64().unwrap();
        assert!((got - want).abs() <= 1e-12, "{key}: {got} vs {want}");
    };
    close(report.test_accuracy, "test_accuracy");
    close(report.auroc, "auroc");
    close(report.fpr_at_95_tpr, "fpr_at_95_tpr");
    close(report.cbpl, "cbpl");
    close(report.cov10, "cov10");
    assert_eq!(report.n_inliers as u64, exp["n_inliers"].as_u64().unwrap());
    assert_eq!(report.n_outliers as u64, exp["n_outliers"].as_u64().unwrap());
}

#[test]
fn evaluate_report_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    run_golden_evaluate(dir.path());
    let got = std::fs::read_to_string(
        dir.path()
            .join("reports/golden_inliers_baseline_golden_outliers.json"),
    )
    .unwrap();
    let want = std::fs::read_to_string(fixture("golden_report.json")).unwrap();
    assert_eq!(got, want);
}
