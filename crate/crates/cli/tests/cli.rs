use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_calib-atlas"))
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn audit(config: &Path, out: &Path) -> (i32, Option<Value>) {
    let o = run(bin().arg("audit").arg("--config").arg(config).arg("--out").arg(out));
    let report = std::fs::read_to_string(out.join("report.json")).ok().map(|t| serde_json::from_str(&t).unwrap());
    (o.status.code().unwrap(), report)
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn half_predictor_strict_audit_fails_only_on_vanilla() {
    let out = tempfile::tempdir().unwrap();
    let (code, report) = audit(&fixture("half_predictor/strict.json"), out.path());
    let report = report.unwrap();
    assert_eq!(code, 1);
    assert_eq!(report["metrics"]["decision_squared"]["verdict"], "pass");
    assert_eq!(report["metrics"]["vanilla"]["verdict"], "fail");
    assert!((f(&report["metrics"]["vanilla"]["aggregate"]) - 0.3).abs() <= 1e-12);
}

#[test]
fn calibrated_fixture_passes() {
    let out = tempfile::tempdir().unwrap();
    let (code, report) = audit(&fixture("calibrated_three/config.json"), out.path());
    assert_eq!(code, 0);
    let report = report.unwrap();
    assert_eq!(report["failed"], false);
    for m in report["metrics"].as_object().unwrap().values() {
        assert_eq!(m["verdict"], "pass");
    }
}

#[test]
fn report_provenance_hashes_inputs() {
    let out = tempfile::tempdir().unwrap();
    let config = fixture("half_predictor/config.json");
    let (_, report) = audit(&config, out.path());
    let report = report.unwrap();
    let hash = |p: &Path| calib_atlas_cli::report::sha256_hex(&std::fs::read(p).unwrap());
    assert_eq!(report["provenance"]["config_sha256"], hash(&config));
    assert_eq!(report["provenance"]["input_sha256"], hash(&fixture("half_predictor/data.csv")));
    assert_eq!(report["provenance"]["outcome_labels"], serde_json::json!(["0", "1"]));
}

#[test]
fn undeclared_loss_is_rejected_before_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    // The input does not exist: a config error must come first.
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"input": {"path": "missing.csv", "format": "csv"},
            "outcome_space": {"labels": ["0", "1"]},
            "predictions": [{"name": "f", "kind": "dist"}],
            "metrics": [{"name": "d", "kind": "decision", "prediction": "f", "loss": "nope", "tolerance": 0.1}]}"#,
    )
    .unwrap();
    let o = run(bin().arg("audit").arg("--config").arg(&config).arg("--out").arg(dir.path().join("out")));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("configuration error") && err.contains("nope"), "{err}");
    assert!(!dir.path().join("out/report.json").exists());
}

#[test]
fn bad_row_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "x_id,y,p_0,p_1\na,0,0.5,0.5\nb,1,0.5,0.6\n").unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"input": {"path": "d.csv", "format": "csv"},
            "outcome_space": {"labels": ["0", "1"]},
            "predictions": [{"name": "f", "kind": "dist"}],
            "properties": [{"name": "full", "kind": "full_distribution"}],
            "metrics": [{"name": "v", "kind": "distribution", "prediction": "f", "property": "full", "tolerance": 0.1}]}"#,
    )
    .unwrap();
    let o = run(bin().arg("audit").arg("--config").arg(&config).arg("--out").arg(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("d.csv:3:"));
}

fn plot(report: &Path, out: &Path) {
    let o = run(bin().arg("plot").arg("--report").arg(report).arg("--out").arg(out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|x| x.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn binary_vanilla_plot_has_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("d.csv"),
        "x_id,y,p\na,0,0.2\nb,1,0.2\nc,1,0.5\nd,0,0.5\ne,1,0.9\n",
    )
    .unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"input": {"path": "d.csv", "format": "csv"},
            "outcome_space": {"labels": ["0", "1"], "embedding": [0, 1]},
            "predictions": [{"name": "p", "kind": "real"}],
            "metrics": [{"name": "vanilla", "kind": "vanilla", "prediction": "p", "tolerance": 1}]}"#,
    )
    .unwrap();
    let (code, _) = audit(&config, dir.path());
    assert_eq!(code, 0);
    plot(&dir.path().join("report.json"), &dir.path().join("plots"));
    let rows = read_rows(&dir.path().join("plots/vanilla.reliability.csv"));
    assert_eq!(rows[0], ["level", "weight", "observed", "predicted", "residual"]);
    assert_eq!(rows.len(), 4);
    let observed: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(observed, [0.5, 0.5, 1.0]);
    assert!(!dir.path().join("plots/simplex.csv").exists());
}

#[test]
fn three_outcome_mode_audit_plots_the_simplex() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("audit");
    let (_, report) = audit(&fixture("calibrated_three/config.json"), &out);
    let report = report.unwrap();
    plot(&out.join("report.json"), &dir.path().join("plots"));
    let rows = read_rows(&dir.path().join("plots/simplex.csv"));
    assert_eq!(rows[0], ["metric", "level", "predicted_0", "predicted_1", "predicted_2", "observed_0", "observed_1", "observed_2"]);
    let mode_levels = report["metrics"]["distribution_mode"]["levels"].as_array().unwrap().len();
    let mode_rows = rows[1..].iter().filter(|r| r[0] == "distribution_mode").count();
    assert!(mode_levels > 0);
    assert_eq!(mode_rows, mode_levels);
    for r in &rows[1..] {
        let total: f64 = r[2..5].iter().map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn empty_level_map_plots_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let report = serde_json::json!({
        "provenance": {"outcome_labels": ["a", "b", "c"]},
        "metrics": {"m": {"kind": "distribution", "levels": []}},
    });
    let path = dir.path().join("report.json");
    std::fs::write(&path, report.to_string()).unwrap();
    plot(&path, &dir.path().join("plots"));
    assert_eq!(read_rows(&dir.path().join("plots/m.reliability.csv")).len(), 1);
    assert_eq!(read_rows(&dir.path().join("plots/simplex.csv")).len(), 1);
}

fn verify(args: &[&str], out: &Path) -> (i32, Value) {
    let o = run(bin().arg("verify").args(args).arg("--out").arg(out));
    let text = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    (o.status.code().unwrap(), serde_json::from_str(&text).unwrap())
}

#[test]
fn counterexample_suite_lists_the_constructions() {
    let dir = tempfile::tempdir().unwrap();
    let (code, manifest) = verify(&["counterexamples"], dir.path());
    assert_eq!(code, 0);
    let names: Vec<&str> = manifest["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for prefix in ["half_predictor", "mean_variance", "cost_parity"] {
        assert!(names.iter().any(|n| n.starts_with(prefix)), "{prefix} missing from {names:?}");
    }
}

#[test]
fn tampered_bound_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let (code, manifest) = verify(&["edges", "--seed", "3", "--tamper-bound-offset", "-0.5"], dir.path());
    assert_eq!(code, 1);
    let failing: Vec<&Value> =
        manifest["checks"].as_array().unwrap().iter().filter(|c| c["verdict"] == "fail").collect();
    assert!(!failing.is_empty());
    assert!(failing.iter().any(|c| c["min_slack"].as_f64().is_some_and(|s| s < 0.0)));
    assert_eq!(f(&manifest["provenance"]["bound_offset"]), -0.5);
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = run(bin().args(["verify", "everything", "--out", "/tmp/unused"]));
    assert_eq!(o.status.code(), Some(2));
}
