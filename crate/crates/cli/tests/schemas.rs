use std::path::Path;
use std::process::Command;

use calib_atlas_cli::{CONFIG_SCHEMA, MANIFEST_SCHEMA, REPORT_SCHEMA};
use jsonschema::JSONSchema;
use serde_json::Value;

fn compile(text: &str) -> JSONSchema {
    let schema: Value = serde_json::from_str(text).unwrap();
    JSONSchema::compile(&schema).unwrap()
}

fn assert_valid(schema: &JSONSchema, doc: &Value, what: &str) {
    if let Err(errors) = schema.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{what}: {msgs:?}");
    }
}

fn fixtures() -> Vec<std::path::PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut out = Vec::new();
    for dir in std::fs::read_dir(root).unwrap() {
        for f in std::fs::read_dir(dir.unwrap().path()).unwrap() {
            let p = f.unwrap().path();
            if p.extension().is_some_and(|e| e == "json") {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn fixture_configs_and_reports_match_their_schemas() {
    let config_schema = compile(CONFIG_SCHEMA);
    let report_schema = compile(REPORT_SCHEMA);
    for config in fixtures() {
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
        assert_valid(&config_schema, &doc, &config.display().to_string());
        let out = tempfile::tempdir().unwrap();
        Command::new(env!("CARGO_BIN_EXE_calib-atlas"))
            .arg("audit")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(out.path())
            .output()
            .unwrap();
        let report: Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
        assert_valid(&report_schema, &report, "report");
    }
}

#[test]
fn manifest_matches_its_schema() {
    let manifest = calib_atlas_cli::verify_runner::run_verify(
        calib_atlas_cli::verify_runner::Suite::Counterexamples,
        Default::default(),
    )
    .manifest;
    assert_valid(&compile(MANIFEST_SCHEMA), &manifest, "manifest");
}

#[test]
fn schema_rejects_unknown_metric_kinds() {
    let doc = serde_json::json!({
        "input": {"path": "d.csv", "format": "csv"},
        "outcome_space": {"labels": ["0", "1"]},
        "predictions": [],
        "metrics": [{"name": "m", "kind": "magic", "tolerance": 0.1}],
    });
    assert!(!compile(CONFIG_SCHEMA).is_valid(&doc));
}

#[test]
fn guide_config_matches_the_strict_fixture() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let guide = std::fs::read_to_string(root.join("../../book/src/cli.md")).unwrap();
    let block = guide.split("```json\n").nth(1).unwrap().split("```").next().unwrap();
    let shown = calib_atlas_cli::config::parse_config(block).unwrap();
    let fixture = calib_atlas_cli::config::load_config(&root.join("fixtures/half_predictor/strict.json")).unwrap();
    assert_eq!(serde_json::to_value(&shown).unwrap(), serde_json::to_value(&fixture).unwrap());
}
