//! Audit fixtures built from the library's worked scenarios: record files
//! plus configurations whose expectations restate the closed forms.

use std::path::Path;

use calib_atlas::verify::{
    cost_parity_construction, cost_parity_q, counterexample_half_predictor, counterexample_mean_variance,
    recovery_scenario, Scenario,
};
use serde_json::{json, Value};

use crate::config::{PredictionDecl, PredictionKind};
use crate::error::{CliError, CliResult};
use crate::ingest::write_csv;
use crate::report::{num, write_json};

fn decl(name: &str, kind: PredictionKind) -> PredictionDecl {
    PredictionDecl { name: name.into(), kind, columns: None }
}

fn input(file: &str) -> Value {
    json!({"path": file, "format": "csv"})
}

fn binary_space() -> Value {
    json!({"labels": ["0", "1"], "embedding": [0, 1]})
}

fn write_data(dir: &Path, file: &str, scn: &Scenario, preds: &[PredictionDecl]) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_csv(&dir.join(file), &scn.dataset, preds, &[])
}

fn half_predictor(dir: &Path) -> CliResult<()> {
    let scn = counterexample_half_predictor(0.8, 4)?;
    write_data(dir, "data.csv", &scn, &[decl("p", PredictionKind::Real), decl("f", PredictionKind::Dist)])?;
    let base = |metrics: Value| {
        json!({
            "input": input("data.csv"),
            "outcome_space": binary_space(),
            "predictions": [{"name": "p", "kind": "real"}, {"name": "f", "kind": "dist"}],
            "losses": [{"name": "squared", "kind": "squared", "grid": {"from": 0, "to": 1, "points": 101}}],
            "metrics": metrics,
        })
    };
    write_json(
        dir,
        "config.json",
        &base(json!([
            {"name": "decision_squared", "kind": "decision", "prediction": "f", "loss": "squared", "tolerance": num(1e-12)},
            {"name": "vanilla_gap", "kind": "vanilla", "prediction": "p", "tolerance": num(1e-12), "expect": num(0.3)},
        ])),
    )?;
    write_json(
        dir,
        "strict.json",
        &base(json!([
            {"name": "decision_squared", "kind": "decision", "prediction": "f", "loss": "squared", "tolerance": num(1e-9)},
            {"name": "vanilla", "kind": "vanilla", "prediction": "p", "tolerance": num(1e-3)},
        ])),
    )?;
    Ok(())
}

fn mean_variance(dir: &Path) -> CliResult<()> {
    let v = 1.25;
    let scn = counterexample_mean_variance(v, 4)?;
    write_data(dir, "data.csv", &scn, &[decl("f", PredictionKind::Real), decl("g", PredictionKind::Real)])?;
    let config = json!({
        "input": input("data.csv"),
        "outcome_space": {"labels": ["-1", "0", "1", "2"], "embedding": [-1, 0, 1, 2]},
        "predictions": [{"name": "f", "kind": "real"}, {"name": "g", "kind": "real"}],
        "properties": [{"name": "mean", "kind": "mean"}, {"name": "variance", "kind": "variance"}],
        "losses": [{"name": "squared", "kind": "squared"}],
        "tolerances": {"moment": num(1e-9)},
        "metrics": [
            {"name": "bayes_risk_estimation", "kind": "bre", "decision": "f", "risk": "g", "loss": "squared", "tolerance": "moment"},
            {"name": "variance_at_v", "kind": "gamma", "prediction": "g", "property": "variance", "level": num(v), "tolerance": "moment", "expect": num(1.0)},
            {"name": "variance_at_v_plus_1", "kind": "gamma", "prediction": "g", "property": "variance", "level": num(v + 1.0), "tolerance": "moment", "expect": num(1.0)},
            {"name": "mean_sup", "kind": "gamma", "prediction": "f", "property": "mean", "tolerance": "moment", "expect": num(1.0)},
            {"name": "mean_expected", "kind": "gamma", "prediction": "f", "property": "mean", "aggregation": "expected", "tolerance": "moment", "expect": num(1.0)},
        ],
    });
    write_json(dir, "config.json", &config)?;
    Ok(())
}

fn cost_parity(dir: &Path) -> CliResult<()> {
    let (c, d) = (0.6, 0.3);
    let q = cost_parity_q(c, d);
    for (tag, f) in [("f032", 0.32), ("f035", 0.35), ("f040", 0.40)] {
        let scn = cost_parity_construction(c, d, f)?;
        let data = format!("{tag}.csv");
        write_data(dir, &data, &scn, &[decl("p", PredictionKind::Real), decl("f", PredictionKind::Dist)])?;
        let gap = (1.0 - q) * (f * (1.0 - c) / (1.0 - f) - d).abs();
        let config = json!({
            "input": input(&data),
            "outcome_space": binary_space(),
            "predictions": [{"name": "p", "kind": "real"}, {"name": "f", "kind": "dist"}],
            "losses": [{"name": "simple_c", "kind": "simple", "q": num(c)}, {"name": "simple_d", "kind": "simple", "q": num(d)}],
            "tolerances": {"exact": num(1e-12)},
            "metrics": [
                {"name": "vanilla", "kind": "vanilla", "prediction": "p", "tolerance": "exact"},
                {"name": "vanilla_at_mid", "kind": "vanilla", "prediction": "p", "level": num(f), "tolerance": "exact"},
                {"name": "bayes_risk_c", "kind": "bayes_risk", "loss": "simple_c", "tolerance": "exact", "expect": num(6.0 / 35.0)},
                {"name": "bayes_risk_d", "kind": "bayes_risk", "loss": "simple_d", "tolerance": "exact", "expect": num(6.0 / 35.0)},
                {"name": "cost_gap", "kind": "cost_gap", "prediction": "f", "loss": "simple_c", "loss_b": "simple_d", "tolerance": "exact", "expect": num(gap)},
            ],
        });
        write_json(dir, &format!("config_{tag}.json"), &config)?;
    }
    Ok(())
}

fn calibrated_three(dir: &Path) -> CliResult<()> {
    let (scn, _) = recovery_scenario(0, None)?;
    write_data(dir, "data.csv", &scn, &[decl("f", PredictionKind::Dist)])?;
    let config = json!({
        "input": input("data.csv"),
        "outcome_space": {"labels": ["0", "1", "2"], "embedding": [0, 1, 2]},
        "predictions": [{"name": "f", "kind": "dist"}],
        "properties": [{"name": "full", "kind": "full_distribution"}, {"name": "mode", "kind": "mode"}],
        "losses": [{"name": "zero_one", "kind": "zero_one"}],
        "tolerances": {"exact": num(1e-9)},
        "metrics": [
            {"name": "distribution_full", "kind": "distribution", "prediction": "f", "property": "full", "tolerance": "exact"},
            {"name": "distribution_mode", "kind": "distribution", "prediction": "f", "property": "mode", "tolerance": "exact"},
            {"name": "decision_zero_one", "kind": "decision", "prediction": "f", "loss": "zero_one", "tolerance": "exact"},
        ],
    });
    write_json(dir, "config.json", &config)?;
    Ok(())
}

/// Writes every fixture directory under `root`.
pub fn write_fixtures(root: &Path) -> CliResult<()> {
    half_predictor(&root.join("half_predictor"))?;
    mean_variance(&root.join("mean_variance"))?;
    cost_parity(&root.join("cost_parity"))?;
    calibrated_three(&root.join("calibrated_three"))
}
