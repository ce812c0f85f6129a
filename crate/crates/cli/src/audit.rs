//! Runs a configured audit and assembles the report document.

use std::path::Path;

use calib_atlas::verify::{Quantity, Scenario};
use serde_json::{json, Map, Value};

use crate::config::{load_config, resolve, AuditConfig, ResolvedAudit, ResolvedMetric};
use crate::error::{CliError, CliResult};
use crate::ingest::ingest;
use crate::report::{level_entries, level_value, num, sha256_hex};

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub report: Value,
    /// Every metric was computed and passed.
    pub passed: bool,
}

/// Loads the configuration at `config_path`, resolves it, ingests the input
/// and evaluates every metric.
pub fn run_audit(config_path: &Path) -> CliResult<AuditOutcome> {
    let bytes = std::fs::read(config_path).map_err(|e| CliError::io(config_path, e))?;
    let config = load_config(config_path)?;
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    run_audit_config(&config, base, &bytes)
}

/// [`run_audit`] on an already parsed configuration; `config_bytes` only
/// feeds the provenance hash.
pub fn run_audit_config(config: &AuditConfig, base_dir: &Path, config_bytes: &[u8]) -> CliResult<AuditOutcome> {
    let resolved = resolve(config)?;
    let input = base_dir.join(&config.input.path);
    let input_bytes = std::fs::read(&input).map_err(|e| CliError::io(&input, e))?;
    let ingested = ingest(&input, config.input.format, &resolved.space, &config.predictions, &config.groups)?;
    let scenario = scenario(&resolved, ingested.dataset);

    let mut metrics = Map::new();
    let mut skipped = Map::new();
    let mut passed = true;
    let mut failed = false;
    for m in &resolved.metrics {
        match evaluate_metric(&scenario, m) {
            Ok((entry, skipped_levels)) => {
                passed &= entry["verdict"] == "pass";
                if !skipped_levels.is_empty() {
                    skipped.insert(m.name.clone(), Value::Array(skipped_levels));
                }
                metrics.insert(m.name.clone(), entry);
            }
            Err(e) => {
                log::error!("metric `{}`: {e}", m.name);
                passed = false;
                failed = true;
                metrics.insert(
                    m.name.clone(),
                    json!({
                        "kind": m.kind.token(),
                        "quantity": m.quantity.to_string(),
                        "levels": [],
                        "aggregate": null,
                        "tolerance": num(m.tolerance),
                        "verdict": "failed",
                        "error": format!("metric `{}`: {e}", m.name),
                    }),
                );
            }
        }
    }
    let report = json!({
        "provenance": {
            "tool": "calib-atlas",
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": sha256_hex(config_bytes),
            "input_sha256": sha256_hex(&input_bytes),
            "seed": config.seed,
            "outcome_labels": resolved.space.labels(),
        },
        "metrics": metrics,
        "skipped_levels": skipped,
        "warnings": ingested.warnings,
        "failed": failed,
    });
    Ok(AuditOutcome { report, passed })
}

fn scenario(resolved: &ResolvedAudit, dataset: calib_atlas::outcomes::PredictionDataset) -> Scenario {
    let mut scn = Scenario::new("audit", dataset);
    for (name, p) in &resolved.properties {
        scn = scn.with_property(name.clone(), p.clone());
    }
    for (name, l) in &resolved.losses {
        scn = scn.with_loss(name.clone(), l.clone());
    }
    scn
}

fn evaluate_metric(scn: &Scenario, m: &ResolvedMetric) -> calib_atlas::error::Result<(Value, Vec<Value>)> {
    let value = scn.evaluate(&m.quantity)?;
    let mut levels = Vec::new();
    let mut skipped = Vec::new();
    let mut collect = |map: Option<calib_atlas::calib_metrics::LevelResidualMap>, subset: Option<&str>| {
        if let Some(map) = map {
            levels.extend(level_entries(&map, subset));
            skipped.extend(map.skipped.iter().map(level_value));
        }
    };
    match &m.quantity {
        Quantity::Group { group, inner } => {
            let inside = scn.restricted(|r| r.groups.get(group) == Some(&true))?;
            collect(inside.level_map(inner)?, Some("inside"));
            if let Ok(rest) = scn.restricted(|r| r.groups.get(group) == Some(&false)) {
                collect(rest.level_map(inner)?, Some("complement"));
            }
        }
        q => collect(scn.level_map(q)?, None),
    }
    let pass = value.is_finite()
        && match m.expect {
            Some(e) => (value - e).abs() <= m.tolerance,
            None => value <= m.tolerance,
        };
    let mut entry = Map::new();
    entry.insert("kind".into(), Value::String(m.kind.token().into()));
    entry.insert("quantity".into(), Value::String(m.quantity.to_string()));
    entry.insert("levels".into(), Value::Array(levels));
    entry.insert("aggregate".into(), num(value));
    entry.insert("tolerance".into(), num(m.tolerance));
    if let Some(e) = m.expect {
        entry.insert("expected".into(), num(e));
    }
    entry.insert("verdict".into(), Value::String(if pass { "pass" } else { "fail" }.into()));
    Ok((Value::Object(entry), skipped))
}
