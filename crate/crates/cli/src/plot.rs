//! Plain CSV exports of a report for external plotting.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::report::fmt17;

fn cell(v: Option<&Value>) -> String {
    match v {
        Some(Value::Number(n)) => n.as_f64().map(fmt17).unwrap_or_default(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Array(items)) => items.iter().map(|x| cell(Some(x))).collect::<Vec<_>>().join("|"),
        _ => String::new(),
    }
}

fn dist(v: Option<&Value>, n: usize) -> Option<Vec<String>> {
    let items = v?.as_array()?;
    (items.len() == n).then(|| items.iter().map(|x| cell(Some(x))).collect())
}

fn writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e.into()))
}

fn put(w: &mut csv::Writer<std::fs::File>, path: &Path, row: &[String]) -> CliResult<()> {
    w.write_record(row).map_err(|e| CliError::io(path, e.into()))
}

/// Writes `<metric>.reliability.csv` for every metric and, when the outcome
/// space has three labels and the report holds a distribution audit,
/// `simplex.csv` pairing the average predicted and pooled observed
/// distribution of each level. Returns the written paths.
pub fn emit_plot_data(report: &Value, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let labels: Vec<String> = report["provenance"]["outcome_labels"]
        .as_array()
        .map(|a| a.iter().filter_map(|l| l.as_str().map(str::to_string)).collect())
        .unwrap_or_default();
    let empty = serde_json::Map::new();
    let metrics = report["metrics"].as_object().unwrap_or(&empty);
    let mut written = Vec::new();

    for (name, metric) in metrics {
        let path = out_dir.join(format!("{name}.reliability.csv"));
        let mut w = writer(&path)?;
        put(&mut w, &path, &["level", "weight", "observed", "predicted", "residual"].map(String::from))?;
        for level in metric["levels"].as_array().into_iter().flatten() {
            let row = ["level", "weight", "observed", "predicted", "residual"].map(|k| cell(level.get(k)));
            put(&mut w, &path, &row)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }

    let distributional = metrics.values().any(|m| m["kind"] == "distribution");
    if labels.len() == 3 && distributional {
        let path = out_dir.join("simplex.csv");
        let mut w = writer(&path)?;
        let mut header = vec!["metric".to_string(), "level".to_string()];
        header.extend(labels.iter().map(|l| format!("predicted_{l}")));
        header.extend(labels.iter().map(|l| format!("observed_{l}")));
        put(&mut w, &path, &header)?;
        for (name, metric) in metrics {
            for level in metric["levels"].as_array().into_iter().flatten() {
                if let (Some(p), Some(o)) = (dist(level.get("predicted_dist"), 3), dist(level.get("observed_dist"), 3)) {
                    let mut row = vec![name.clone(), cell(level.get("level"))];
                    row.extend(p);
                    row.extend(o);
                    put(&mut w, &path, &row)?;
                }
            }
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_report(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
