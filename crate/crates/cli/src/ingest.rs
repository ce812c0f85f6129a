//! CSV and JSONL record readers, and the matching writers.
//!
//! CSV rows carry `x_id`, `y`, an optional `weight` (default 1), the declared
//! prediction columns and one `g_<name>` 0/1 column per group. JSONL lines
//! carry the same keys with predictions under `pred` and groups under
//! `groups`; distributional predictions are objects keyed by outcome label.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use calib_atlas::outcomes::{OutcomeSpace, Pmf, PredictionDataset, Record};
use calib_atlas::properties::PropertyValue;
use serde_json::{Map, Value};

use crate::config::{Format, PredictionDecl, PredictionKind};
use crate::error::{CliError, CliResult};
use crate::report::{fmt17, num};

/// Largest drift of a predicted distribution's total from 1 that is repaired.
pub const RENORMALIZE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: PredictionDataset,
    pub warnings: Vec<String>,
}

struct RowBuilder<'a> {
    path: &'a Path,
    line: u64,
    space: &'a Arc<OutcomeSpace>,
    warnings: &'a mut Vec<String>,
}

impl RowBuilder<'_> {
    fn err(&self, message: impl Into<String>) -> CliError {
        CliError::Row {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn outcome(&self, label: &str) -> CliResult<usize> {
        self.space
            .index_of(label)
            .ok_or_else(|| self.err(format!("unknown outcome label `{label}`")))
    }

    fn weight(&self, w: Option<f64>) -> CliResult<f64> {
        match w {
            None => Ok(1.0),
            Some(w) if w.is_finite() && w >= 0.0 => Ok(w),
            Some(w) => Err(self.err(format!("weight {w} is negative or not finite"))),
        }
    }

    fn real(&self, name: &str, raw: &str) -> CliResult<f64> {
        raw.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(format!("`{name}` value `{raw}` is not a finite number")))
    }

    fn pmf(&mut self, name: &str, masses: Vec<f64>) -> CliResult<Pmf> {
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(self.err(format!("prediction `{name}` has a negative or non-finite mass")));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(self.err(format!("prediction `{name}` sums to {total}, not 1")));
        }
        let masses = if (total - 1.0).abs() > calib_atlas::outcomes::NORMALIZATION_TOL {
            let note = format!("{}:{}: prediction `{name}` renormalized from total {}", self.path.display(), self.line, fmt17(total));
            log::warn!("{note}");
            self.warnings.push(note);
            masses.iter().map(|m| m / total).collect()
        } else {
            masses
        };
        Pmf::new(self.space, masses).map_err(|e| self.err(format!("prediction `{name}`: {e}")))
    }

    fn flag(&self, group: &str, raw: &str) -> CliResult<bool> {
        match raw.trim() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            other => Err(self.err(format!("group `{group}` flag `{other}` is not 0 or 1"))),
        }
    }
}

/// Reads `path` in `format` into a dataset over `space`.
pub fn ingest(
    path: &Path,
    format: Format,
    space: &Arc<OutcomeSpace>,
    predictions: &[PredictionDecl],
    groups: &[String],
) -> CliResult<Ingested> {
    let mut warnings = Vec::new();
    let records = match format {
        Format::Csv => read_csv(path, space, predictions, groups, &mut warnings)?,
        Format::Jsonl => read_jsonl(path, space, predictions, groups, &mut warnings)?,
    };
    let dropped = records.iter().filter(|r| r.weight == 0.0).count();
    if dropped > 0 {
        let note = format!("{}: {dropped} zero-weight row(s) dropped", path.display());
        log::warn!("{note}");
        warnings.push(note);
    }
    let records: Vec<Record> = records.into_iter().filter(|r| r.weight > 0.0).collect();
    let dataset = PredictionDataset::new(space, records)?;
    log::info!("{}: {} records", path.display(), dataset.len());
    Ok(Ingested { dataset, warnings })
}

fn read_csv(
    path: &Path,
    space: &Arc<OutcomeSpace>,
    predictions: &[PredictionDecl],
    groups: &[String],
    warnings: &mut Vec<String>,
) -> CliResult<Vec<Record>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::Row { path: path.into(), line: 1, message: format!("{other:?}") },
        })?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Row { path: path.into(), line: 1, message: e.to_string() })?
        .clone();
    let column = |name: &str| -> CliResult<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::Schema {
            path: path.into(),
            column: name.to_string(),
        })
    };
    let x_col = column("x_id")?;
    let y_col = column("y")?;
    let w_col = headers.iter().position(|h| h == "weight");
    let pred_cols = predictions
        .iter()
        .map(|p| p.column_names(space).iter().map(|c| column(c)).collect::<CliResult<Vec<_>>>())
        .collect::<CliResult<Vec<_>>>()?;
    let group_cols = groups
        .iter()
        .map(|g| column(&format!("g_{g}")))
        .collect::<CliResult<Vec<_>>>()?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::Row {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let mut b = RowBuilder {
            path,
            line: row.position().map_or(0, |p| p.line()),
            space,
            warnings,
        };
        let y = b.outcome(&row[y_col])?;
        let w = match w_col {
            Some(c) => Some(b.real("weight", &row[c])?),
            None => None,
        };
        let mut record = Record::new(&row[x_col], y, b.weight(w)?);
        for (decl, cols) in predictions.iter().zip(&pred_cols) {
            let value = match decl.kind {
                PredictionKind::Dist => {
                    let masses = cols.iter().map(|&c| b.real(&decl.name, &row[c])).collect::<CliResult<Vec<_>>>()?;
                    PropertyValue::Distribution(b.pmf(&decl.name, masses)?)
                }
                PredictionKind::Real => PropertyValue::Real(b.real(&decl.name, &row[cols[0]])?),
                PredictionKind::Token => PropertyValue::Token(row[cols[0]].to_string()),
            };
            record = record.with_prediction(decl.name.clone(), value);
        }
        for (g, &c) in groups.iter().zip(&group_cols) {
            record = record.with_group(g.clone(), b.flag(g, &row[c])?);
        }
        records.push(record);
    }
    Ok(records)
}

fn json_label(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => n.as_f64().map(|x| format!("{x}")),
        _ => None,
    }
}

fn read_jsonl(
    path: &Path,
    space: &Arc<OutcomeSpace>,
    predictions: &[PredictionDecl],
    groups: &[String],
    warnings: &mut Vec<String>,
) -> CliResult<Vec<Record>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut b = RowBuilder {
            path,
            line: i as u64 + 1,
            space,
            warnings,
        };
        let obj: Map<String, Value> = serde_json::from_str(&line).map_err(|e| b.err(e.to_string()))?;
        let field = |key: &str| obj.get(key).ok_or_else(|| CliError::Schema { path: path.into(), column: key.to_string() });
        let x_id = json_label(field("x_id")?).ok_or_else(|| b.err("`x_id` must be a string or number"))?;
        let label = json_label(field("y")?).ok_or_else(|| b.err("`y` must be a string or number"))?;
        let y = b.outcome(&label)?;
        let w = match obj.get("weight") {
            None => None,
            Some(v) => Some(v.as_f64().ok_or_else(|| b.err("`weight` must be a number"))?),
        };
        let mut record = Record::new(x_id, y, b.weight(w)?);
        let empty = Map::new();
        let preds = match obj.get("pred") {
            Some(Value::Object(m)) => m,
            Some(_) => return Err(b.err("`pred` must be an object")),
            None => &empty,
        };
        for decl in predictions {
            let v = preds.get(&decl.name).ok_or_else(|| CliError::Schema {
                path: path.into(),
                column: format!("pred.{}", decl.name),
            })?;
            let value = match (decl.kind, v) {
                (PredictionKind::Dist, Value::Object(m)) => {
                    if let Some(k) = m.keys().find(|k| space.index_of(k).is_none()) {
                        return Err(b.err(format!("prediction `{}` has unknown outcome label `{k}`", decl.name)));
                    }
                    let masses = space
                        .labels()
                        .iter()
                        .map(|l| m.get(l).map_or(Some(0.0), Value::as_f64))
                        .collect::<Option<Vec<f64>>>()
                        .ok_or_else(|| b.err(format!("prediction `{}` has a non-numeric mass", decl.name)))?;
                    PropertyValue::Distribution(b.pmf(&decl.name, masses)?)
                }
                (PredictionKind::Real, Value::Number(n)) => PropertyValue::Real(
                    n.as_f64().filter(|x| x.is_finite()).ok_or_else(|| b.err(format!("`{}` is not finite", decl.name)))?,
                ),
                (PredictionKind::Token, Value::String(s)) => PropertyValue::Token(s.clone()),
                _ => return Err(b.err(format!("prediction `{}` has the wrong JSON type", decl.name))),
            };
            record = record.with_prediction(decl.name.clone(), value);
        }
        let flags = match obj.get("groups") {
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(b.err("`groups` must be an object")),
            None => Map::new(),
        };
        for g in groups {
            let flag = match flags.get(g) {
                Some(Value::Bool(x)) => *x,
                Some(Value::Number(n)) if n.as_f64() == Some(1.0) => true,
                Some(Value::Number(n)) if n.as_f64() == Some(0.0) => false,
                Some(_) => return Err(b.err(format!("group `{g}` flag must be 0 or 1"))),
                None => return Err(CliError::Schema { path: path.into(), column: format!("groups.{g}") }),
            };
            record = record.with_group(g.clone(), flag);
        }
        records.push(record);
    }
    Ok(records)
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

/// Writes records as CSV with every float at 17 significant digits.
pub fn write_csv(
    path: &Path,
    dataset: &PredictionDataset,
    predictions: &[PredictionDecl],
    groups: &[String],
) -> CliResult<()> {
    let space = dataset.space();
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e.into()))?;
    let mut header = vec!["x_id".to_string(), "y".to_string(), "weight".to_string()];
    for p in predictions {
        header.extend(p.column_names(space));
    }
    header.extend(groups.iter().map(|g| format!("g_{g}")));
    w.write_record(&header).map_err(|e| CliError::io(path, e.into()))?;
    for r in dataset.records() {
        let mut row = vec![r.x_id.clone(), space.label(r.y).to_string(), fmt17(r.weight)];
        for p in predictions {
            match r.prediction(&p.name)? {
                PropertyValue::Distribution(pmf) => row.extend(pmf.weights().iter().map(|m| fmt17(*m))),
                PropertyValue::Real(x) => row.push(fmt17(*x)),
                PropertyValue::Token(t) => row.push(t.clone()),
                PropertyValue::Ranking(r) => row.push(r.join("|")),
            }
        }
        for g in groups {
            row.push(if r.groups.get(g).copied().unwrap_or(false) { "1" } else { "0" }.into());
        }
        w.write_record(&row).map_err(|e| CliError::io(path, e.into()))?;
    }
    w.flush().map_err(write_err(path))
}

/// Writes records as JSONL; re-ingesting yields the same dataset.
pub fn write_jsonl(
    path: &Path,
    dataset: &PredictionDataset,
    predictions: &[PredictionDecl],
    groups: &[String],
) -> CliResult<()> {
    let space = dataset.space();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(write_err(path))?);
    for r in dataset.records() {
        let mut pred = Map::new();
        for p in predictions {
            let v = match r.prediction(&p.name)? {
                PropertyValue::Distribution(pmf) => Value::Object(
                    space
                        .labels()
                        .iter()
                        .zip(pmf.weights())
                        .map(|(l, m)| (l.clone(), num(*m)))
                        .collect(),
                ),
                PropertyValue::Real(x) => num(*x),
                PropertyValue::Token(t) => Value::String(t.clone()),
                PropertyValue::Ranking(r) => Value::String(r.join("|")),
            };
            pred.insert(p.name.clone(), v);
        }
        let flags: BTreeMap<&String, u8> = groups.iter().map(|g| (g, u8::from(r.groups.get(g).copied().unwrap_or(false)))).collect();
        let line = serde_json::json!({
            "x_id": r.x_id,
            "y": space.label(r.y),
            "weight": num(r.weight),
            "pred": pred,
            "groups": flags,
        });
        writeln!(out, "{line}").map_err(write_err(path))?;
    }
    out.flush().map_err(write_err(path))
}
