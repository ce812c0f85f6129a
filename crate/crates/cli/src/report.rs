//! JSON encoding shared by reports and manifests. Floats are written with 17
//! significant digits, which round-trips every `f64` exactly.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use calib_atlas::calib_metrics::{LevelEntry, LevelResidualMap};
use calib_atlas::properties::PropertyValue;
use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// `x` in scientific notation with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// A JSON number carrying [`fmt17`] text; `null` for non-finite values.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(Number::from_str(&fmt17(x)).expect("scientific notation is valid JSON"))
}

pub fn level_value(v: &PropertyValue) -> Value {
    match v {
        PropertyValue::Real(x) => num(*x),
        PropertyValue::Token(t) => Value::String(t.clone()),
        PropertyValue::Ranking(r) => Value::Array(r.iter().cloned().map(Value::String).collect()),
        PropertyValue::Distribution(p) => Value::Array(p.weights().iter().map(|m| num(*m)).collect()),
    }
}

fn num_array(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| num(*x)).collect())
}

pub fn level_entry(e: &LevelEntry, subset: Option<&str>) -> Value {
    let mut m = Map::new();
    m.insert("level".into(), level_value(&e.level));
    m.insert("weight".into(), num(e.weight));
    m.insert("residual".into(), num(e.residual));
    if let Some(s) = subset {
        m.insert("subset".into(), Value::String(s.into()));
    }
    if let Some(x) = e.signed {
        m.insert("signed".into(), num(x));
    }
    if let Some(x) = e.observed {
        m.insert("observed".into(), num(x));
    }
    if let Some(x) = e.predicted {
        m.insert("predicted".into(), num(x));
    }
    if let Some(d) = &e.observed_dist {
        m.insert("observed_dist".into(), num_array(d));
    }
    if let Some(d) = &e.predicted_dist {
        m.insert("predicted_dist".into(), num_array(d));
    }
    Value::Object(m)
}

pub fn level_entries(map: &LevelResidualMap, subset: Option<&str>) -> Vec<Value> {
    map.entries.iter().map(|e| level_entry(e, subset)).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with a trailing newline.
pub fn to_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn write_json(dir: &Path, file: &str, v: &Value) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(file);
    std::fs::write(&path, to_text(v)).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.0 / 35.0, -2.5e-300, 0.0, 1e300, f64::MIN_POSITIVE] {
            let v = num(x);
            let text = serde_json::to_string(&v).unwrap();
            let digits = text.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
            assert_eq!(digits.len(), 17, "{text}");
            let back: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(back.as_f64().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(serde_json::to_string(&num(0.3)).unwrap(), "2.9999999999999999e-1");
    }
}
