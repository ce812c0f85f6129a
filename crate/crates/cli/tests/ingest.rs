use std::path::Path;

use calib_atlas::outcomes::OutcomeSpace;
use calib_atlas::properties::PropertyValue;
use calib_atlas_cli::config::{Format, PredictionDecl, PredictionKind};
use calib_atlas_cli::error::CliError;
use calib_atlas_cli::ingest::{ingest, write_csv, write_jsonl};

fn decls() -> Vec<PredictionDecl> {
    vec![
        PredictionDecl { name: "f".into(), kind: PredictionKind::Dist, columns: None },
        PredictionDecl { name: "score".into(), kind: PredictionKind::Real, columns: None },
    ]
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn three_rows_become_three_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "d.csv",
        "x_id,y,weight,p_0,p_1,score,g_old\n\
         a,0,1,0.7,0.3,0.25,1\n\
         b,1,2,0.2,0.8,0.5,0\n\
         c,1,1,0.5,0.5,1.0,1\n",
    );
    let space = OutcomeSpace::new(["0", "1"]).unwrap();
    let got = ingest(&path, Format::Csv, &space, &decls(), &["old".into()]).unwrap();
    let records = got.dataset.records();
    assert_eq!(records.len(), 3);
    assert!(got.warnings.is_empty());
    assert_eq!(records[1].x_id, "b");
    assert_eq!(records[1].y, 1);
    assert_eq!(records[1].weight, 2.0);
    assert_eq!(records[2].groups.get("old"), Some(&true));
    match records[0].prediction("f").unwrap() {
        PropertyValue::Distribution(p) => assert_eq!(p.weights(), &[0.7, 0.3]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unnormalized_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "d.csv",
        "x_id,y,p_0,p_1,score\n\
         a,0,0.4,0.6,0.1\n\
         b,1,0.5,0.6,0.2\n",
    );
    let space = OutcomeSpace::new(["0", "1"]).unwrap();
    match ingest(&path, Format::Csv, &space, &decls(), &[]) {
        Err(CliError::Row { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a row error, got {other:?}"),
    }
}

#[test]
fn small_drift_is_renormalized_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "d.csv", "x_id,y,p_0,p_1,score\na,0,0.4,0.6000005,0.1\nb,1,0.4,0.6,0.2\n");
    let space = OutcomeSpace::new(["0", "1"]).unwrap();
    let got = ingest(&path, Format::Csv, &space, &decls(), &[]).unwrap();
    assert_eq!(got.warnings.len(), 1);
    assert!(got.warnings[0].contains(":2:"), "{}", got.warnings[0]);
}

#[test]
fn missing_column_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "d.csv", "x_id,y,p_0,score\na,0,1,0.1\n");
    let space = OutcomeSpace::new(["0", "1"]).unwrap();
    match ingest(&path, Format::Csv, &space, &decls(), &[]) {
        Err(CliError::Schema { column, .. }) => assert_eq!(column, "p_1"),
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn unknown_label_and_negative_weight_are_row_errors() {
    let dir = tempfile::tempdir().unwrap();
    let space = OutcomeSpace::new(["0", "1"]).unwrap();
    for body in ["a,2,1,0.5,0.5,0.1\n", "a,0,-1,0.5,0.5,0.1\n"] {
        let path = write(dir.path(), "d.csv", &format!("x_id,y,weight,p_0,p_1,score\n{body}"));
        assert!(matches!(ingest(&path, Format::Csv, &space, &decls(), &[]), Err(CliError::Row { line: 2, .. })));
    }
}

#[test]
fn jsonl_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "d.csv",
        "x_id,y,weight,p_0,p_1,score,g_old\n\
         a,0,0.1,0.1,0.9,0.30000000000000004,1\n\
         b,1,0.7,0.3333333333333333,0.6666666666666667,1e-300,0\n",
    );
    let space = OutcomeSpace::new(["0", "1"]).unwrap();
    let groups = vec!["old".to_string()];
    let first = ingest(&path, Format::Csv, &space, &decls(), &groups).unwrap().dataset;
    let jsonl = dir.path().join("d.jsonl");
    write_jsonl(&jsonl, &first, &decls(), &groups).unwrap();
    let second = ingest(&jsonl, Format::Jsonl, &space, &decls(), &groups).unwrap().dataset;
    let csv = dir.path().join("again.csv");
    write_csv(&csv, &second, &decls(), &groups).unwrap();
    let third = ingest(&csv, Format::Csv, &space, &decls(), &groups).unwrap().dataset;

    for other in [&second, &third] {
        assert_eq!(first.records().len(), other.records().len());
        for (a, b) in first.records().iter().zip(other.records()) {
            assert_eq!(a.x_id, b.x_id);
            assert_eq!(a.y, b.y);
            assert_eq!(a.weight.to_bits(), b.weight.to_bits());
            assert_eq!(a.groups, b.groups);
            for name in ["f", "score"] {
                assert_eq!(a.prediction(name).unwrap(), b.prediction(name).unwrap());
            }
        }
    }
}
