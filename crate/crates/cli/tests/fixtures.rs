use std::path::{Path, PathBuf};

use calib_atlas_cli::fixtures::write_fixtures;

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for dir in std::fs::read_dir(root).unwrap() {
        let dir = dir.unwrap().path();
        for f in std::fs::read_dir(&dir).unwrap() {
            out.push(f.unwrap().path().strip_prefix(root).unwrap().to_path_buf());
        }
    }
    out.sort();
    out
}

#[test]
fn committed_fixtures_match_a_fresh_export() {
    let committed = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let fresh = tempfile::tempdir().unwrap();
    write_fixtures(fresh.path()).unwrap();
    assert_eq!(files(&committed), files(fresh.path()));
    for f in files(fresh.path()) {
        let a = std::fs::read(committed.join(&f)).unwrap();
        let b = std::fs::read(fresh.path().join(&f)).unwrap();
        assert!(a == b, "{} differs from a fresh export", f.display());
    }
}
