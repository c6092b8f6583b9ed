//! Output files: atomic writes and CSV tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use gorder_core::ordering::EmpiricalRow;
use gorder_core::scenarios::Curve;
use serde::Serialize;

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `report.json` -> `report.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn empirical_csv(rows: &[EmpiricalRow]) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "payoff_id",
        "e1",
        "e2",
        "difference",
        "tolerance",
        "stderr1",
        "stderr2",
        "pass",
    ])?;
    for r in rows {
        w.write_record([
            r.payoff_id.clone(),
            r.e1.to_string(),
            r.e2.to_string(),
            r.difference.to_string(),
            r.tolerance.to_string(),
            r.stderr1.to_string(),
            r.stderr2.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// `payoff_id,x,value` rows of `u(0, .)` for one problem.
pub fn curves_csv(curves: &[Curve], problem: u8) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["payoff_id", "x", "value"])?;
    for c in curves.iter().filter(|c| c.problem == problem) {
        for (x, u) in c.x.iter().zip(&c.u) {
            w.write_record([c.payoff_id.clone(), x.to_string(), u.to_string()])?;
        }
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(sibling(&p, "grid.csv"), dir.path().join("r.grid.csv"));
    }
}
