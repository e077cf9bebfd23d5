//! Atomic file output and CSV formatting.

use std::io::Write;
use std::path::{Path, PathBuf};

use reduced_schwarz::grid::{GridFunction, GridSpec};

use crate::error::CliError;

/// Writes `bytes` to a temporary file beside `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Shortest round-trip representation; empty for a missing value.
pub fn fmt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    atomic_write(path, &bytes)
}

/// `x, y, u` at every node, row by row.
pub fn write_field(path: &Path, grid: &GridSpec, u: &GridFunction) -> Result<(), CliError> {
    let rect = u.rect();
    let rows = rect
        .nodes()
        .zip(u.values())
        .map(|((i, j), v)| vec![fmt_f64(Some(grid.x(i))), fmt_f64(Some(grid.y(j))), fmt_f64(Some(*v))]);
    write_csv(path, &["x", "y", "u"], rows)
}

/// `<prefix>_<suffix>.csv`
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!("_{suffix}.csv"));
    prefix.with_file_name(name)
}
