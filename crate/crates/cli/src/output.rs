use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tailsep::TailScanRow;

use crate::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { context: format!("writing {}", path.display()), source }
}

/// Writes to `path`, or to stdout for `None` and `-`.
pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p != Path::new("-") => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            fs::write(p, text).map_err(io_err(p))
        }
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(io_err(Path::new("stdout")))
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("cannot encode report: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    write_text(path, &to_json(value)?)
}

/// `path` with its extension replaced by `suffix`, e.g. `out.json` to
/// `out.curve.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

pub fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Numerical(format!("cannot encode CSV: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Numerical(format!("cannot encode CSV: {e}")))
}

pub fn csv_err(e: csv::Error) -> CliError {
    CliError::Numerical(format!("cannot encode CSV: {e}"))
}

/// Scan curve with one row per tail size.
pub fn curve_csv(rows: &[TailScanRow]) -> Result<String, CliError> {
    let mut w = csv_writer();
    w.write_record(["k", "au2", "w2", "a2", "xi", "sigma", "fit_converged"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.au2.to_string(),
            r.w2.to_string(),
            r.a2.to_string(),
            r.xi.to_string(),
            r.sigma.to_string(),
            r.fit_converged.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}
