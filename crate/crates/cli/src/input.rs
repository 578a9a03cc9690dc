//! Single-column extraction from comma-separated files.
//!
//! The first non-blank row is a header when any of its cells is not a
//! number. Columns are picked by 1-based index or by header name. Blank lines
//! are skipped; every other cell of the chosen column must parse as a finite
//! number.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnSelector {
    /// 1-based position.
    Index(usize),
    Name(String),
}

impl Default for ColumnSelector {
    fn default() -> Self {
        ColumnSelector::Index(1)
    }
}

impl FromStr for ColumnSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err("column must not be empty".into());
        }
        match s.parse::<usize>() {
            Ok(0) => Err("column indices start at 1".into()),
            Ok(i) => Ok(ColumnSelector::Index(i)),
            Err(_) => Ok(ColumnSelector::Name(s.to_string())),
        }
    }
}

impl fmt::Display for ColumnSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnSelector::Index(i) => write!(f, "{i}"),
            ColumnSelector::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub header: Option<String>,
    pub values: Vec<f64>,
}

pub fn read_column_from_path(path: &Path, column: &ColumnSelector) -> Result<Column, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    read_column(file, column).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_column<R: Read>(reader: R, column: &ColumnSelector) -> Result<Column, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut index = None;
    let mut header = None;
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::Data(format!("malformed CSV: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let line = record.position().map_or(0, |p| p.line());
        let idx = match index {
            Some(i) => i,
            None => {
                let is_header = record.iter().any(|c| c.parse::<f64>().is_err());
                let i = match column {
                    ColumnSelector::Index(i) => i - 1,
                    ColumnSelector::Name(name) if is_header => {
                        record.iter().position(|c| c == name).ok_or_else(|| {
                            CliError::Data(format!("no column named {name:?} in the header"))
                        })?
                    }
                    ColumnSelector::Name(name) => {
                        return Err(CliError::Data(format!(
                            "column {name:?} requested by name but the file has no header"
                        )))
                    }
                };
                index = Some(i);
                if is_header {
                    header = record.get(i).map(str::to_string);
                    if header.is_none() {
                        return Err(CliError::Data(format!(
                            "header has {} columns, column {} requested",
                            record.len(),
                            i + 1
                        )));
                    }
                    continue;
                }
                i
            }
        };
        let cell = record.get(idx).ok_or_else(|| {
            CliError::Data(format!("line {line}: row has {} columns, column {} requested", record.len(), idx + 1))
        })?;
        let value = cell
            .parse::<f64>()
            .map_err(|_| CliError::Data(format!("line {line}: non-numeric value {cell:?}")))?;
        if !value.is_finite() {
            return Err(CliError::Data(format!("line {line}: non-finite value {cell:?}")));
        }
        values.push(value);
    }
    Ok(Column { header, values })
}
