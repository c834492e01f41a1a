//! Numeric tables and atomic artifact emission.
//!
//! Every CSV cell is written as `{:.16e}` (17 significant digits), which
//! reparses to the identical f64 bit pattern, so emitted files survive a
//! parse / re-emit cycle byte for byte. Files are written through a temp
//! file in the target directory plus an atomic rename.

use std::io::Write;
use std::path::{Path, PathBuf};

use fplap::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Table {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))
                .map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Config(format!("csv flush: {e}")))
    }

    pub fn from_csv_bytes(bytes: &[u8]) -> Result<Table> {
        let mut r = csv::Reader::from_reader(bytes);
        let columns: Vec<String> = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != columns.len() {
                return Err(Error::Config(format!(
                    "csv row {} has {} fields, header has {}",
                    i + 1,
                    rec.len(),
                    columns.len()
                )));
            }
            let row: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|e| {
                        Error::Config(format!("csv row {}: '{s}' is not a number ({e})", i + 1))
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Table> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_csv_bytes(&bytes)
    }

    /// Write `<stem>.csv` or `<stem>.json` into `dir` and return the path.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<PathBuf> {
        let (path, bytes) = match format {
            Format::Csv => (dir.join(format!("{stem}.csv")), self.to_csv_bytes()?),
            Format::Json => {
                let value = serde_json::json!({
                    "columns": self.columns,
                    "rows": self.rows,
                });
                (dir.join(format!("{stem}.json")), pretty_bytes(&value)?)
            }
        };
        write_atomic(&path, &bytes)?;
        Ok(path)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

fn pretty_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Config(format!("json encoding: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Error::Config(format!("cannot create temp file in {}: {e}", dir.display())))?;
    tmp.write_all(bytes)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| Error::Config(format!("cannot persist {}: {e}", path.display())))?;
    Ok(())
}

/// Pretty-printed JSON summary, atomically, and return the path.
pub fn write_json<T: Serialize>(dir: &Path, stem: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.json"));
    write_atomic(&path, &pretty_bytes(value)?)?;
    Ok(path)
}
