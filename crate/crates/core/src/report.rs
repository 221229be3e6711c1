//! Report tables shaped like the comparison tables the pipelines produce:
//! one row per baseline, columns per metric (or group x metric), and a
//! metadata block recording seed, configuration, and interpretation flags.
//!
//! CSV output is byte-deterministic for a fixed table: UTF-8, '.' decimals,
//! header row of column labels with a leading "baseline" corner cell, one
//! row per baseline, "n/a" for unscorable cells. JSON carries the metadata
//! plus a determinism hash computed over the CSV bytes (the timestamp is
//! excluded from the hash).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub title: String,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    /// Row-major cells; `None` renders as "n/a".
    pub cells: Vec<Option<f64>>,
    /// Ordered metadata: seed, config hash, interpretation flags, timestamp.
    pub metadata: BTreeMap<String, String>,
}

impl ReportTable {
    pub fn new(
        title: impl Into<String>,
        row_labels: Vec<String>,
        column_labels: Vec<String>,
    ) -> Self {
        let cells = vec![None; row_labels.len() * column_labels.len()];
        ReportTable {
            title: title.into(),
            row_labels,
            column_labels,
            cells,
            metadata: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let idx = row * self.column_labels.len() + col;
        self.cells[idx] = Some(value);
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.column_labels.len() + col]
    }

    pub fn get_by_labels(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.row_labels.iter().position(|l| l == row)?;
        let c = self.column_labels.iter().position(|l| l == col)?;
        self.get(r, c)
    }

    pub fn with_metadata(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.len() != self.row_labels.len() * self.column_labels.len() {
            return Err(Error::InvalidValue(format!(
                "table {} is not rectangular",
                self.title
            )));
        }
        if self.cells.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "table {} contains non-finite cells",
                self.title
            )));
        }
        Ok(())
    }

    /// File stem derived from the title: lowercase, hyphenated.
    pub fn file_stem(&self) -> String {
        let mut stem = String::new();
        let mut last_hyphen = true;
        for ch in self.title.chars() {
            if ch.is_ascii_alphanumeric() {
                stem.push(ch.to_ascii_lowercase());
                last_hyphen = false;
            } else if !last_hyphen {
                stem.push('-');
                last_hyphen = true;
            }
        }
        while stem.ends_with('-') {
            stem.pop();
        }
        stem
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("baseline");
        for col in &self.column_labels {
            out.push(',');
            out.push_str(col);
        }
        out.push('\n');
        for (r, row) in self.row_labels.iter().enumerate() {
            out.push_str(row);
            for c in 0..self.column_labels.len() {
                out.push(',');
                match self.get(r, c) {
                    Some(v) => out.push_str(&format!("{v}")),
                    None => out.push_str("n/a"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the CSV rendering; the timestamp lives only in metadata and
    /// therefore never enters the hash.
    pub fn determinism_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_csv().as_bytes());
        format!("{:x}", hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Serialize)]
struct JsonTable<'a> {
    title: &'a str,
    row_labels: &'a [String],
    column_labels: &'a [String],
    cells: &'a [Option<f64>],
    metadata: &'a BTreeMap<String, String>,
    determinism_hash: String,
}

/// Write every table in every requested format; returns the created paths.
pub fn emit_report(tables: &[ReportTable], dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for table in tables {
        table.validate()?;
        let stem = table.file_stem();
        for format in formats {
            let path = match format {
                ReportFormat::Csv => dir.join(format!("{stem}.csv")),
                ReportFormat::Json => dir.join(format!("{stem}.json")),
            };
            let body = match format {
                ReportFormat::Csv => table.to_csv(),
                ReportFormat::Json => {
                    let json = JsonTable {
                        title: &table.title,
                        row_labels: &table.row_labels,
                        column_labels: &table.column_labels,
                        cells: &table.cells,
                        metadata: &table.metadata,
                        determinism_hash: table.determinism_hash(),
                    };
                    let mut s = serde_json::to_string_pretty(&json)
                        .map_err(|e| Error::InvalidValue(format!("report serialization failed: {e}")))?;
                    s.push('\n');
                    s
                }
            };
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_csv_layout_is_exact() {
        let mut t = ReportTable::new("demo", vec!["name".into()], vec!["metric".into()]);
        t.set(0, 0, 0.5);
        assert_eq!(t.to_csv(), "baseline,metric\nname,0.5\n");
    }

    #[test]
    fn missing_cells_render_na() {
        let mut t = ReportTable::new(
            "demo",
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
        );
        t.set(0, 0, 1.0);
        t.set(1, 1, 0.25);
        assert_eq!(t.to_csv(), "baseline,x,y\na,1,n/a\nb,n/a,0.25\n");
    }

    #[test]
    fn file_stem_is_lowercase_hyphenated() {
        let t = ReportTable::new("Fooling Rates (FGSM eps=0.1)", vec![], vec![]);
        assert_eq!(t.file_stem(), "fooling-rates-fgsm-eps-0-1");
    }

    #[test]
    fn double_emission_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = ReportTable::new("stability", vec!["row".into()], vec!["col".into()]);
        t.set(0, 0, 0.123456789);
        t = t.with_metadata("seed", 7).with_metadata("timestamp", "2024-01-01T00:00:00Z");
        let formats = [ReportFormat::Csv, ReportFormat::Json];
        let first = emit_report(&[t.clone()], dir.path(), &formats).unwrap();
        let bytes: Vec<Vec<u8>> = first.iter().map(|p| fs::read(p).unwrap()).collect();
        let second = emit_report(&[t], dir.path(), &formats).unwrap();
        for (path, expect) in second.iter().zip(&bytes) {
            assert_eq!(&fs::read(path).unwrap(), expect);
        }
    }

    #[test]
    fn hash_ignores_timestamp_metadata() {
        let mut a = ReportTable::new("t", vec!["r".into()], vec!["c".into()]);
        a.set(0, 0, 1.5);
        let b = a.clone().with_metadata("timestamp", "later");
        assert_eq!(a.determinism_hash(), b.determinism_hash());
    }

    #[test]
    fn empty_table_keeps_valid_schema() {
        let t = ReportTable::new("empty", vec![], vec!["m".into()]);
        assert!(t.validate().is_ok());
        assert_eq!(t.to_csv(), "baseline,m\n");
    }
}
