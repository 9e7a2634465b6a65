//! Run summaries and the files an experiment writes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sqe_core::{GENERATOR_NAME, SEED_DERIVATION};

use crate::config::ExperimentConfig;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// One acceptance check of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// A CSV file with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file_name: impl Into<String>, header: &[&'static str]) -> Self {
        Table {
            file_name: file_name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> csv::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

/// Formats a float for CSV output: shortest round-trip form, `inf` for
/// infinity.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorInfo {
    pub name: &'static str,
    pub seed_derivation: &'static str,
    pub crate_version: &'static str,
}

impl Default for GeneratorInfo {
    fn default() -> Self {
        GeneratorInfo {
            name: GENERATOR_NAME,
            seed_derivation: SEED_DERIVATION,
            crate_version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub experiment: String,
    pub generator: GeneratorInfo,
    pub config: ExperimentConfig,
    pub metrics: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

/// Everything an experiment produced, before anything touches the disk.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub tables: Vec<Table>,
}

impl RunOutput {
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summaries always serialize");
        s.push('\n');
        s
    }

    /// Writes every table and `<experiment>.json` into `dir`, returning the
    /// paths written.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            let path = dir.join(&t.file_name);
            fs::write(&path, t.to_csv().map_err(std::io::Error::other)?)?;
            written.push(path);
        }
        let path = dir.join(format!("{}.json", self.summary.experiment));
        fs::write(&path, self.summary_json())?;
        written.push(path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_even_without_rows() {
        let t = Table::new("x.csv", &["a", "b"]);
        assert_eq!(t.to_csv().unwrap(), b"a,b\n");
    }

    #[test]
    fn number_formatting() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(2.0), "2");
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
