//! CSV tables and the JSON run summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Column-oriented table kept in memory until the run has finished.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Self { name: name.to_string(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Writes the table as CSV. Numbers use the shortest decimal text that
    /// round-trips to the same double.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_number(*v)))?;
        }
        w.flush()?;
        Ok(path)
    }
}

pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

/// One tolerance check of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub achieved: f64,
    pub requested: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `achieved ≤ requested`.
    pub fn at_most(name: &'static str, achieved: f64, requested: f64) -> Self {
        Self { name, achieved, requested, pass: achieved <= requested }
    }

    /// Passes when `achieved ≥ requested`.
    pub fn at_least(name: &'static str, achieved: f64, requested: f64) -> Self {
        Self { name, achieved, requested, pass: achieved >= requested }
    }
}

/// Everything a scenario produced.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub diagnostics: Value,
    pub checks: Vec<Check>,
}

impl Artifacts {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Serialize)]
struct Summary<'a, C: Serialize> {
    scenario: &'a str,
    status: &'a str,
    seed: Option<u64>,
    config: &'a C,
    diagnostics: &'a Value,
    checks: &'a [Check],
    files: Vec<String>,
}

/// Writes all tables and `summary.json` into `dir`.
pub fn emit<C: Serialize>(
    dir: &Path,
    scenario: &str,
    seed: Option<u64>,
    config: &C,
    artifacts: &Artifacts,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for t in &artifacts.tables {
        t.write(dir)?;
        files.push(format!("{}.csv", t.name));
    }
    let summary = Summary {
        scenario,
        status: if artifacts.passed() { "ok" } else { "tolerance_failure" },
        seed,
        config,
        diagnostics: &artifacts.diagnostics,
        checks: &artifacts.checks,
        files,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(())
}
