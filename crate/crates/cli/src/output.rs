//! CSV tables, embedded checks and the JSON summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Value, json};

use crate::CliError;
use crate::manifest::{ExperimentManifest, SUITE_VERSION, TOOL_VERSION};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
    S(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x as u64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::U(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::F)
    }
}

impl Cell {
    /// Shortest round-trip representation; non-finite numbers are refused.
    fn render(&self) -> Result<String, String> {
        Ok(match self {
            Cell::F(x) if x.is_finite() => format!("{x:?}"),
            Cell::F(x) => return Err(format!("non-finite value {x}")),
            Cell::U(x) => x.to_string(),
            Cell::B(b) => b.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(file: &str, header: &[&'static str]) -> Self {
        Table { file: file.to_string(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Writes `# manifest_sha256=<hash>` followed by an RFC-4180 table.
pub fn write_table(dir: &Path, hash: &str, table: &Table) -> Result<(), CliError> {
    let path = dir.join(&table.file);
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut file = BufWriter::new(File::create(&path).map_err(io)?);
    write!(file, "# manifest_sha256={hash}\r\n").map_err(io)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(file);
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(&table.header).map_err(csv_err)?;
    for (i, row) in table.rows.iter().enumerate() {
        let fields = row
            .iter()
            .map(Cell::render)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Runtime(format!("{} row {i}: {e}", table.file)))?;
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// One embedded assertion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.to_string(), passed, detail: detail.into() }
    }
}

/// What an experiment produced.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub results: Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn summary_json(manifest: &ExperimentManifest, outcome: &Outcome) -> Value {
    json!({
        "tool": "adjwalk",
        "tool_version": TOOL_VERSION,
        "suite_version": SUITE_VERSION,
        "kind": manifest.kind.as_str(),
        "manifest_sha256": manifest.sha256(),
        "manifest": manifest.canonical(),
        "artifacts": outcome.tables.iter().map(|t| t.file.clone()).collect::<Vec<_>>(),
        "results": outcome.results,
        "checks": outcome.checks,
        "passed": outcome.passed(),
    })
}

/// One-line machine-readable status for standard output.
pub fn status_line(manifest: &ExperimentManifest, outcome: &Outcome) -> Value {
    let failed: Vec<&Check> = outcome.checks.iter().filter(|c| !c.passed).collect();
    json!({
        "status": if failed.is_empty() { "pass" } else { "fail" },
        "kind": manifest.kind.as_str(),
        "manifest_sha256": manifest.sha256(),
        "checks": outcome.checks.len(),
        "failed": failed,
    })
}

/// Writes every table and `summary.json` into `dir`.
pub fn write_outputs(dir: &Path, manifest: &ExperimentManifest, outcome: &Outcome) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let hash = manifest.sha256();
    for t in &outcome.tables {
        write_table(dir, &hash, t)?;
    }
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary_json(manifest, outcome)).expect("summary serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
