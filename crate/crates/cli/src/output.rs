//! Tables written as CSV (or JSON) plus a JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};
use crate::error::{CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

/// 12 significant digits in scientific notation; `-0` prints as `0`.
pub fn format_float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Float(x) => json!(format_float(*x).parse::<f64>().unwrap_or(*x)),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: impl Into<String>, columns: Vec<String>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        let mut s = serde_json::to_string_pretty(&json!({ "columns": self.columns, "rows": rows }))
            .expect("table serializes");
        s.push('\n');
        s
    }

    pub fn file_name(&self, format: Format) -> String {
        match format {
            Format::Csv => format!("{}.csv", self.name),
            Format::Json => format!("{}.json", self.name),
        }
    }
}

#[derive(Debug, Serialize)]
struct FileEntry {
    name: String,
    rows: usize,
    columns: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: String,
    seed: u64,
    config: &'a ExperimentConfig,
    files: Vec<FileEntry>,
}

/// Write every table and the manifest into `dir`; returns written paths.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    tables: &[Table],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let format = config.format.unwrap_or_default();
    let mut written = Vec::new();
    let mut files = Vec::new();
    for t in tables {
        let name = t.file_name(format);
        let path = dir.join(&name);
        let body = match format {
            Format::Csv => t.to_csv(),
            Format::Json => t.to_json(),
        };
        fs::write(&path, body)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        files.push(FileEntry {
            name,
            rows: t.rows.len(),
            columns: t.columns.clone(),
        });
        written.push(path);
    }
    let manifest = Manifest {
        tool: "edgespin",
        version: env!("CARGO_PKG_VERSION"),
        experiment: config
            .experiment
            .map(|e| e.name().to_string())
            .unwrap_or_default(),
        seed: config.seed.unwrap_or(0),
        config,
        files,
    };
    let path = dir.join(MANIFEST_NAME);
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    body.push('\n');
    fs::write(&path, body).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    written.push(path);
    Ok(written)
}
