//! CSV tables and their JSON sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::CliError;

pub const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
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

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
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

/// Scientific notation with `digits` significant digits.
pub fn format_float(x: f64, digits: usize) -> String {
    if x.is_finite() {
        format!("{:.*e}", digits.saturating_sub(1), x)
    } else {
        x.to_string()
    }
}

impl Cell {
    fn render(&self, digits: usize) -> String {
        match self {
            Cell::Float(x) => format_float(*x, digits),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    sidecar_version: u32,
    schema_version: u32,
    tool: &'static str,
    tool_version: &'static str,
    command: &'a str,
    file: &'a str,
    columns: &'a [String],
    rows: usize,
    summary: &'a Value,
    config: &'a RunConfig,
}

pub struct OutputDir<'a> {
    pub dir: PathBuf,
    pub command: &'a str,
    pub cfg: &'a RunConfig,
}

impl<'a> OutputDir<'a> {
    pub fn create(dir: &Path, command: &'a str, cfg: &'a RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            command,
            cfg,
        })
    }

    /// Write `name` and `name.meta.json`.
    pub fn write(&self, name: &str, table: &Table, summary: Value) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|c| c.render(self.cfg.precision)))?;
        }
        w.flush()?;

        let side = Sidecar {
            sidecar_version: SIDECAR_VERSION,
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            file: name,
            columns: &table.header,
            rows: table.rows.len(),
            summary: &summary,
            config: self.cfg,
        };
        let mut text = serde_json::to_string_pretty(&side)
            .map_err(|e| CliError::Runtime(format!("cannot serialize sidecar: {e}")))?;
        text.push('\n');
        let meta = self.dir.join(format!("{name}.meta.json"));
        fs::write(&meta, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", meta.display())))?;
        Ok(path)
    }
}
