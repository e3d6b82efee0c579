//! CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use modmirror::config::SceneConfig;
use serde::{Deserialize, Serialize};

use crate::args::Command;
use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

/// One CSV cell. Floats are written in shortest round-trip scientific form.
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:e}"),
            Cell::I(n) => n.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<i64> for Cell {
    fn from(n: i64) -> Self {
        Cell::I(n)
    }
}

/// Collects rows in memory and writes them with LF line endings.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row.iter().map(Cell::render).collect());
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        let fail = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
        w.write_record(&self.header).map_err(fail)?;
        for r in &self.rows {
            w.write_record(r).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// What a subcommand produced, before timing is attached.
#[derive(Debug, Default)]
pub struct RunRecord {
    pub config: Option<SceneConfig>,
    pub tier: Option<String>,
    pub grid_shapes: BTreeMap<String, Vec<usize>>,
    pub outputs: Vec<String>,
}

impl RunRecord {
    pub fn new(config: Option<SceneConfig>, tier: impl Into<Option<String>>) -> Self {
        Self { config, tier: tier.into(), ..Self::default() }
    }

    pub fn shape(&mut self, name: &str, dims: &[usize]) {
        self.grid_shapes.insert(name.to_string(), dims.to_vec());
    }

    pub fn table(&mut self, dir: &Path, name: &str, table: &Table) -> Result<(), CliError> {
        table.write(&dir.join(name))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
        write_json(&dir.join(name), value)?;
        self.outputs.push(name.to_string());
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub command: Command,
    /// Scene after defaults and overrides; replaces the config file on rerun.
    pub config: Option<SceneConfig>,
    pub solver_tier: Option<String>,
    pub grid_shapes: BTreeMap<String, Vec<usize>>,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    pub workers: Option<usize>,
    pub wall_clock_s: f64,
    pub code_version: String,
}

impl RunManifest {
    pub fn read(path: &PathBuf) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}
