//! CSV, JSON and SVG artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::run::{Artifacts, Failure};

pub const VERSION: &str = env!("WAVEGUIDE_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Empty,
}

impl Cell {
    /// Floats carry 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Float(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Float(v) if v.is_nan() => "nan".into(),
            Cell::Float(v) => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Failure::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Failure::Internal(e.to_string()))
    }
}

/// The JSON summary written next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub summary: Vec<String>,
    pub result: Value,
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// Writes the requested formats into the output directory and returns the written paths.
pub fn emit(command: &str, config: &RunConfig, artifacts: &Artifacts) -> Result<Vec<PathBuf>, Failure> {
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let summary = Summary {
        command: command.into(),
        version: VERSION.into(),
        config: config.clone(),
        summary: artifacts.summary.clone(),
        result: artifacts.result.clone(),
    };
    let mut written = Vec::new();
    if config.output.wants(Format::Csv) {
        let path = dir.join(format!("{command}.csv"));
        write(&path, &artifacts.table.to_csv()?)?;
        written.push(path);
    }
    if config.output.wants(Format::Json) {
        let path = dir.join(format!("{command}.json"));
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Internal(e.to_string()))?;
        write(&path, &(text + "\n"))?;
        written.push(path);
    }
    if let (true, Some(plot)) = (config.output.wants(Format::Svg), &artifacts.plot) {
        let path = dir.join(format!("{command}.svg"));
        let echo = serde_json::to_string(&serde_json::json!({ "version": VERSION, "config": config }))
            .map_err(|e| Failure::Internal(e.to_string()))?;
        write(&path, &plot.render(&echo))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let s = Cell::Float(std::f64::consts::PI).render();
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
        assert_eq!(Cell::Float(f64::INFINITY).render(), "inf");
        assert_eq!(Cell::Empty.render(), "");
    }

    #[test]
    fn csv_has_header_first() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Cell::Int(1), Cell::Bool(true)]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n1,true\n");
    }
}
