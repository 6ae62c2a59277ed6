//! Output bundle: CSV tables, trace sidecars and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use trimode::trace::EnergyTrace;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// One CSV cell.
#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    version: &'a str,
    config_sha256: String,
    config: &'a ExperimentConfig,
    wall_time_s: f64,
    truncated_weight: f64,
    tolerances: &'a BTreeMap<String, f64>,
    outputs: &'a [String],
    warnings: &'a [String],
    summary: &'a BTreeMap<String, Value>,
}

pub struct Bundle {
    dir: PathBuf,
    files: Vec<String>,
    truncated_weight: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub summary: BTreeMap<String, Value>,
    started: Instant,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::output(dir.display().to_string(), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            truncated_weight: 0.0,
            tolerances: BTreeMap::new(),
            warnings: Vec::new(),
            summary: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    /// Records the probability dropped by a truncation; the manifest keeps
    /// the largest value seen.
    pub fn note_truncation(&mut self, weight: f64) {
        self.truncated_weight = self.truncated_weight.max(weight);
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::output(path.display().to_string(), e))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    /// Writes `<name>.csv` and its `<name>.json` sidecar.
    pub fn write_trace(&mut self, name: &str, trace: &EnergyTrace<f64>) -> Result<(), CliError> {
        if let Some(w) = trace.metadata.truncated_weight {
            self.note_truncation(w);
        }
        let csv = self.open(&format!("{name}.csv"))?;
        trace.write_csv(csv).map_err(|e| CliError::output(format!("{name}.csv"), e))?;
        let json = self.open(&format!("{name}.json"))?;
        trace
            .write_sidecar(json)
            .map_err(|e| CliError::output(format!("{name}.json"), e))
    }

    /// Writes a table, refusing non-finite numbers.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), CliError> {
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), header.len(), "row width");
            for (c, cell) in row.iter().enumerate() {
                if let Cell::Num(x) = cell {
                    if !x.is_finite() {
                        return Err(CliError::output(
                            name,
                            format!("column {} row {r} is not finite ({x})", header[c]),
                        ));
                    }
                }
            }
        }
        let mut w = csv::Writer::from_writer(self.open(name)?);
        let fail = |e: csv::Error| CliError::output(name, e);
        w.write_record(header).map_err(fail)?;
        for row in rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => x.to_string(),
                    Cell::Int(i) => i.to_string(),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            w.write_record(&fields).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::output(name, e))
    }

    /// Writes `manifest.json` and returns its path.
    pub fn finish(mut self, config: &ExperimentConfig) -> Result<PathBuf, CliError> {
        let wall = self.started.elapsed().as_secs_f64();
        let files = std::mem::take(&mut self.files);
        let manifest = Manifest {
            experiment: config.experiment.id(),
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: config.sha256(),
            config,
            wall_time_s: wall,
            truncated_weight: self.truncated_weight,
            tolerances: &self.tolerances,
            outputs: &files,
            warnings: &self.warnings,
            summary: &self.summary,
        };
        let path = self.dir.join("manifest.json");
        let file = File::create(&path).map_err(|e| CliError::output(path.display().to_string(), e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &manifest)
            .map_err(|e| CliError::output("manifest.json", e))?;
        Ok(path)
    }
}
