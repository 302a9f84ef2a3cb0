use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::scenarios::execute;

/// Schema version written into every CSV header line.
pub const SCHEMA_VERSION: u32 = 1;

/// A named numeric table; `None` marks a missing or non-finite value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in table {}", self.name);
        self.rows.push(row.into_iter().map(|v| v.is_finite().then_some(v)).collect());
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// CSV with a `# schema:` comment line, a header and one line per row.
    /// Numbers round-trip exactly; missing values are empty fields.
    pub fn write_csv(&self, scenario: &str, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# schema: seqdyn/{scenario}/{}/v{SCHEMA_VERSION}", self.name)?;
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serialize(e.to_string());
        w.write_record(&self.columns).map_err(ser)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.map(format_number).unwrap_or_default()))
                .map_err(ser)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal, switching to exponent form for very large
/// or small magnitudes.
fn format_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Everything one run produced, together with the config that reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub tables: Vec<Table>,
    pub fitted: BTreeMap<String, Option<f64>>,
    pub warnings: Vec<String>,
}

impl ExperimentRecord {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn fitted(&self, name: &str) -> Option<f64> {
        self.fitted.get(name).copied().flatten()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Output file names: `<stem>.json` and `<stem>.<table>.csv`.
    pub fn file_names(&self) -> Vec<String> {
        let stem = self.config.output_stem();
        std::iter::once(format!("{stem}.json"))
            .chain(self.tables.iter().map(|t| format!("{stem}.{}.csv", t.name)))
            .collect()
    }

    /// Writes every output through temporary files in `dir`, renaming them
    /// into place only once all were written; on failure nothing is left
    /// behind.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let names = self.file_names();
        let mut staged = Vec::with_capacity(names.len());
        let mut json = NamedTempFile::new_in(dir)?;
        json.write_all(self.to_json()?.as_bytes())?;
        json.write_all(b"\n")?;
        staged.push(json);
        for t in &self.tables {
            let mut f = NamedTempFile::new_in(dir)?;
            let mut buf = Vec::new();
            t.write_csv(&self.config.scenario, &mut buf)?;
            f.write_all(&buf)?;
            staged.push(f);
        }
        let mut done: Vec<PathBuf> = Vec::with_capacity(names.len());
        for (tmp, name) in staged.into_iter().zip(&names) {
            let path = dir.join(name);
            if let Err(e) = tmp.as_file().sync_all().map_err(Error::from).and_then(|_| {
                tmp.persist(&path).map(|_| ()).map_err(|e| Error::Io(e.error))
            }) {
                for p in &done {
                    let _ = std::fs::remove_file(p);
                }
                return Err(e);
            }
            done.push(path);
        }
        Ok(done)
    }
}

/// Validates `config`, runs its scenario and collects the results.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    let plan = config.validate()?;
    let start = Instant::now();
    let outcome = execute(&plan)?;
    Ok(ExperimentRecord {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        tables: outcome.tables,
        fitted: outcome.fitted,
        warnings: outcome.warnings,
    })
}

/// [`run`] followed by [`ExperimentRecord::write_to`].
pub fn run_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<(ExperimentRecord, Vec<PathBuf>)> {
    let record = run(config)?;
    let files = record.write_to(dir)?;
    Ok((record, files))
}

/// Outcome of re-running a stored record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub identical: bool,
    pub differences: Vec<String>,
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        (None, None) => true,
        _ => false,
    }
}

/// Re-runs the echoed config and compares tables, fitted constants and
/// warnings bit for bit.
pub fn verify(record: &ExperimentRecord) -> Result<VerifyReport> {
    let fresh = run(&record.config)?;
    let mut differences = Vec::new();
    let old_names: Vec<&str> = record.tables.iter().map(|t| t.name.as_str()).collect();
    let new_names: Vec<&str> = fresh.tables.iter().map(|t| t.name.as_str()).collect();
    if old_names != new_names {
        differences.push(format!("tables: {old_names:?} vs {new_names:?}"));
    }
    for (a, b) in record.tables.iter().zip(&fresh.tables) {
        if a.columns != b.columns {
            differences.push(format!("{}: columns differ", a.name));
            continue;
        }
        if a.rows.len() != b.rows.len() {
            differences.push(format!("{}: {} rows vs {}", a.name, a.rows.len(), b.rows.len()));
        }
        for (i, (ra, rb)) in a.rows.iter().zip(&b.rows).enumerate() {
            for (j, (&va, &vb)) in ra.iter().zip(rb).enumerate() {
                if !same(va, vb) {
                    differences.push(format!("{}[{i}].{}: {va:?} vs {vb:?}", a.name, a.columns[j]));
                }
            }
        }
    }
    let keys: std::collections::BTreeSet<&String> = record.fitted.keys().chain(fresh.fitted.keys()).collect();
    for k in keys {
        let (a, b) = (record.fitted.get(k).copied().flatten(), fresh.fitted.get(k).copied().flatten());
        if !same(a, b) {
            differences.push(format!("fitted.{k}: {a:?} vs {b:?}"));
        }
    }
    if record.warnings != fresh.warnings {
        differences.push("warnings differ".into());
    }
    Ok(VerifyReport {
        identical: differences.is_empty(),
        differences,
    })
}
