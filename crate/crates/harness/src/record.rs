//! Result records and their on-disk form.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Command;

/// A numeric table; every cell is written as `{:.16e}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// A failure surfaced from a module, with where it happened.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorEntry {
    pub stage: String,
    /// Config field path or node coordinate, when known.
    pub location: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub command: String,
    /// SHA-256 of the canonical config serialization.
    pub input_hash: String,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
    /// Keyed by file slug, written as `<slug>.csv`.
    pub tables: BTreeMap<String, Table>,
    pub errors: Vec<ErrorEntry>,
    /// Kept in memory only so that files stay byte-stable.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ResultRecord {
    pub fn new(command: Command, canonical_config: &str, seed: u64) -> Self {
        let digest = Sha256::digest(canonical_config.as_bytes());
        Self {
            command: command.name().to_string(),
            input_hash: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            metrics: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            tables: BTreeMap::new(),
            errors: Vec::new(),
            wall_clock: Duration::ZERO,
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn verdict(&mut self, name: impl Into<String>, pass: bool) {
        self.verdicts.insert(name.into(), pass);
    }

    pub fn table(&mut self, slug: impl Into<String>, table: Table) {
        self.tables.insert(slug.into(), table);
    }

    pub fn error(&mut self, stage: &str, location: Option<String>, message: impl Into<String>) {
        self.errors.push(ErrorEntry {
            stage: stage.to_string(),
            location,
            message: message.into(),
        });
    }

    /// All verdicts hold and no module reported an error.
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.verdicts.values().all(|v| *v)
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("records always serialize");
        s.push('\n');
        s
    }
}

/// Writes every table and the summary; returns the paths in write order.
pub fn emit_tables(record: &ResultRecord, output_dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(output_dir)?;
    let mut written = Vec::new();
    for (slug, table) in &record.tables {
        let path = output_dir.join(format!("{slug}.csv"));
        fs::write(&path, table.to_csv())?;
        written.push(path);
    }
    let slug = record.command.replace('-', "_");
    let path = output_dir.join(format!("{slug}_summary.json"));
    fs::write(&path, record.summary_json())?;
    written.push(path);
    Ok(written)
}
