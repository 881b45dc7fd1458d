use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::ExperimentConfig;
use crate::error::Result;

pub const TOOL_NAME: &str = "eigensense";

/// One line of a results table.
pub trait CsvRow {
    const HEADER: &'static str;
    fn csv_line(&self) -> String;
}

pub fn to_csv<R: CsvRow>(rows: &[R]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(R::HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

pub fn write_csv<R: CsvRow>(path: &Path, rows: &[R]) -> Result<()> {
    fs::write(path, to_csv(rows))?;
    Ok(())
}

/// Run record written next to each results file.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new<S: Serialize>(command: &str, config: &ExperimentConfig, summary: &S) -> Result<Self> {
        Ok(Self {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.to_pairs(),
            seed: config.seed,
            summary: serde_json::to_value(summary).map_err(|e| crate::Error::InvalidData(e.to_string()))?,
        })
    }

    pub fn to_json(&self) -> String {
        // Serializing plain maps and numbers cannot fail.
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}
