//! Machine-readable run reports.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub const TOOL: &str = "df-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Effective configuration with defaults resolved.
    pub config: Value,
    pub seed: Option<u64>,
    pub results: Value,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn new(command: &str, config: Value, seed: Option<u64>) -> Self {
        Report {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config,
            seed,
            results: Value::Null,
            warnings: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// A plot-ready table: header row plus one row per record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip formatting of a float for tables.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}
