//! Result records: long-format CSV rows plus a JSON metadata sidecar.
//!
//! CSV columns, in order:
//!
//! | column    | meaning                                              |
//! |-----------|------------------------------------------------------|
//! | `command` | `bounds`, `simulate`, `sweep`, `verify`, ...         |
//! | `rate`    | the rate budget `R` in bits                          |
//! | `n`       | blocklength, empty when not applicable               |
//! | `state`   | state label, empty when not applicable               |
//! | `metric`  | what `value` is (`lower`, `error`, `zeta`, ...)      |
//! | `value`   | a real with 12 significant digits                    |

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub command: String,
    pub rate: f64,
    pub n: Option<usize>,
    pub state: Option<String>,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub config_digest: String,
    pub tool_version: String,
    pub seed: u64,
    /// Seconds since the Unix epoch; excluded from [`ResultRecord::payload_digest`].
    pub timestamp: u64,
    pub rows: Vec<ResultRow>,
    pub notes: Vec<String>,
    /// Property outcome for commands that check something.
    pub passed: Option<bool>,
}

/// SHA-256 of the canonical config text.
pub fn digest_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Twelve significant digits, scientific notation.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        v.to_string()
    }
}

impl ResultRecord {
    pub fn new(command: &str, config_digest: String, seed: u64) -> Self {
        ResultRecord {
            command: command.to_string(),
            config_digest,
            tool_version: TOOL_VERSION.to_string(),
            seed,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            rows: Vec::new(),
            notes: Vec::new(),
            passed: None,
        }
    }

    pub fn push(
        &mut self,
        rate: f64,
        n: Option<usize>,
        state: Option<&str>,
        metric: &str,
        value: f64,
    ) {
        self.rows.push(ResultRow {
            command: self.command.clone(),
            rate,
            n,
            state: state.map(str::to_string),
            metric: metric.to_string(),
            value,
        });
    }

    /// Rows for one metric, in insertion order.
    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    pub fn value(&self, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric)
            .map(|r| r.value)
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["command", "rate", "n", "state", "metric", "value"])?;
        for r in &self.rows {
            w.write_record([
                r.command.clone(),
                format_value(r.rate),
                r.n.map_or_else(String::new, |n| n.to_string()),
                r.state.clone().unwrap_or_default(),
                r.metric.clone(),
                format_value(r.value),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Everything except the timestamp, serialized and hashed.
    pub fn payload_digest(&self) -> String {
        let csv = self.to_csv().expect("in-memory csv");
        let meta = serde_json::json!({
            "command": self.command,
            "config_digest": self.config_digest,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "notes": self.notes,
            "passed": self.passed,
        });
        digest_text(&format!("{csv}\n{meta}"))
    }

    pub fn metadata_json(&self) -> String {
        let meta = serde_json::json!({
            "command": self.command,
            "config_digest": self.config_digest,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "timestamp": self.timestamp,
            "rows": self.rows.len(),
            "notes": self.notes,
            "passed": self.passed,
            "columns": ["command", "rate", "n", "state", "metric", "value"],
        });
        serde_json::to_string_pretty(&meta).expect("json")
    }

    /// Writes `<stem>.csv` and `<stem>.json` next to `path`; returns both paths.
    pub fn write(&self, path: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        let csv_path = path.with_extension("csv");
        let json_path = path.with_extension("json");
        if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&csv_path, self.to_csv().map_err(std::io::Error::other)?)?;
        std::fs::write(&json_path, self.metadata_json())?;
        Ok((csv_path, json_path))
    }
}
