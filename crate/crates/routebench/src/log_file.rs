//! Outcome log: a JSONL header line followed by one outcome per line.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use routebench_core::{schema_versions, RequestOutcome};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: String,
    pub config_hash: String,
    pub seed: u64,
    /// `simulate` or `live`.
    pub backend_kind: String,
    pub combos: usize,
    pub requests_per_combo: usize,
}

pub fn write_header<W: Write>(out: &mut W, header: &LogHeader) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, header)?;
    out.write_all(b"\n")
}

pub fn write_row<W: Write>(out: &mut W, row: &RequestOutcome) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, row)?;
    out.write_all(b"\n")
}

/// Reads a whole log, reporting the first corrupt line by number.
pub fn read_log(path: &Path) -> Result<(LogHeader, Vec<RequestOutcome>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, message: String| Error::Malformed {
        path: path.into(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| malformed(1, "empty log".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: LogHeader = serde_json::from_str(&first).map_err(|e| malformed(1, format!("bad header: {e}")))?;
    if header.schema_version != schema_versions::OUTCOME_LOG {
        return Err(malformed(
            1,
            format!(
                "schema `{}` is not {}",
                header.schema_version,
                schema_versions::OUTCOME_LOG
            ),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: RequestOutcome = serde_json::from_str(&line).map_err(|e| malformed(n, e.to_string()))?;
        if !row.is_consistent() {
            return Err(malformed(n, "row violates the outcome invariants".into()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Log text with every row timestamp zeroed, for byte comparisons.
pub fn mask_timestamps(log: &str) -> String {
    let mut out = String::with_capacity(log.len());
    for (i, line) in log.lines().enumerate() {
        if i > 0 && !line.is_empty() {
            if let Ok(mut row) = serde_json::from_str::<RequestOutcome>(line) {
                row.timestamp_ms = 0;
                out.push_str(&serde_json::to_string(&row).expect("row serializes"));
                out.push('\n');
                continue;
            }
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}
