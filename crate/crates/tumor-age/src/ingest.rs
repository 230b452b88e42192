//! Reading growth-rate samples from CSV.
//!
//! The expected format is a single `rdt` header line followed by one finite
//! real per line, in doublings per year. Parsing is strict: every malformed
//! line is collected and reported by number rather than silently dropped.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path} is empty")]
    Empty { path: String },
    #[error("{path}: expected header `rdt`, found `{found}`")]
    BadHeader { path: String, found: String },
    #[error("{path}: unparsable rdt values on line(s) {lines:?}")]
    BadRows { path: String, lines: Vec<usize> },
}

/// Read RDT samples from `path`. A header-only file yields an empty vector;
/// whether that is enough data is the caller's decision.
pub fn read_rdt_csv(path: &Path) -> Result<Vec<f64>, IngestError> {
    let display = path.display().to_string();
    let content = fs::read_to_string(path)
        .map_err(|source| IngestError::Io { path: display.clone(), source })?;
    if content.trim().is_empty() {
        return Err(IngestError::Empty { path: display });
    }

    let mut lines = content.lines();
    let header = lines.next().unwrap_or_default().trim();
    if header != "rdt" {
        return Err(IngestError::BadHeader { path: display, found: header.to_string() });
    }

    let mut values = Vec::new();
    let mut bad_lines = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2; // 1-based, after the header
        match line.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => bad_lines.push(line_no),
        }
    }
    if !bad_lines.is_empty() {
        return Err(IngestError::BadRows { path: display, lines: bad_lines });
    }
    Ok(values)
}
