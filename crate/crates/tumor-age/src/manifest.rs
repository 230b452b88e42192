//! Run manifests: enough provenance to reproduce any output bit for bit.
//!
//! Every command that writes files also writes a `manifest.json` recording
//! the tool version, the complete configuration, and a SHA-256 checksum of
//! each output. Re-running the recorded command must reproduce the
//! checksums exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::growth::SimulationConfig;
use crate::invert::{CrossingMode, DiameterGrid};
use crate::mixture::RdtMixture;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputChecksum {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// The invocation that produced the outputs.
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<RdtMixture>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<SimulationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<DiameterGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<CrossingMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhos: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub outputs: Vec<OutputChecksum>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            model: None,
            config: None,
            grid: None,
            mode: None,
            rhos: None,
            input: None,
            outputs: Vec::new(),
        }
    }

    /// Record a checksum for output bytes about to be written as `file`.
    pub fn record_output(&mut self, file: impl Into<String>, bytes: &[u8]) {
        self.outputs.push(OutputChecksum { file: file.into(), sha256: sha256_hex(bytes) });
    }

    /// Write `manifest.json` into `dir` and return its path.
    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, json.as_bytes())?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
    }
    hex
}
