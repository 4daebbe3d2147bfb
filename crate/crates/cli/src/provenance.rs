//! Provenance stamped into every artifact: the resolved configuration and a
//! content hash of the inputs. Nothing time- or location-dependent goes in,
//! so reruns reproduce artifacts byte for byte.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    /// SHA-256 over the input names and digests, in order.
    pub input_hash: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_bytes(name: &str, bytes: &[u8]) -> InputDigest {
    InputDigest {
        name: name.to_string(),
        sha256: hex(&Sha256::digest(bytes)),
    }
}

pub fn digest_file(path: &Path) -> Result<InputDigest, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    let name = path
        .file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    Ok(digest_bytes(&name, &bytes))
}

impl Provenance {
    pub fn new(command: &str, config: &PipelineConfig, inputs: Vec<InputDigest>) -> Self {
        let mut h = Sha256::new();
        for d in &inputs {
            h.update(d.name.as_bytes());
            h.update([0]);
            h.update(d.sha256.as_bytes());
            h.update(b"\n");
        }
        Provenance {
            tool: "manipulant",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.to_json(),
            inputs,
            input_hash: hex(&h.finalize()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("provenance is always serializable")
    }

    /// One-line JSON, for JSON-lines headers and comments.
    pub fn compact(&self) -> String {
        serde_json::to_string(self).expect("provenance is always serializable")
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::user(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::user(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}
