//! Reproducibility manifests written next to every output.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const SCHEMA: &str = "sordor-manifest";
pub const VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub version: u64,
    pub command: String,
    /// Full configuration the outputs were produced from.
    pub config: Value,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub crate_version: String,
    /// Unit conventions and other interpretation choices baked into outputs.
    pub conventions: BTreeMap<String, String>,
    /// Input files with their SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    /// `complete`, or `failed` with partial outputs.
    pub status: String,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seeds: Vec<u64>) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        Ok(Self {
            schema: SCHEMA.to_string(),
            version: VERSION,
            command: command.to_string(),
            config_hash: hash_value(&config),
            config,
            seeds,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            conventions: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            status: "complete".to_string(),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = hex(&Sha256::digest(std::fs::read(path)?));
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if m.schema != SCHEMA {
            return Err(Error::Malformed {
                what: "manifest",
                message: format!("schema `{}`", m.schema),
            });
        }
        if m.version != VERSION {
            return Err(Error::UnsupportedVersion {
                found: m.version,
                supported: VERSION,
            });
        }
        Ok(m)
    }
}

/// Hex SHA-256 of the compact JSON encoding (object keys sorted by serde_json).
pub fn hash_value(value: &Value) -> String {
    hex(&Sha256::digest(value.to_string().as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    Ok(hash_value(&serde_json::to_value(config)?))
}
