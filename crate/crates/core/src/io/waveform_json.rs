//! Versioned JSON encoding of [`PulseWaveform`].
//!
//! Phases are written with the shortest decimal that round-trips, so a
//! write followed by a read reproduces every field bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::waveform::{PulseMetadata, PulseWaveform};

pub const SCHEMA: &str = "sordor-waveform";
pub const VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema: String,
    version: u64,
    /// rad/s
    amplitude: f64,
    /// s
    dt: f64,
    metadata: PulseMetadata,
    /// rad, one per slice
    phases: Vec<f64>,
}

pub fn to_string(w: &PulseWaveform) -> Result<String> {
    let doc = Document {
        schema: SCHEMA.to_string(),
        version: VERSION,
        amplitude: w.amplitude,
        dt: w.dt,
        metadata: w.metadata,
        phases: w.phases.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn from_str(s: &str) -> Result<PulseWaveform> {
    let value: Value = serde_json::from_str(s)?;
    let schema = value.get("schema").and_then(Value::as_str);
    if schema != Some(SCHEMA) {
        return Err(Error::Malformed {
            what: "waveform",
            message: match schema {
                Some(other) => format!("schema `{other}` is not `{SCHEMA}`"),
                None => "missing field `schema`".to_string(),
            },
        });
    }
    let version = value.get("version").and_then(Value::as_u64).ok_or_else(|| Error::Malformed {
        what: "waveform",
        message: "missing field `version`".to_string(),
    })?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }
    let doc: Document = serde_json::from_value(value).map_err(|e| Error::Malformed {
        what: "waveform",
        message: e.to_string(),
    })?;
    PulseWaveform::new(doc.phases, doc.amplitude, doc.dt, doc.metadata)
}

pub fn write(path: &Path, w: &PulseWaveform) -> Result<()> {
    write_atomic(path, to_string(w)?.as_bytes())
}

pub fn read(path: &Path) -> Result<PulseWaveform> {
    from_str(&std::fs::read_to_string(path)?)
}
