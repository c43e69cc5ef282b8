//! Line-oriented shape files in the style used by spectrometer software.
//!
//! ```text
//! # title: ...
//! # N: 100
//! # duration_us: 50
//! # max_amplitude_hz: 10000
//! # b: 2
//! # q: 0
//! # beta_rad: 3.141592653589793
//! # bandwidth_hz: 40000
//! 100.000000 123.456789012
//! ```
//!
//! Data lines are `amplitude_percent phase_degrees` with phases wrapped to
//! [0, 360).

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::waveform::{PulseMetadata, PulseWaveform};

const PHASE_DECIMALS: i32 = 9;

fn wrap_degrees(phase: f64) -> f64 {
    let scale = 10f64.powi(PHASE_DECIMALS);
    let d = (phase.to_degrees().rem_euclid(360.0) * scale).round() / scale;
    if d >= 360.0 {
        d - 360.0
    } else {
        d
    }
}

pub fn to_string(w: &PulseWaveform, title: &str) -> String {
    let m = &w.metadata;
    let mut out = String::new();
    let _ = writeln!(out, "# title: {title}");
    let _ = writeln!(out, "# N: {}", w.len());
    let _ = writeln!(out, "# duration_us: {}", w.duration() * 1e6);
    let _ = writeln!(out, "# max_amplitude_hz: {}", w.amplitude / TAU);
    let _ = writeln!(out, "# b: {}", m.b);
    let _ = writeln!(out, "# q: {}", m.q);
    let _ = writeln!(out, "# beta_rad: {}", m.beta);
    let _ = writeln!(out, "# bandwidth_hz: {}", m.bandwidth_hz);
    for &p in &w.phases {
        let _ = writeln!(out, "100.000000 {:.*}", PHASE_DECIMALS as usize, wrap_degrees(p));
    }
    out
}

fn malformed(message: impl Into<String>) -> Error {
    Error::Malformed {
        what: "shape file",
        message: message.into(),
    }
}

pub fn from_str(s: &str) -> Result<PulseWaveform> {
    let mut header = BTreeMap::new();
    let mut amplitudes = Vec::new();
    let mut phases = Vec::new();
    for (lineno, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(':') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let mut fields = line.split_whitespace().map(str::parse::<f64>);
        match (fields.next(), fields.next(), fields.next()) {
            (Some(Ok(a)), Some(Ok(p)), None) => {
                amplitudes.push(a);
                phases.push(p.to_radians());
            }
            _ => return Err(malformed(format!("line {}: expected `amplitude phase`", lineno + 1))),
        }
    }
    let num = |key: &str| -> Result<f64> {
        header
            .get(key)
            .ok_or_else(|| malformed(format!("missing header `{key}`")))?
            .parse::<f64>()
            .map_err(|e| malformed(format!("header `{key}`: {e}")))
    };
    let n = num("N")?;
    if n != phases.len() as f64 {
        return Err(Error::DimensionMismatch {
            what: "shape data lines",
            expected: n as usize,
            found: phases.len(),
        });
    }
    if phases.is_empty() {
        return Err(malformed("no data lines"));
    }
    let fraction = amplitudes[0] / 100.0;
    if amplitudes.iter().any(|&a| (a / 100.0 - fraction).abs() > 1e-6) {
        return Err(malformed("amplitude is not constant"));
    }
    let metadata = PulseMetadata {
        b: num("b")?,
        q: num("q")?,
        beta: num("beta_rad")?,
        bandwidth_hz: num("bandwidth_hz")?,
    };
    let amplitude = num("max_amplitude_hz")? * TAU * fraction;
    let dt = num("duration_us")? * 1e-6 / n;
    PulseWaveform::new(phases, amplitude, dt, metadata)
}

pub fn write(path: &Path, w: &PulseWaveform, title: &str) -> Result<()> {
    write_atomic(path, to_string(w, title).as_bytes())
}

pub fn read(path: &Path) -> Result<PulseWaveform> {
    from_str(&std::fs::read_to_string(path)?)
}
