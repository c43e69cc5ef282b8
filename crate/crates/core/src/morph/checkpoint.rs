//! On-disk layout of a recipe run.
//!
//! ```text
//! <root>/manifest.json
//! <root>/grid/<beta_tag>/Q####_b####.json
//! <root>/chains/<beta_tag>/<chain id>.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CellKey, CellResult, GridSpec, MorphGrid};
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const CELL_SCHEMA: &str = "sordor-cell";
pub const CELL_VERSION: u64 = 1;

/// Directory tag for a rotation angle: `pi`, `pi_2`, or milliradians.
pub fn beta_tag(beta: f64) -> String {
    use std::f64::consts::{FRAC_PI_2, PI};
    if (beta - PI).abs() < 1e-12 {
        "pi".to_string()
    } else if (beta - FRAC_PI_2).abs() < 1e-12 {
        "pi_2".to_string()
    } else {
        format!("{}mrad", (beta * 1000.0).round() as i64)
    }
}

#[derive(Serialize, Deserialize)]
struct CellFile {
    schema: String,
    version: u64,
    key: CellKey,
    result: CellResult,
}

pub(crate) struct Layout {
    pub root: PathBuf,
    pub tag: String,
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::CorruptCheckpoint {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

impl Layout {
    pub fn new(root: &Path, beta: f64) -> Self {
        Self {
            root: root.to_path_buf(),
            tag: beta_tag(beta),
        }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn grid_dir(&self) -> PathBuf {
        self.root.join("grid").join(&self.tag)
    }

    pub fn cell(&self, spec: &GridSpec, key: CellKey) -> PathBuf {
        self.grid_dir().join(format!("{}.json", spec.cell_name(key)))
    }

    pub fn chain(&self, id: &str) -> PathBuf {
        self.root.join("chains").join(&self.tag).join(format!("{id}.json"))
    }

    pub fn write_cell(&self, spec: &GridSpec, key: CellKey, result: &CellResult) -> Result<()> {
        let file = CellFile {
            schema: CELL_SCHEMA.to_string(),
            version: CELL_VERSION,
            key,
            result: result.clone(),
        };
        write_json(&self.cell(spec, key), &file)
    }

    /// Loads every stored cell, failing on anything that does not parse or
    /// does not belong to `grid`'s spec.
    pub fn load_cells(&self, grid: &mut MorphGrid) -> Result<()> {
        let dir = self.grid_dir();
        if !dir.exists() {
            return Ok(());
        }
        let mut paths: Vec<_> = fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
        paths.sort();
        for path in paths {
            let corrupt = |message: String| Error::CorruptCheckpoint {
                path: path.clone(),
                message,
            };
            let file: CellFile = read_json(&path)?;
            if file.schema != CELL_SCHEMA || file.version != CELL_VERSION {
                return Err(corrupt(format!("unexpected schema {} v{}", file.schema, file.version)));
            }
            if !grid.spec.contains(file.key) || self.cell(&grid.spec, file.key) != path {
                return Err(corrupt(format!("cell {:?} does not match its file name", file.key)));
            }
            let (q, b) = (grid.spec.q_value(file.key.q), grid.spec.b_value(file.key.b));
            if file.result.q != q || file.result.b != b || !file.result.fidelity.is_finite() {
                return Err(corrupt("stored result disagrees with its cell".to_string()));
            }
            file.result
                .waveform
                .validate()
                .map_err(|e| corrupt(format!("invalid waveform: {e}")))?;
            grid.cells.insert(file.key, file.result);
        }
        Ok(())
    }
}
