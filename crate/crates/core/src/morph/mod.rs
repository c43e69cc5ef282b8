//! Morphic optimisation over the (Q, b) grid.
//!
//! Each grid cell is solved by starting from the solution of a neighbouring
//! cell. [`run_recipe`] drives the full staged schedule with checkpointing;
//! the pieces here (grid bookkeeping, resampling, smoothing-start
//! selection, single morph steps) are usable on their own.

mod checkpoint;
mod recipe;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::{build_ensemble, scaling_from_bandwidth, ScalingParams, TargetSet};
use crate::error::{Error, Result};
use crate::io::csv::Table;
use crate::lbfgs::Termination;
use crate::optimizer::{optimize, OptimizerSettings};
use crate::waveform::{metadata_for, unwrap_phases, PulseWaveform};

pub use checkpoint::beta_tag;
pub use recipe::{load_checkpoint, run_recipe, ChainState, RecipeConfig, RecipeReport, RunControl, StageSummary, StepRecord};

/// Grid extents. Q runs over `0, ΔQ, …, q_max`; b over `Δb, 2Δb, …, b_max`.
///
/// Spacings are restricted to multiples of 0.001 (Q) and 0.01 (b) so that
/// every cell has a unique four-digit file name.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub q_step: f64,
    pub q_max: f64,
    pub b_step: f64,
    pub b_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            q_step: 0.01,
            q_max: 1.0,
            b_step: 0.2,
            b_max: 18.0,
        }
    }
}

fn integral(x: f64) -> Option<usize> {
    let r = x.round();
    ((x - r).abs() <= 1e-9 * r.max(1.0) && r >= 0.0).then_some(r as usize)
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let q_milli = integral(self.q_step * 1000.0).filter(|&n| n > 0);
        let b_centi = integral(self.b_step * 100.0).filter(|&n| n > 0);
        if q_milli.is_none() || b_centi.is_none() {
            return Err(Error::invalid("grid steps must be positive multiples of ΔQ=0.001 and Δb=0.01"));
        }
        if !(0.0..=1.0).contains(&self.q_max) || integral(self.q_max / self.q_step).is_none() {
            return Err(Error::invalid("q_max must lie in [0, 1] and be a multiple of q_step"));
        }
        if integral(self.b_max / self.b_step).filter(|&n| n > 0).is_none() {
            return Err(Error::invalid("b_max must be a positive multiple of b_step"));
        }
        if self.b_max * 100.0 >= 9999.5 {
            return Err(Error::invalid("b_max must be below 100"));
        }
        Ok(())
    }

    fn q_milli(&self) -> usize {
        (self.q_step * 1000.0).round() as usize
    }

    fn b_centi(&self) -> usize {
        (self.b_step * 100.0).round() as usize
    }

    pub fn q_count(&self) -> usize {
        (self.q_max / self.q_step).round() as usize + 1
    }

    /// Number of b values; indices run `1..=b_count`.
    pub fn b_count(&self) -> usize {
        (self.b_max / self.b_step).round() as usize
    }

    pub fn q_value(&self, q_index: usize) -> f64 {
        (q_index * self.q_milli()) as f64 / 1000.0
    }

    pub fn b_value(&self, b_index: usize) -> f64 {
        (b_index * self.b_centi()) as f64 / 100.0
    }

    pub fn contains(&self, key: CellKey) -> bool {
        key.q < self.q_count() && (1..=self.b_count()).contains(&key.b)
    }

    /// `Q####_b####` with Q in thousandths and b in hundredths.
    pub fn cell_name(&self, key: CellKey) -> String {
        format!("Q{:04}_b{:04}", key.q * self.q_milli(), key.b * self.b_centi())
    }
}

/// Integer grid coordinates; `b` is 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub q: usize,
    pub b: usize,
}

impl CellKey {
    pub fn new(q: usize, b: usize) -> Self {
        Self { q, b }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "1a")]
    Forward,
    #[serde(rename = "1b")]
    Backward,
    #[serde(rename = "2")]
    Smoothing,
    #[serde(rename = "3a")]
    Compressed,
    #[serde(rename = "3b")]
    Expanded,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Forward,
        Stage::Backward,
        Stage::Smoothing,
        Stage::Compressed,
        Stage::Expanded,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stage::Forward => "1a",
            Stage::Backward => "1b",
            Stage::Smoothing => "2",
            Stage::Compressed => "3a",
            Stage::Expanded => "3b",
        }
    }

    pub fn index(self) -> usize {
        Stage::ALL.iter().position(|&s| s == self).unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Q + ΔQ
    Forward,
    /// Q − ΔQ
    Backward,
    /// b − Δb
    Compressed,
    /// b + Δb
    Expanded,
    /// Q ± ΔQ during the smoothing stage
    Smoothing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MorphJob {
    pub source: CellKey,
    pub destination: CellKey,
    pub direction: Direction,
}

impl MorphJob {
    pub fn validate(&self) -> Result<()> {
        let (s, d) = (self.source, self.destination);
        let ok = match self.direction {
            Direction::Forward => d.b == s.b && d.q == s.q + 1,
            Direction::Backward => d.b == s.b && d.q + 1 == s.q,
            Direction::Compressed => d.q == s.q && d.b + 1 == s.b,
            Direction::Expanded => d.q == s.q && d.b == s.b + 1,
            Direction::Smoothing => d.b == s.b && d.q.abs_diff(s.q) == 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{:?} morph cannot go from {s:?} to {d:?}",
                self.direction
            )))
        }
    }
}

/// Stored outcome of one cell optimisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub q: f64,
    pub b: f64,
    pub fidelity: f64,
    pub gradient_norm: f64,
    pub gradient_calls: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub stage: Stage,
    pub waveform: PulseWaveform,
}

/// Best result found so far for every populated cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MorphGrid {
    pub spec: GridSpec,
    pub beta: f64,
    pub bandwidth_hz: f64,
    pub cells: BTreeMap<CellKey, CellResult>,
}

impl MorphGrid {
    pub fn new(spec: GridSpec, beta: f64, bandwidth_hz: f64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            beta,
            bandwidth_hz,
            cells: BTreeMap::new(),
        })
    }

    pub fn get(&self, key: CellKey) -> Option<&CellResult> {
        self.cells.get(&key)
    }

    pub fn improves(&self, key: CellKey, fidelity: f64) -> bool {
        self.cells.get(&key).is_none_or(|c| fidelity > c.fidelity)
    }

    /// Stores `result` if the cell is empty or `result` has strictly higher
    /// fidelity. Returns whether the cell changed.
    pub fn offer(&mut self, key: CellKey, result: CellResult) -> bool {
        if !self.improves(key, result.fidelity) {
            return false;
        }
        self.cells.insert(key, result);
        true
    }

    /// Fidelity along Q at fixed b, if the whole row is populated.
    pub fn profile(&self, b_index: usize) -> Option<Vec<f64>> {
        (0..self.spec.q_count())
            .map(|q| self.get(CellKey::new(q, b_index)).map(|c| c.fidelity))
            .collect()
    }

    /// Populated pairs `(p1, p2)` with `b1 = m·b2` and `Q2 = m·Q1`.
    pub fn matched_cells(&self, m: f64) -> Vec<(CellKey, CellKey)> {
        let mut out = Vec::new();
        for &k1 in self.cells.keys() {
            for &k2 in self.cells.keys() {
                let b_ok = (k1.b as f64 - m * k2.b as f64).abs() < 1e-9;
                let q_ok = (k2.q as f64 - m * k1.q as f64).abs() < 1e-9;
                if b_ok && q_ok {
                    out.push((k1, k2));
                }
            }
        }
        out
    }

    /// Fidelity surface, one row per populated cell.
    pub fn surface(&self) -> Table {
        let mut t = Table::new(["q", "b", "fidelity", "infidelity", "gradient_calls", "stage_index"]);
        for c in self.cells.values() {
            t.push(vec![
                c.q,
                c.b,
                c.fidelity,
                1.0 - c.fidelity,
                c.gradient_calls as f64,
                c.stage.index() as f64,
            ])
            .expect("fixed width");
        }
        t
    }
}

/// Linear interpolation of the unwrapped phases onto `n_new` slices with the
/// first and last slices aligned; amplitude, step and metadata follow
/// `scaling`.
pub fn resample_waveform(w: &PulseWaveform, n_new: usize, scaling: &ScalingParams) -> Result<PulseWaveform> {
    if n_new < 2 {
        return Err(Error::invalid("resampling needs at least two slices"));
    }
    let n = w.len();
    let phases = if n_new == n {
        w.phases.clone()
    } else if n == 1 {
        vec![w.phases[0]; n_new]
    } else {
        let src = unwrap_phases(&w.phases);
        (0..n_new)
            .map(|k| {
                let x = (k * (n - 1)) as f64 / (n_new - 1) as f64;
                let i = (x.floor() as usize).min(n - 2);
                let frac = x - i as f64;
                src[i] + frac * (src[i + 1] - src[i])
            })
            .collect()
    };
    let metadata = metadata_for(scaling, w.metadata.q);
    let dt = scaling.duration / n_new as f64;
    PulseWaveform::new(phases, scaling.amplitude, dt, metadata)
}

/// A smoothing-stage start point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingStart {
    pub q_index: usize,
    /// [`Direction::Forward`] or [`Direction::Backward`].
    pub direction: Direction,
    /// |ΔF/ΔQ| at the extremum.
    pub magnitude: f64,
}

/// Picks the `count` largest local maxima of |ΔF/ΔQ| (centred differences)
/// in a fully populated profile.
///
/// Endpoints have no centred difference and are never starts; a maximum
/// must have a neighbour on each side. Runs of equal values count as one
/// maximum, started from the run's highest-fidelity cell and morphed
/// towards falling fidelity.
pub fn smoothing_starts(profile: &[f64], q_step: f64, count: usize) -> Vec<SmoothingStart> {
    let n = profile.len();
    if n < 3 || count == 0 {
        return Vec::new();
    }
    let d: Vec<f64> = (1..n - 1)
        .map(|j| (profile[j + 1] - profile[j - 1]) / (2.0 * q_step))
        .collect();
    let mag: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let scale = mag.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * scale;

    let mut found = Vec::new();
    let mut start = 0;
    while start < mag.len() {
        let mut end = start;
        while end + 1 < mag.len() && same(mag[end + 1], mag[start]) {
            end += 1;
        }
        let interior = start > 0 && end + 1 < mag.len();
        if interior && mag[start] > mag[start - 1] && mag[start] > mag[end + 1] && !same(mag[start], 0.0) {
            // mag index i is profile index i + 1
            let q_index = (start + 1..=end + 1)
                .max_by(|&a, &b| profile[a].total_cmp(&profile[b]).then(b.cmp(&a)))
                .unwrap();
            let direction = if d[q_index - 1] > 0.0 {
                Direction::Backward
            } else {
                Direction::Forward
            };
            found.push(SmoothingStart {
                q_index,
                direction,
                magnitude: mag[start],
            });
        }
        start = end + 1;
    }
    found.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.q_index.cmp(&b.q_index)));
    found.truncate(count);
    found
}

/// Problem-wide settings shared by every morph step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphSettings {
    pub beta: f64,
    pub bandwidth_hz: f64,
    /// Ensemble size override; `None` uses `1 + ⌈10b⌉`.
    pub members: Option<usize>,
    pub optimizer: OptimizerSettings,
}

/// Optimises `start` for cell `destination`, resampling first when the
/// slice count differs.
pub fn optimize_cell(
    start: &PulseWaveform,
    destination: CellKey,
    spec: &GridSpec,
    settings: &MorphSettings,
    stage: Stage,
) -> Result<CellResult> {
    if !spec.contains(destination) {
        return Err(Error::invalid(format!("cell {destination:?} outside the grid")));
    }
    let (q, b) = (spec.q_value(destination.q), spec.b_value(destination.b));
    let scaling = scaling_from_bandwidth(b, settings.beta, settings.bandwidth_hz)?;
    let mut initial = resample_waveform(start, scaling.slice_count.max(2), &scaling)?;
    if scaling.slice_count < 2 {
        initial = PulseWaveform::constant(&scaling, q, start.phases[0]);
    }
    initial.metadata.q = q;
    let ensemble = build_ensemble(b, settings.bandwidth_hz, settings.members)?;
    let targets = TargetSet::build(&ensemble, q, settings.beta)?;
    let r = optimize(&initial, &ensemble, &targets, &settings.optimizer)?;
    Ok(CellResult {
        q,
        b,
        fidelity: r.report.fidelity,
        gradient_norm: r.report.gradient_norm.unwrap_or(f64::NAN),
        gradient_calls: r.gradient_evaluations,
        iterations: r.iterations,
        termination: r.termination,
        stage,
        waveform: r.waveform,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub result: CellResult,
    pub improved: bool,
}

/// Runs one morph from the stored source cell and offers the result to the
/// destination.
pub fn morph_step(grid: &mut MorphGrid, job: &MorphJob, settings: &MorphSettings, stage: Stage) -> Result<StepOutcome> {
    job.validate()?;
    let source = grid.get(job.source).ok_or_else(|| {
        Error::MissingDependency(format!("source cell {} is not populated", grid.spec.cell_name(job.source)))
    })?;
    let result = optimize_cell(&source.waveform, job.destination, &grid.spec, settings, stage)?;
    let improved = grid.offer(job.destination, result.clone());
    Ok(StepOutcome { result, improved })
}
