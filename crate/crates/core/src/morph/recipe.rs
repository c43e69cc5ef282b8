//! The staged morphing schedule with crash-safe checkpointing.
//!
//! Work is organised in chains: ordered lists of morph steps where each
//! step starts from the waveform the chain produced last. A chain journals
//! its progress (next step, carried waveform, pending cell write) before
//! touching the grid, so a restarted run replays exactly the decisions an
//! uninterrupted run would make.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{read_json, write_json, Layout};
use super::{optimize_cell, smoothing_starts, CellKey, CellResult, Direction, GridSpec, MorphGrid, MorphSettings, SmoothingStart, Stage};
use crate::ensemble::scaling_from_bandwidth;
use crate::error::{Error, Result};
use crate::io::manifest::config_hash;
use crate::lbfgs::Termination;
use crate::optimizer::OptimizerSettings;
use crate::waveform::PulseWaveform;

const MANIFEST_SCHEMA: &str = "sordor-morph-checkpoint";
const MANIFEST_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeConfig {
    pub beta: f64,
    pub bandwidth_hz: f64,
    pub grid: GridSpec,
    /// Ensemble size override; `None` uses `1 + ⌈10b⌉`.
    pub members: Option<usize>,
    pub optimizer: OptimizerSettings,
    /// Seed of the jittered chirp that starts stage 1a.
    pub seed: u64,
    /// Jitter amplitude (rad) of that start.
    pub seed_perturbation: f64,
    pub smoothing_count: usize,
    /// Stages to run; must follow the canonical order.
    pub stages: Vec<Stage>,
}

impl Default for RecipeConfig {
    fn default() -> Self {
        Self {
            beta: std::f64::consts::PI,
            bandwidth_hz: 40e3,
            grid: GridSpec::default(),
            members: None,
            optimizer: OptimizerSettings::default(),
            seed: 0,
            seed_perturbation: 0.1,
            smoothing_count: 11,
            stages: Stage::ALL.to_vec(),
        }
    }
}

impl RecipeConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.beta.is_finite() && self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::invalid("beta and bandwidth must be finite, bandwidth positive"));
        }
        if self.stages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("stages must be distinct and in order 1a, 1b, 2, 3a, 3b"));
        }
        Ok(())
    }

    fn settings(&self) -> MorphSettings {
        MorphSettings {
            beta: self.beta,
            bandwidth_hz: self.bandwidth_hz,
            members: self.members,
            optimizer: self.optimizer,
        }
    }
}

/// Execution limits that do not affect results.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunControl {
    /// Stop with [`Error::Interrupted`] after this many optimisations.
    pub max_optimizations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub q: f64,
    pub b: f64,
    pub fidelity: f64,
    pub gradient_calls: usize,
    pub termination: Termination,
    pub improved: bool,
}

/// Journal of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub id: String,
    pub stage: Stage,
    pub next_step: usize,
    pub carried: Option<PulseWaveform>,
    /// Cell write decided by the last step; re-offered on resume.
    pub pending: Option<(CellKey, CellResult)>,
    pub finished: bool,
    pub records: Vec<StepRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: Stage,
    pub chains: usize,
    pub optimizations: usize,
    pub gradient_calls: usize,
    pub improved_cells: usize,
    /// Mean fidelity over populated cells after the stage.
    pub mean_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RecipeManifest {
    schema: String,
    version: u64,
    config_hash: String,
    config: RecipeConfig,
    seeds: Vec<u64>,
    /// Number of entries of `config.stages` already completed.
    stage_cursor: usize,
    summaries: Vec<StageSummary>,
    smoothing_starts: Option<Vec<SmoothingStart>>,
}

#[derive(Clone, Debug)]
pub struct RecipeReport {
    pub grid: MorphGrid,
    /// In execution order.
    pub summaries: Vec<StageSummary>,
    pub chains: Vec<ChainState>,
}

enum Source {
    Seed,
    Cell(CellKey),
}

struct ChainPlan {
    id: String,
    stage: Stage,
    source: Source,
    steps: Vec<CellKey>,
    stop_when_not_improved: bool,
}

struct Runner<'a> {
    config: &'a RecipeConfig,
    settings: MorphSettings,
    layout: Layout,
    grid: Mutex<MorphGrid>,
    budget: Option<AtomicUsize>,
    done: AtomicUsize,
}

impl Runner<'_> {
    fn take_budget(&self) -> Result<()> {
        if let Some(left) = &self.budget {
            let ok = left
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok();
            if !ok {
                return Err(Error::Interrupted {
                    completed: self.done.load(Ordering::SeqCst),
                });
            }
        }
        Ok(())
    }

    /// Offers a result to the grid and persists it if it was taken.
    fn commit(&self, key: CellKey, result: &CellResult) -> Result<bool> {
        let mut grid = self.grid.lock().unwrap();
        if !grid.improves(key, result.fidelity) {
            return Ok(false);
        }
        self.layout.write_cell(&grid.spec, key, result)?;
        grid.offer(key, result.clone());
        Ok(true)
    }

    fn load_chain(&self, plan: &ChainPlan) -> Result<ChainState> {
        let path = self.layout.chain(&plan.id);
        if path.exists() {
            let state: ChainState = read_json(&path)?;
            if state.id != plan.id || state.stage != plan.stage || state.next_step > plan.steps.len() {
                return Err(Error::CorruptCheckpoint {
                    path,
                    message: "chain journal does not match the recipe".to_string(),
                });
            }
            return Ok(state);
        }
        Ok(ChainState {
            id: plan.id.clone(),
            stage: plan.stage,
            next_step: 0,
            carried: None,
            pending: None,
            finished: plan.steps.is_empty(),
            records: Vec::new(),
        })
    }

    fn initial_waveform(&self, plan: &ChainPlan) -> Result<PulseWaveform> {
        match plan.source {
            Source::Seed => {
                let spec = &self.config.grid;
                let b = spec.b_value(spec.b_count());
                let scaling = scaling_from_bandwidth(b, self.config.beta, self.config.bandwidth_hz)?;
                Ok(PulseWaveform::chirp_seed(
                    &scaling,
                    0.0,
                    self.config.seed_perturbation,
                    self.config.seed,
                ))
            }
            Source::Cell(key) => {
                let grid = self.grid.lock().unwrap();
                grid.get(key).map(|c| c.waveform.clone()).ok_or_else(|| {
                    Error::MissingDependency(format!("chain {} needs cell {}", plan.id, grid.spec.cell_name(key)))
                })
            }
        }
    }

    fn run_chain(&self, plan: &ChainPlan) -> Result<ChainState> {
        let mut state = self.load_chain(plan)?;
        if let Some((key, result)) = &state.pending {
            self.commit(*key, result)?;
        }
        if state.finished {
            return Ok(state);
        }
        let mut carried = match state.carried.take() {
            Some(w) => w,
            None => self.initial_waveform(plan)?,
        };
        for step in state.next_step..plan.steps.len() {
            self.take_budget()?;
            let key = plan.steps[step];
            let result = optimize_cell(&carried, key, &self.config.grid, &self.settings, plan.stage)?;
            self.done.fetch_add(1, Ordering::SeqCst);
            let improved = self.grid.lock().unwrap().improves(key, result.fidelity);
            state.records.push(StepRecord {
                q: result.q,
                b: result.b,
                fidelity: result.fidelity,
                gradient_calls: result.gradient_calls,
                termination: result.termination,
                improved,
            });
            state.next_step = step + 1;
            state.finished = state.next_step == plan.steps.len() || (plan.stop_when_not_improved && !improved);
            state.pending = improved.then(|| (key, result.clone()));
            carried = result.waveform.clone();
            state.carried = Some(carried.clone());
            write_json(&self.layout.chain(&plan.id), &state)?;
            if improved {
                self.commit(key, &result)?;
            }
            if state.finished {
                break;
            }
        }
        Ok(state)
    }

    fn plans(&self, stage: Stage, starts: &[SmoothingStart]) -> Vec<ChainPlan> {
        let spec = &self.config.grid;
        let (nq, nb) = (spec.q_count(), spec.b_count());
        match stage {
            Stage::Forward => vec![ChainPlan {
                id: "1a".into(),
                stage,
                source: Source::Seed,
                steps: (0..nq).map(|q| CellKey::new(q, nb)).collect(),
                stop_when_not_improved: false,
            }],
            Stage::Backward => vec![ChainPlan {
                id: "1b".into(),
                stage,
                source: Source::Cell(CellKey::new(nq - 1, nb)),
                steps: (0..nq - 1).rev().map(|q| CellKey::new(q, nb)).collect(),
                stop_when_not_improved: false,
            }],
            Stage::Smoothing => starts
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let steps = match s.direction {
                        Direction::Forward => (s.q_index + 1..nq).map(|q| CellKey::new(q, nb)).collect(),
                        _ => (0..s.q_index).rev().map(|q| CellKey::new(q, nb)).collect(),
                    };
                    ChainPlan {
                        id: format!("2_{i:02}"),
                        stage,
                        source: Source::Cell(CellKey::new(s.q_index, nb)),
                        steps,
                        stop_when_not_improved: true,
                    }
                })
                .collect(),
            Stage::Compressed => (0..nq)
                .map(|q| ChainPlan {
                    id: format!("3a_Q{:04}", q),
                    stage,
                    source: Source::Cell(CellKey::new(q, nb)),
                    steps: (1..nb).rev().map(|b| CellKey::new(q, b)).collect(),
                    stop_when_not_improved: false,
                })
                .collect(),
            Stage::Expanded => (0..nq)
                .map(|q| ChainPlan {
                    id: format!("3b_Q{:04}", q),
                    stage,
                    source: Source::Cell(CellKey::new(q, 1)),
                    steps: (2..=nb).map(|b| CellKey::new(q, b)).collect(),
                    stop_when_not_improved: false,
                })
                .collect(),
        }
    }

    fn run_stage(&self, stage: Stage, starts: &[SmoothingStart]) -> Result<(StageSummary, Vec<ChainState>)> {
        let plans = self.plans(stage, starts);
        let states: Vec<ChainState> = match stage {
            // rows are disjoint, so row chains cannot race on a cell
            Stage::Compressed | Stage::Expanded => plans.par_iter().map(|p| self.run_chain(p)).collect::<Result<_>>()?,
            // smoothing chains can overlap; run them in start order
            _ => plans.iter().map(|p| self.run_chain(p)).collect::<Result<_>>()?,
        };
        let grid = self.grid.lock().unwrap();
        let records = states.iter().flat_map(|s| &s.records);
        let summary = StageSummary {
            stage,
            chains: states.len(),
            optimizations: records.clone().count(),
            gradient_calls: records.clone().map(|r| r.gradient_calls).sum(),
            improved_cells: records.filter(|r| r.improved).count(),
            mean_fidelity: grid.cells.values().map(|c| c.fidelity).sum::<f64>() / grid.cells.len().max(1) as f64,
        };
        Ok((summary, states))
    }
}

fn read_manifest(path: &Path) -> Result<RecipeManifest> {
    let m: RecipeManifest = read_json(path)?;
    if m.schema != MANIFEST_SCHEMA || m.version != MANIFEST_VERSION {
        return Err(Error::CorruptCheckpoint {
            path: path.to_path_buf(),
            message: format!("unexpected schema {} v{}", m.schema, m.version),
        });
    }
    Ok(m)
}

/// Runs (or resumes) the recipe with checkpoints under `root`.
///
/// A directory holding a checkpoint of a different configuration is
/// refused; unreadable checkpoint files fail with
/// [`Error::CorruptCheckpoint`].
pub fn run_recipe(config: &RecipeConfig, root: &Path, control: RunControl) -> Result<RecipeReport> {
    config.validate()?;
    let layout = Layout::new(root, config.beta);
    let hash = config_hash(config)?;
    let manifest_path = layout.manifest();
    let mut manifest = if manifest_path.exists() {
        let m = read_manifest(&manifest_path)?;
        if m.config_hash != hash {
            return Err(Error::invalid(format!(
                "{} holds a checkpoint of a different configuration",
                root.display()
            )));
        }
        m
    } else {
        let m = RecipeManifest {
            schema: MANIFEST_SCHEMA.to_string(),
            version: MANIFEST_VERSION,
            config_hash: hash,
            config: config.clone(),
            seeds: vec![config.seed],
            stage_cursor: 0,
            summaries: Vec::new(),
            smoothing_starts: None,
        };
        write_json(&manifest_path, &m)?;
        m
    };

    let mut grid = MorphGrid::new(config.grid, config.beta, config.bandwidth_hz)?;
    layout.load_cells(&mut grid)?;
    let runner = Runner {
        config,
        settings: config.settings(),
        layout,
        grid: Mutex::new(grid),
        budget: control.max_optimizations.map(AtomicUsize::new),
        done: AtomicUsize::new(0),
    };

    let mut chains = Vec::new();
    for (i, &stage) in config.stages.iter().enumerate() {
        let starts = if stage == Stage::Smoothing {
            if manifest.smoothing_starts.is_none() {
                let grid = runner.grid.lock().unwrap();
                let profile = grid.profile(config.grid.b_count()).ok_or_else(|| {
                    Error::MissingDependency("smoothing needs a fully populated b_max row".to_string())
                })?;
                manifest.smoothing_starts = Some(smoothing_starts(&profile, config.grid.q_step, config.smoothing_count));
                write_json(&manifest_path, &manifest)?;
            }
            manifest.smoothing_starts.clone().unwrap_or_default()
        } else {
            Vec::new()
        };
        if i < manifest.stage_cursor {
            // completed earlier; reload journals for the report
            for plan in runner.plans(stage, &starts) {
                chains.push(runner.load_chain(&plan)?);
            }
            continue;
        }
        let (summary, states) = runner.run_stage(stage, &starts)?;
        chains.extend(states);
        manifest.summaries.push(summary);
        manifest.stage_cursor = i + 1;
        write_json(&manifest_path, &manifest)?;
    }

    Ok(RecipeReport {
        grid: runner.grid.into_inner().unwrap(),
        summaries: manifest.summaries,
        chains,
    })
}

/// Reads a checkpoint directory without running anything.
pub fn load_checkpoint(root: &Path) -> Result<(RecipeConfig, MorphGrid, Vec<StageSummary>)> {
    let manifest_path = root.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::MissingDependency(format!("no checkpoint manifest in {}", root.display())));
    }
    let m = read_manifest(&manifest_path)?;
    let mut grid = MorphGrid::new(m.config.grid, m.config.beta, m.config.bandwidth_hz)?;
    Layout::new(root, m.config.beta).load_cells(&mut grid)?;
    Ok((m.config, grid, m.summaries))
}
