//! Subcommands of the `sordor` binary.
//!
//! Every command writes a manifest (`<command>.manifest.json`, or
//! `<waveform stem>.manifest.json` for `optimize`) into its output
//! directory, including on failure with `status` set to `failed: …`.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use crate::chirp::{chirp_residual_with, slice_midpoints, ChirpReference};
use crate::ensemble::{build_ensemble, scaling_from_bandwidth, TargetSet};
use crate::error::Result;
use crate::grape::fidelity_of;
use crate::io::csv::Table;
use crate::io::manifest::RunManifest;
use crate::io::{shape, waveform_json};
use crate::lbfgs::Termination;
use crate::morph::{load_checkpoint, run_recipe, GridSpec, MorphGrid, RecipeConfig, RunControl, Stage, StageSummary};
use crate::optimizer::{optimize, IterationRecord, OptimizerSettings};
use crate::sequence::{bloch_trajectory, sequence_fidelity, BlochState, SequenceSpec};
use crate::units::{parse_angle, to_hz};
use crate::waveform::{unwrap_phases, PulseWaveform};

fn angle(s: &str) -> std::result::Result<f64, String> {
    parse_angle(s).map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug, Clone, Serialize)]
pub enum Command {
    /// Optimise a single (Q, b) cell.
    Optimize(OptimizeArgs),
    /// Run or resume the full morphing recipe.
    Morph(MorphArgs),
    /// Simulate a pulse sequence and write final Bloch vectors per offset.
    Simulate(SimulateArgs),
    /// Fidelity of one pulse as a function of offset.
    Profile(ProfileArgs),
    /// Convert a waveform to a shape file.
    Export(ExportArgs),
    /// Fidelity surface of a recipe checkpoint.
    GridReport(GridReportArgs),
    /// Phase residual of a pulse relative to the matched chirp.
    ChirpCompare(ChirpArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OptimizeArgs {
    /// Bandwidth factor b = Ω·T.
    #[arg(long)]
    pub b: f64,
    /// Quadratic dispersion coefficient.
    #[arg(long = "q", visible_alias = "Q", default_value_t = 0.0)]
    pub q: f64,
    /// Rotation angle (`pi`, `pi/2` or rad).
    #[arg(long, default_value = "pi", value_parser = angle)]
    pub beta: f64,
    #[arg(long, default_value_t = 40e3)]
    pub bandwidth_hz: f64,
    /// Ensemble size; defaults to 1 + ⌈10b⌉.
    #[arg(long)]
    pub members: Option<usize>,
    /// Seed of the jittered chirp start.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Jitter amplitude of the chirp start (rad).
    #[arg(long, default_value_t = 0.1)]
    pub perturbation: f64,
    /// Start from this waveform JSON instead of a chirp (resampled to b).
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    /// Gradient-norm tolerance; defaults to the b-dependent schedule.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// File name of the optimised waveform inside `--out`.
    #[arg(long, default_value = "waveform.json")]
    pub name: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MorphArgs {
    /// Recipe configuration JSON; overrides every other recipe flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "pi", value_parser = angle)]
    pub beta: f64,
    #[arg(long, default_value_t = 40e3)]
    pub bandwidth_hz: f64,
    #[arg(long, default_value_t = 18.0)]
    pub b_max: f64,
    #[arg(long, default_value_t = 0.2)]
    pub b_step: f64,
    #[arg(long, default_value_t = 0.01)]
    pub q_step: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q_max: f64,
    #[arg(long)]
    pub members: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub perturbation: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 11)]
    pub smoothing_count: usize,
    /// Stop after this many optimisations (the run resumes when repeated).
    #[arg(long)]
    pub stop_after: Option<usize>,
    /// Checkpoint and report directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl MorphArgs {
    pub fn recipe(&self) -> Result<RecipeConfig> {
        if let Some(path) = &self.config {
            return Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?);
        }
        Ok(RecipeConfig {
            beta: self.beta,
            bandwidth_hz: self.bandwidth_hz,
            grid: GridSpec {
                q_step: self.q_step,
                q_max: self.q_max,
                b_step: self.b_step,
                b_max: self.b_max,
            },
            members: self.members,
            optimizer: OptimizerSettings {
                max_iterations: self.max_iterations,
                ..Default::default()
            },
            seed: self.seed,
            seed_perturbation: self.perturbation,
            smoothing_count: self.smoothing_count,
            stages: Stage::ALL.to_vec(),
        })
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// `single`, `hahn`, `inept` or `perfect-echo`.
    #[arg(long)]
    pub sequence: String,
    /// Waveform JSON files: excitation pulse first, then refocusing pulse.
    #[arg(long, value_delimiter = ',', required = true)]
    pub pulses: Vec<PathBuf>,
    /// Replace every pulse by its ideal target rotation.
    #[arg(long)]
    pub ideal: bool,
    /// Offset grid bandwidth factor; defaults to the first pulse's b.
    #[arg(long)]
    pub b: Option<f64>,
    /// Offset grid bandwidth; defaults to the first pulse's.
    #[arg(long)]
    pub bandwidth_hz: Option<f64>,
    #[arg(long)]
    pub members: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ProfileArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// Number of offsets, evenly spaced over the design band.
    #[arg(long, default_value_t = 451)]
    pub members: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Shape,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExportArgs {
    #[arg(long, value_enum, default_value = "shape")]
    pub format: ExportFormat,
    #[arg(long)]
    pub file: PathBuf,
    /// Title header; defaults to the input file stem.
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridReportArgs {
    /// Recipe checkpoint directory.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ChirpArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// Chirp sweep Ω_c in Hz; defaults to (A/2π)²·T.
    #[arg(long)]
    pub sweep_hz: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Runs `body`, then writes the manifest whatever the outcome.
fn with_manifest<A: Serialize>(
    command: &str,
    args: &A,
    seeds: Vec<u64>,
    out: &Path,
    file_name: &str,
    body: impl FnOnce(&mut RunManifest) -> Result<()>,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new(command, args, seeds)?;
    let result = body(&mut manifest);
    if let Err(e) = &result {
        manifest.status = format!("failed: {e}");
    }
    manifest.write(&out.join(file_name))?;
    result
}

/// Manifest file name used by `command`.
pub fn manifest_name(command: &Command) -> String {
    let (name, _) = describe(command);
    name
}

fn describe(command: &Command) -> (String, Vec<u64>) {
    match command {
        Command::Optimize(a) => {
            let stem = Path::new(&a.name).file_stem().map(|s| s.to_string_lossy().into_owned());
            (format!("{}.manifest.json", stem.unwrap_or_default()), vec![a.seed])
        }
        Command::Morph(a) => ("morph.manifest.json".into(), vec![a.seed]),
        Command::Simulate(_) => ("simulate.manifest.json".into(), vec![]),
        Command::Profile(_) => ("profile.manifest.json".into(), vec![]),
        Command::Export(_) => ("export.manifest.json".into(), vec![]),
        Command::GridReport(_) => ("grid-report.manifest.json".into(), vec![]),
        Command::ChirpCompare(_) => ("chirp-compare.manifest.json".into(), vec![]),
    }
}

pub fn run(command: &Command) -> Result<()> {
    let (file, seeds) = describe(command);
    match command {
        Command::Optimize(a) => with_manifest("optimize", a, seeds, &a.out, &file, |m| cmd_optimize(a, m)),
        Command::Morph(a) => with_manifest("morph", a, seeds, &a.out, &file, |m| cmd_morph(a, m)),
        Command::Simulate(a) => with_manifest("simulate", a, seeds, &a.out, &file, |m| cmd_simulate(a, m)),
        Command::Profile(a) => with_manifest("profile", a, seeds, &a.out, &file, |m| cmd_profile(a, m)),
        Command::Export(a) => with_manifest("export", a, seeds, &a.out, &file, |m| cmd_export(a, m)),
        Command::GridReport(a) => with_manifest("grid-report", a, seeds, &a.out, &file, |m| cmd_grid_report(a, m)),
        Command::ChirpCompare(a) => with_manifest("chirp-compare", a, seeds, &a.out, &file, |m| cmd_chirp(a, m)),
    }
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    b: f64,
    q: f64,
    beta: f64,
    fidelity: f64,
    gradient_norm: Option<f64>,
    iterations: usize,
    gradient_evaluations: usize,
    termination: Termination,
    per_member: &'a [f64],
    trace: &'a [IterationRecord],
}

fn cmd_optimize(a: &OptimizeArgs, m: &mut RunManifest) -> Result<()> {
    let scaling = scaling_from_bandwidth(a.b, a.beta, a.bandwidth_hz)?;
    let mut initial = match &a.init {
        Some(path) => {
            m.add_input(path)?;
            let w = waveform_json::read(path)?;
            crate::morph::resample_waveform(&w, scaling.slice_count, &scaling)?
        }
        None => PulseWaveform::chirp_seed(&scaling, a.q, a.perturbation, a.seed),
    };
    initial.metadata.q = a.q;
    let ensemble = build_ensemble(a.b, a.bandwidth_hz, a.members)?;
    let targets = TargetSet::build(&ensemble, a.q, a.beta)?;
    let settings = OptimizerSettings {
        max_iterations: a.max_iterations,
        tolerance: a.tolerance,
        ..Default::default()
    };
    let r = optimize(&initial, &ensemble, &targets, &settings)?;

    let wave_path = a.out.join(&a.name);
    waveform_json::write(&wave_path, &r.waveform)?;
    m.add_output(&wave_path);
    let report = OptimizeReport {
        b: a.b,
        q: a.q,
        beta: a.beta,
        fidelity: r.report.fidelity,
        gradient_norm: r.report.gradient_norm,
        iterations: r.iterations,
        gradient_evaluations: r.gradient_evaluations,
        termination: r.termination,
        per_member: &r.report.per_member,
        trace: &r.trace,
    };
    let report_path = a.out.join("report.json");
    crate::io::write_atomic(&report_path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    m.add_output(&report_path);
    println!(
        "b={} Q={} F={:.6} iterations={} gradient calls={} ({:?})",
        a.b, a.q, r.report.fidelity, r.iterations, r.gradient_evaluations, r.termination
    );
    Ok(())
}

fn stage_table(summaries: &[StageSummary]) -> Table {
    let mut t = Table::new([
        "stage_index",
        "chains",
        "optimizations",
        "gradient_calls",
        "improved_cells",
        "mean_fidelity",
    ]);
    for s in summaries {
        t.push(vec![
            s.stage.index() as f64,
            s.chains as f64,
            s.optimizations as f64,
            s.gradient_calls as f64,
            s.improved_cells as f64,
            s.mean_fidelity,
        ])
        .expect("fixed width");
    }
    t
}

fn write_grid_reports(grid: &MorphGrid, summaries: &[StageSummary], out: &Path, m: &mut RunManifest) -> Result<()> {
    let surface = out.join("surface.csv");
    grid.surface().write(&surface)?;
    m.add_output(&surface);
    let stages = out.join("stages.csv");
    stage_table(summaries).write(&stages)?;
    m.add_output(&stages);
    Ok(())
}

fn cmd_morph(a: &MorphArgs, m: &mut RunManifest) -> Result<()> {
    let config = a.recipe()?;
    if let Some(path) = &a.config {
        m.add_input(path)?;
    }
    m.seeds = vec![config.seed];
    m.config = serde_json::json!({ "args": a, "recipe": config });
    let control = RunControl {
        max_optimizations: a.stop_after,
    };
    let report = run_recipe(&config, &a.out, control)?;
    for s in &report.summaries {
        println!(
            "stage {:>2}: {} chains, {} optimisations, {} gradient calls, {} cells improved, mean F {:.6}",
            s.stage.label(),
            s.chains,
            s.optimizations,
            s.gradient_calls,
            s.improved_cells,
            s.mean_fidelity
        );
    }
    write_grid_reports(&report.grid, &report.summaries, &a.out, m)
}

fn load_pulses(paths: &[PathBuf], m: &mut RunManifest) -> Result<Vec<PulseWaveform>> {
    paths
        .iter()
        .map(|p| {
            m.add_input(p)?;
            waveform_json::read(p)
        })
        .collect()
}

fn cmd_simulate(a: &SimulateArgs, m: &mut RunManifest) -> Result<()> {
    let pulses = load_pulses(&a.pulses, m)?;
    let mut sequence = SequenceSpec::named(&a.sequence)?;
    if a.ideal {
        sequence = sequence.idealized();
    }
    let first = pulses[0].metadata;
    let b = a.b.unwrap_or(first.b);
    let ensemble = build_ensemble(b, a.bandwidth_hz.unwrap_or(first.bandwidth_hz), a.members)?;

    let states = [("x", BlochState::X), ("y", BlochState::Y), ("z", BlochState::Z)];
    let mut header = vec!["offset_hz".to_string()];
    for (name, _) in &states {
        for c in ["x", "y", "z"] {
            header.push(format!("{c}_from_{name}"));
        }
    }
    let runs = states
        .iter()
        .map(|(_, s)| bloch_trajectory(&sequence, &pulses, *s, &ensemble))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(header);
    for (k, &w) in ensemble.offsets.iter().enumerate() {
        let mut row = vec![to_hz(w)];
        for run in &runs {
            row.extend(run.finals[k].as_array());
        }
        table.push(row)?;
    }
    let bloch = a.out.join("bloch.csv");
    table.write(&bloch)?;
    m.add_output(&bloch);
    for w in &runs[0].warnings {
        eprintln!("warning: {w}");
        m.warnings.push(w.clone());
    }

    let report = sequence_fidelity(&sequence, &sequence.idealized(), &pulses, &ensemble)?;
    let mut ft = Table::new(["offset_hz", "fidelity"]);
    for (&w, &f) in ensemble.offsets.iter().zip(&report.per_member) {
        ft.push(vec![to_hz(w), f])?;
    }
    let fid = a.out.join("fidelity.csv");
    ft.write(&fid)?;
    m.add_output(&fid);
    println!("{}: {} offsets, sequence F={:.6}", a.sequence, ensemble.member_count(), report.fidelity);
    Ok(())
}

fn cmd_profile(a: &ProfileArgs, m: &mut RunManifest) -> Result<()> {
    m.add_input(&a.file)?;
    let w = waveform_json::read(&a.file)?;
    let md = w.metadata;
    let ensemble = build_ensemble(md.b, md.bandwidth_hz, Some(a.members))?;
    let targets = TargetSet::build(&ensemble, md.q, md.beta)?;
    let report = fidelity_of(&w, &ensemble, &targets)?;
    let mut t = Table::new(["offset_hz", "alpha_rad", "fidelity"]);
    for ((&off, &alpha), &f) in ensemble.offsets.iter().zip(&targets.alphas).zip(&report.per_member) {
        t.push(vec![to_hz(off), alpha, f])?;
    }
    let path = a.out.join("profile.csv");
    t.write(&path)?;
    m.add_output(&path);
    println!("{} offsets, mean F={:.6}", a.members, report.fidelity);
    Ok(())
}

fn cmd_export(a: &ExportArgs, m: &mut RunManifest) -> Result<()> {
    m.add_input(&a.file)?;
    let w = waveform_json::read(&a.file)?;
    let stem = a
        .file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pulse".to_string());
    let title = a.title.clone().unwrap_or_else(|| stem.clone());
    let path = match a.format {
        ExportFormat::Shape => {
            let path = a.out.join(format!("{stem}.shape"));
            shape::write(&path, &w, &title)?;
            path
        }
    };
    m.add_output(&path);
    println!("wrote {} ({} slices)", path.display(), w.len());
    Ok(())
}

fn cmd_grid_report(a: &GridReportArgs, m: &mut RunManifest) -> Result<()> {
    let (config, grid, summaries) = load_checkpoint(&a.dir)?;
    m.add_input(&a.dir.join("manifest.json"))?;
    m.seeds = vec![config.seed];
    write_grid_reports(&grid, &summaries, &a.out, m)?;
    let best = grid.cells.values().map(|c| c.fidelity).fold(f64::NAN, f64::max);
    println!("{} cells, best F={best:.6}", grid.cells.len());
    Ok(())
}

fn cmd_chirp(a: &ChirpArgs, m: &mut RunManifest) -> Result<()> {
    m.add_input(&a.file)?;
    let w = waveform_json::read(&a.file)?;
    let reference = match a.sweep_hz {
        Some(s) => ChirpReference::new(s, w.duration())?,
        None => ChirpReference::for_waveform(&w)?,
    };
    m.conventions.insert(
        "chirp_sweep".to_string(),
        format!(
            "sweep_hz = {} (default (A/2π)²·T with A/2π = {} Hz, T = {} s)",
            reference.sweep_hz,
            w.amplitude / TAU,
            w.duration()
        ),
    );
    let residual = chirp_residual_with(&w, &reference);
    let phases = unwrap_phases(&w.phases);
    let mut t = Table::new(["time_us", "phase_rad", "reference_rad", "residual_rad"]);
    for ((&time, &p), &r) in slice_midpoints(&w).iter().zip(&phases).zip(&residual) {
        t.push(vec![time * 1e6, p, reference.phase_at(time), r])?;
    }
    let path = a.out.join("chirp.csv");
    t.write(&path)?;
    m.add_output(&path);
    println!("reference sweep {:.1} Hz over {:.1} µs", reference.sweep_hz, w.duration() * 1e6);
    Ok(())
}
