//! Quasi-Newton maximisation of the ensemble fidelity over slice phases.

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleSpec, TargetSet};
use crate::error::Result;
use crate::grape::{convergence_tolerance, evaluate, fidelity_of, FidelityReport};
use crate::lbfgs::{minimize, LbfgsSettings, Termination, TracePoint};
use crate::waveform::PulseWaveform;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub memory: usize,
    pub max_iterations: usize,
    /// Gradient-norm threshold; `None` uses [`convergence_tolerance`] of the
    /// waveform's bandwidth factor.
    pub tolerance: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search_evals: usize,
    /// Largest phase change (rad) of the first steepest-ascent trial step.
    pub initial_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            memory: 20,
            max_iterations: 2000,
            tolerance: None,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evals: 40,
            initial_step: 0.1,
        }
    }
}

impl OptimizerSettings {
    pub fn tolerance_for(&self, b: f64) -> f64 {
        self.tolerance.unwrap_or_else(|| convergence_tolerance(b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub fidelity: f64,
    pub gradient_norm: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub waveform: PulseWaveform,
    pub report: FidelityReport,
    /// Fidelity and gradient norm of every accepted iterate, initial point first.
    pub trace: Vec<IterationRecord>,
    pub gradient_evaluations: usize,
    pub iterations: usize,
    pub termination: Termination,
}

/// Maximises the ensemble fidelity starting from `initial`.
///
/// Never fails on a stalled line search; the best iterate is returned with
/// [`Termination::LineSearchFailed`].
pub fn optimize(
    initial: &PulseWaveform,
    ensemble: &EnsembleSpec,
    targets: &TargetSet,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    // surfaces dimension errors before entering the minimiser
    let first = evaluate(initial, ensemble, targets)?;
    let mut cached_first = Some((initial.phases.clone(), first));

    let lbfgs = LbfgsSettings {
        memory: settings.memory,
        max_iterations: settings.max_iterations,
        gradient_tolerance: settings.tolerance_for(initial.metadata.b),
        c1: settings.c1,
        c2: settings.c2,
        max_line_search_evals: settings.max_line_search_evals,
        initial_step: settings.initial_step,
    };
    let objective = |phases: &[f64]| {
        let eval = match cached_first.take() {
            Some((p, e)) if p.as_slice() == phases => e,
            _ => evaluate(&initial.with_phases(phases.to_vec()), ensemble, targets)
                .expect("dimensions validated on the first evaluation"),
        };
        let negated: Vec<f64> = eval.gradient.iter().map(|g| -g).collect();
        (-eval.report.fidelity, negated)
    };
    let minimum = minimize(objective, initial.phases.clone(), &lbfgs);

    let waveform = initial.with_phases(minimum.x.clone());
    let gradient_norm = minimum.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    let per_member = fidelity_of(&waveform, ensemble, targets)?.per_member;
    let report = FidelityReport {
        fidelity: -minimum.value,
        per_member,
        gradient_norm: Some(gradient_norm),
    };
    let trace = minimum
        .trace
        .iter()
        .map(|&TracePoint { value, gradient_norm }| IterationRecord {
            fidelity: -value,
            gradient_norm,
        })
        .collect();
    Ok(OptimizationResult {
        waveform,
        report,
        trace,
        gradient_evaluations: minimum.evaluations,
        iterations: minimum.iterations,
        termination: minimum.termination,
    })
}
