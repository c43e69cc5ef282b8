//! Offset-resolved Bloch-sphere simulation of pulses and back-to-back pulse
//! sequences.
//!
//! A sequence element either plays a waveform (optionally with its phases
//! shifted, which turns the rotation axis in the transverse plane) or
//! applies the ideal target rotation that waveform was designed for.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector4;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{band_edge, dispersion_formula, target_rotation, EnsembleSpec};
use crate::error::{Error, Result};
use crate::grape::{final_propagator, member_fidelity, FidelityReport};
use crate::spin::{bloch_of, density_of, unvectorize, vectorize, Mat4};
use crate::waveform::PulseWaveform;

/// Bloch vector `(⟨2Ŝx⟩, ⟨2Ŝy⟩, ⟨2Ŝz⟩)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    pub const X: Self = Self { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Self = Self { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Self = Self { x: 0.0, y: 0.0, z: 1.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let s = Self { x, y, z };
        if s.norm().is_nan() || s.norm() > 1.0 + 1e-9 {
            return Err(Error::invalid(format!("Bloch vector norm {} exceeds 1", s.norm())));
        }
        Ok(s)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    fn vectorized(&self) -> Vector4<Complex64> {
        vectorize(&density_of(self.as_array()))
    }

    fn from_vectorized(v: &Vector4<Complex64>) -> Self {
        let [x, y, z] = bloch_of(&unvectorize(v));
        Self { x, y, z }
    }

    /// Applies a superoperator to the state.
    pub fn evolve(&self, propagator: &Mat4) -> Self {
        Self::from_vectorized(&(propagator * self.vectorized()))
    }
}

/// Adds `shift` to every phase sample.
pub fn phase_shift_pulse(w: &PulseWaveform, shift: f64) -> PulseWaveform {
    w.with_phases(w.phases.iter().map(|p| p + shift).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceElement {
    /// Index into the pulse list the sequence is simulated with.
    pub pulse: usize,
    /// Axis phase shift in rad.
    pub shift: f64,
    /// Apply the pulse's target rotation instead of the waveform.
    pub ideal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub elements: Vec<SequenceElement>,
}

impl SequenceSpec {
    /// Elements as `(pulse, shift)` pairs, all played as waveforms.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Self {
        Self {
            elements: pairs
                .iter()
                .map(|&(pulse, shift)| SequenceElement {
                    pulse,
                    shift,
                    ideal: false,
                })
                .collect(),
        }
    }

    /// Built-in sequences. Pulse 0 is the excitation (β = π/2) pulse and
    /// pulse 1 the refocusing (β = π) pulse; `single` uses pulse 0 only.
    ///
    /// - `single`: 90x
    /// - `hahn`: 90x 180x
    /// - `inept`: 90x 180x 90y
    /// - `perfect-echo`: 90x 180y 90y 180y 90−x
    pub fn named(name: &str) -> Result<Self> {
        let pairs: &[(usize, f64)] = match name {
            "single" => &[(0, 0.0)],
            "hahn" => &[(0, 0.0), (1, 0.0)],
            "inept" => &[(0, 0.0), (1, 0.0), (0, FRAC_PI_2)],
            "perfect-echo" => &[(0, 0.0), (1, FRAC_PI_2), (0, FRAC_PI_2), (1, FRAC_PI_2), (0, PI)],
            other => return Err(Error::invalid(format!("unknown sequence `{other}`"))),
        };
        Ok(Self::from_pairs(pairs))
    }

    pub const NAMES: [&'static str; 4] = ["single", "hahn", "inept", "perfect-echo"];

    /// The same sequence with every element replaced by its ideal target.
    pub fn idealized(&self) -> Self {
        Self {
            elements: self.elements.iter().map(|e| SequenceElement { ideal: true, ..*e }).collect(),
        }
    }

    pub fn pulse_count(&self) -> usize {
        self.elements.iter().map(|e| e.pulse + 1).max().unwrap_or(0)
    }

    fn check(&self, pulses: &[PulseWaveform]) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::invalid("sequence is empty"));
        }
        if self.pulse_count() > pulses.len() {
            return Err(Error::DimensionMismatch {
                what: "sequence pulses",
                expected: self.pulse_count(),
                found: pulses.len(),
            });
        }
        Ok(())
    }
}

/// Superoperator of one element at one offset.
pub fn element_propagator(element: &SequenceElement, pulses: &[PulseWaveform], offset: f64) -> Mat4 {
    let w = &pulses[element.pulse];
    if element.ideal {
        let m = &w.metadata;
        let alpha = dispersion_formula(offset, m.bandwidth_hz, m.b, m.q);
        target_rotation(alpha + element.shift, m.beta)
    } else {
        final_propagator(&phase_shift_pulse(w, element.shift), offset)
    }
}

/// Product of the element superoperators, first element rightmost.
pub fn composite_propagator(sequence: &SequenceSpec, pulses: &[PulseWaveform], offset: f64) -> Mat4 {
    sequence
        .elements
        .iter()
        .fold(Mat4::identity(), |acc, e| element_propagator(e, pulses, offset) * acc)
}

/// Offsets outside any pulse's design band.
fn bandwidth_warnings(sequence: &SequenceSpec, pulses: &[PulseWaveform], ensemble: &EnsembleSpec) -> Vec<String> {
    let mut used: Vec<usize> = sequence.elements.iter().map(|e| e.pulse).collect();
    used.sort_unstable();
    used.dedup();
    used.into_iter()
        .filter_map(|i| {
            let edge = band_edge(pulses[i].metadata.bandwidth_hz);
            (ensemble.edge() > edge * (1.0 + 1e-12)).then(|| {
                format!(
                    "pulse {i} was designed for ±{:.1} Hz but offsets reach ±{:.1} Hz",
                    edge / (2.0 * PI),
                    ensemble.edge() / (2.0 * PI)
                )
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    /// rad/s
    pub offsets: Vec<f64>,
    pub finals: Vec<BlochState>,
    pub warnings: Vec<String>,
}

/// Final Bloch vector at every ensemble offset.
pub fn bloch_trajectory(
    sequence: &SequenceSpec,
    pulses: &[PulseWaveform],
    initial: BlochState,
    ensemble: &EnsembleSpec,
) -> Result<Simulation> {
    sequence.check(pulses)?;
    let finals = ensemble
        .offsets
        .par_iter()
        .map(|&w| initial.evolve(&composite_propagator(sequence, pulses, w)))
        .collect();
    Ok(Simulation {
        offsets: ensemble.offsets.clone(),
        finals,
        warnings: bandwidth_warnings(sequence, pulses, ensemble),
    })
}

/// Bloch vector after every slice (ideal elements contribute one point)
/// at a single offset, starting with `initial`.
pub fn bloch_time_course(
    sequence: &SequenceSpec,
    pulses: &[PulseWaveform],
    initial: BlochState,
    offset: f64,
) -> Result<Vec<BlochState>> {
    sequence.check(pulses)?;
    let mut state = initial;
    let mut out = vec![state];
    for e in &sequence.elements {
        if e.ideal {
            state = state.evolve(&element_propagator(e, pulses, offset));
            out.push(state);
            continue;
        }
        let w = phase_shift_pulse(&pulses[e.pulse], e.shift);
        for &phase in &w.phases {
            state = state.evolve(&final_propagator(&w.with_phases(vec![phase]), offset));
            out.push(state);
        }
    }
    Ok(out)
}

/// Per-offset fidelity of `actual` against the composite of `ideal`.
pub fn sequence_fidelity(
    actual: &SequenceSpec,
    ideal: &SequenceSpec,
    pulses: &[PulseWaveform],
    ensemble: &EnsembleSpec,
) -> Result<FidelityReport> {
    actual.check(pulses)?;
    ideal.check(pulses)?;
    if actual.elements.len() != ideal.elements.len() {
        return Err(Error::DimensionMismatch {
            what: "sequence length",
            expected: ideal.elements.len(),
            found: actual.elements.len(),
        });
    }
    let per_member: Vec<f64> = ensemble
        .offsets
        .par_iter()
        .map(|&w| {
            member_fidelity(
                &composite_propagator(ideal, pulses, w),
                &composite_propagator(actual, pulses, w),
            )
        })
        .collect();
    Ok(FidelityReport {
        fidelity: per_member.iter().sum::<f64>() / per_member.len() as f64,
        per_member,
        gradient_norm: None,
    })
}
