//! Quadratic-phase chirp reference and the residual phase of a pulse
//! relative to it.
//!
//! The reference is `φ(t) = π·Ω_c·T·(t/T − 1/2)²`. Its sweep `Ω_c` (Hz) is
//! tied to the pulse by `Ω_c = (A/2π)²·T`, the sweep at which a linear chirp
//! of amplitude A and duration T has unit adiabaticity. For A = 2π·10 kHz
//! and T = 450 µs this gives 45 kHz, close to the 40 kHz design bandwidth.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::{unwrap_phases, PulseWaveform};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChirpReference {
    /// Frequency sweep Ω_c in Hz.
    pub sweep_hz: f64,
    /// T in s.
    pub duration: f64,
}

impl ChirpReference {
    pub fn new(sweep_hz: f64, duration: f64) -> Result<Self> {
        if !(sweep_hz.is_finite() && duration.is_finite() && duration > 0.0) {
            return Err(Error::invalid("chirp sweep must be finite and duration positive"));
        }
        Ok(Self { sweep_hz, duration })
    }

    /// `Ω_c = (A/2π)²·T` for amplitude `A` in rad/s.
    pub fn matched_to_amplitude(amplitude: f64, duration: f64) -> Result<Self> {
        let a_hz = amplitude / TAU;
        Self::new(a_hz * a_hz * duration, duration)
    }

    pub fn for_waveform(w: &PulseWaveform) -> Result<Self> {
        Self::matched_to_amplitude(w.amplitude, w.duration())
    }

    /// Reference phase in rad at time `t` (s).
    pub fn phase_at(&self, t: f64) -> f64 {
        let x = t / self.duration - 0.5;
        PI * self.sweep_hz * self.duration * x * x
    }
}

/// Slice midpoints `(j + 1/2)·Δt` in s.
pub fn slice_midpoints(w: &PulseWaveform) -> Vec<f64> {
    (0..w.len()).map(|j| (j as f64 + 0.5) * w.dt).collect()
}

/// Unwrapped pulse phase minus `reference` at every slice midpoint.
pub fn chirp_residual_with(w: &PulseWaveform, reference: &ChirpReference) -> Vec<f64> {
    unwrap_phases(&w.phases)
        .iter()
        .zip(slice_midpoints(w))
        .map(|(p, t)| p - reference.phase_at(t))
        .collect()
}

/// Residual against the amplitude-matched reference.
pub fn chirp_residual(w: &PulseWaveform) -> Result<Vec<f64>> {
    Ok(chirp_residual_with(w, &ChirpReference::for_waveform(w)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::scaling_from_bandwidth;

    fn pulse(b: f64) -> PulseWaveform {
        PulseWaveform::constant(&scaling_from_bandwidth(b, PI, 40e3).unwrap(), 0.0, 0.0)
    }

    #[test]
    fn matched_sweep_at_450_us() {
        let w = pulse(18.0);
        let r = ChirpReference::for_waveform(&w).unwrap();
        assert!((r.duration - 450e-6).abs() < 1e-15);
        assert!((r.sweep_hz - 45e3).abs() < 1e-6);
        let short = ChirpReference::for_waveform(&pulse(4.0)).unwrap();
        assert!(short.sweep_hz < r.sweep_hz);
    }

    #[test]
    fn vertex_at_half_duration() {
        let r = ChirpReference::new(40e3, 450e-6).unwrap();
        assert_eq!(r.phase_at(225e-6), 0.0);
        assert!((r.phase_at(0.0) - PI * 40e3 * 450e-6 / 4.0).abs() < 1e-12);
        assert!((r.phase_at(0.0) - r.phase_at(450e-6)).abs() < 1e-12);
    }

    #[test]
    fn exact_reference_leaves_no_residual() {
        let w = pulse(2.0);
        let r = ChirpReference::for_waveform(&w).unwrap();
        let phases: Vec<f64> = slice_midpoints(&w).iter().map(|&t| r.phase_at(t)).collect();
        let residual = chirp_residual(&w.with_phases(phases)).unwrap();
        assert!(residual.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn constant_phase_gives_negated_parabola() {
        let w = pulse(4.0);
        let r = ChirpReference::for_waveform(&w).unwrap();
        let residual = chirp_residual(&w).unwrap();
        for (res, t) in residual.iter().zip(slice_midpoints(&w)) {
            assert!((res + r.phase_at(t)).abs() < 1e-12);
        }
    }
}
