//! Offset grids, bandwidth/scaling relations and per-member rotation targets.
//!
//! Units: bandwidths in Hz, durations in s, amplitudes and offsets in rad/s,
//! angles in rad. An ensemble of bandwidth `Ω` spans offsets `ω ∈ [−πΩ, +πΩ]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{commutator_of, spin_x, spin_y, step_propagator, Superoperator};

/// Slack used when turning products like `10·b` into integers, so that grid
/// values such as `3 × 0.2` do not round up past their intended value.
const INTEGER_SLACK: f64 = 1e-9;

/// Linearly spaced ensemble of detuned two-level systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub bandwidth_hz: f64,
    pub bandwidth_factor: f64,
    pub offsets: Vec<f64>,
}

impl EnsembleSpec {
    /// Ensemble with explicit offsets; every offset must lie inside the band.
    pub fn from_offsets(bandwidth_factor: f64, bandwidth_hz: f64, offsets: Vec<f64>) -> Result<Self> {
        check_positive("bandwidth factor", bandwidth_factor)?;
        check_positive("bandwidth", bandwidth_hz)?;
        if offsets.is_empty() {
            return Err(Error::invalid("ensemble needs at least one member"));
        }
        let edge = band_edge(bandwidth_hz);
        if let Some(&bad) = offsets.iter().find(|w| !w.is_finite() || w.abs() > edge * (1.0 + 1e-12)) {
            return Err(Error::OutOfBand { offset: bad, edge });
        }
        Ok(Self {
            bandwidth_hz,
            bandwidth_factor,
            offsets,
        })
    }

    pub fn member_count(&self) -> usize {
        self.offsets.len()
    }

    /// Band edge `πΩ` in rad/s.
    pub fn edge(&self) -> f64 {
        band_edge(self.bandwidth_hz)
    }
}

pub fn band_edge(bandwidth_hz: f64) -> f64 {
    PI * bandwidth_hz
}

/// Default member count `1 + ⌈10b⌉`.
pub fn default_member_count(b: f64) -> usize {
    1 + (10.0 * b - INTEGER_SLACK).ceil().max(0.0) as usize
}

/// Offsets `ω_k = πΩ·(2k − (K−1))/(K−1)`, symmetric and with zero on the grid
/// for odd `K`.
pub fn build_ensemble(b: f64, bandwidth_hz: f64, member_override: Option<usize>) -> Result<EnsembleSpec> {
    check_positive("bandwidth factor", b)?;
    check_positive("bandwidth", bandwidth_hz)?;
    let count = match member_override {
        Some(k) if k < 2 => {
            return Err(Error::invalid(format!("member count override must be at least 2, got {k}")))
        }
        Some(k) => k,
        None => default_member_count(b),
    };
    let edge = band_edge(bandwidth_hz);
    let span = (count - 1) as f64;
    let offsets = (0..count)
        .map(|k| {
            let u = (2.0 * k as f64 - span) / span;
            edge * u
        })
        .collect();
    Ok(EnsembleSpec {
        bandwidth_hz,
        bandwidth_factor: b,
        offsets,
    })
}

/// Timing and amplitude of a pulse with bandwidth factor `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub bandwidth_factor: f64,
    pub bandwidth_hz: f64,
    pub rotation_angle: f64,
    pub duration: f64,
    pub amplitude: f64,
    pub slice_count: usize,
    pub dt: f64,
    pub scaling_factor: f64,
    /// `50·b` before rounding, when it was not an integer.
    pub unrounded_slices: Option<f64>,
}

/// `T = b/Ω`, `s = 2β/(πb)`, `A = β/(sT)`, `N = round(50b)`, `Δt = T/N`.
pub fn scaling_from_bandwidth(b: f64, beta: f64, bandwidth_hz: f64) -> Result<ScalingParams> {
    check_positive("bandwidth factor", b)?;
    check_positive("bandwidth", bandwidth_hz)?;
    check_positive("rotation angle", beta)?;
    let duration = b / bandwidth_hz;
    let scaling_factor = 2.0 * beta / (PI * b);
    let amplitude = beta / (scaling_factor * duration);
    let raw = 50.0 * b;
    let slice_count = raw.round().max(1.0) as usize;
    let unrounded_slices = ((raw - slice_count as f64).abs() > INTEGER_SLACK * raw.max(1.0)).then_some(raw);
    Ok(ScalingParams {
        bandwidth_factor: b,
        bandwidth_hz,
        rotation_angle: beta,
        duration,
        amplitude,
        slice_count,
        dt: duration / slice_count as f64,
        scaling_factor,
        unrounded_slices,
    })
}

/// Quadratic phase dispersion `α = πbQ(1 − u²)` with `u = ω/(πΩ)`.
pub fn phase_dispersion(offset: f64, bandwidth_hz: f64, b: f64, q: f64) -> Result<f64> {
    let edge = band_edge(bandwidth_hz);
    if !offset.is_finite() || offset.abs() > edge * (1.0 + 1e-12) {
        return Err(Error::OutOfBand { offset, edge });
    }
    Ok(dispersion_formula(offset.clamp(-edge, edge), bandwidth_hz, b, q))
}

/// The dispersion polynomial without the band check; extrapolates outside
/// the band.
pub(crate) fn dispersion_formula(offset: f64, bandwidth_hz: f64, b: f64, q: f64) -> f64 {
    let u = offset / band_edge(bandwidth_hz);
    PI * b * q * (1.0 - u * u)
}

/// `exp(−i·L(n)·β)` with rotation axis `n = cos(α)σ̂x + sin(α)σ̂y`: the
/// Bloch-sphere rotation by `β` about an axis at angle `α` in the transverse
/// plane.
pub fn target_rotation(alpha: f64, beta: f64) -> Superoperator {
    let (s, c) = alpha.sin_cos();
    let axis = spin_x() * Complex64::from(c) + spin_y() * Complex64::from(s);
    let generator = commutator_of(&axis);
    // the rotation angle plays the role of the time step; negative angles
    // are the inverse rotation
    if beta >= 0.0 {
        step_propagator(&generator, beta).expect("finite non-negative angle")
    } else {
        step_propagator(&generator, -beta).expect("finite angle").adjoint()
    }
}

/// Per-member targets of one `(Q, β)` problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSet {
    pub q: f64,
    pub beta: f64,
    pub alphas: Vec<f64>,
    pub rotations: Vec<Superoperator>,
}

impl TargetSet {
    pub fn build(ensemble: &EnsembleSpec, q: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("quadratic coefficient Q must lie in [0, 1], got {q}")));
        }
        if !beta.is_finite() {
            return Err(Error::invalid("rotation angle must be finite"));
        }
        let alphas = ensemble
            .offsets
            .iter()
            .map(|&w| phase_dispersion(w, ensemble.bandwidth_hz, ensemble.bandwidth_factor, q))
            .collect::<Result<Vec<_>>>()?;
        let rotations = alphas.iter().map(|&a| target_rotation(a, beta)).collect();
        Ok(Self {
            q,
            beta,
            alphas,
            rotations,
        })
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{conjugation_superoperator, density_of, vectorize, unvectorize, bloch_of, Mat2, Mat4};
    use crate::expm::expm;
    use std::f64::consts::FRAC_PI_2;

    fn max_abs(m: &Mat4) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Conjugation by the 2×2 exponential `exp(−i·β·(cos α σx + sin α σy)/2)`.
    fn conjugation_oracle(alpha: f64, beta: f64) -> Mat4 {
        let n = spin_x() * Complex64::from(alpha.cos()) + spin_y() * Complex64::from(alpha.sin());
        let u = expm(&(n * Complex64::new(0.0, -beta))).unwrap();
        conjugation_superoperator(&u)
    }

    fn apply_bloch(r: &Mat4, v: [f64; 3]) -> [f64; 3] {
        bloch_of(&unvectorize(&(r * vectorize(&density_of(v)))))
    }

    #[test]
    fn full_scale_ensemble() {
        let e = build_ensemble(18.0, 40e3, None).unwrap();
        assert_eq!(e.member_count(), 181);
        assert!((e.offsets[0] + PI * 40e3).abs() < 1e-9);
        assert!((e.offsets[180] - PI * 40e3).abs() < 1e-9);
        assert_eq!(e.offsets[90], 0.0);
    }

    #[test]
    fn small_b_gives_two_members() {
        assert_eq!(build_ensemble(0.1, 1.0, None).unwrap().member_count(), 2);
    }

    #[test]
    fn grid_values_do_not_round_up() {
        // 3 × 0.2 is 0.6000000000000001 in binary
        assert_eq!(default_member_count(3.0 * 0.2), 7);
        assert_eq!(default_member_count(0.21), 4);
    }

    #[test]
    fn override_gives_dense_grid_with_zero() {
        let e = build_ensemble(18.0, 40e3, Some(451)).unwrap();
        assert_eq!(e.member_count(), 451);
        assert_eq!(e.offsets[225], 0.0);
        let step = e.offsets[1] - e.offsets[0];
        for w in e.offsets.windows(2) {
            assert!(((w[1] - w[0]) - step).abs() < 1e-9);
        }
        for k in 0..451 {
            assert_eq!(e.offsets[k], -e.offsets[450 - k]);
        }
    }

    #[test]
    fn override_below_two_rejected() {
        assert!(build_ensemble(1.0, 1.0, Some(1)).is_err());
        assert!(build_ensemble(0.0, 1.0, None).is_err());
        assert!(build_ensemble(1.0, -1.0, None).is_err());
    }

    #[test]
    fn scaling_at_b18() {
        let s = scaling_from_bandwidth(18.0, PI, 40e3).unwrap();
        assert!((s.duration - 450e-6).abs() <= 1e-12 * 450e-6);
        assert!((s.dt - 0.5e-6).abs() <= 1e-12 * 0.5e-6);
        assert_eq!(s.slice_count, 900);
        assert!((s.amplitude - 2.0 * PI * 1e4).abs() <= 1e-12 * 2.0 * PI * 1e4);
        assert!(s.unrounded_slices.is_none());

        let half = scaling_from_bandwidth(18.0, FRAC_PI_2, 40e3).unwrap();
        assert_eq!(half.slice_count, 900);
        assert!((half.amplitude - s.amplitude).abs() <= 1e-12 * s.amplitude);
        assert_eq!(half.duration, s.duration);

        let nine = scaling_from_bandwidth(9.0, PI, 40e3).unwrap();
        assert!((nine.duration - 225e-6).abs() < 1e-15);
        assert_eq!(nine.slice_count, 450);
    }

    #[test]
    fn scaling_relations_hold() {
        for b in [0.2, 1.0, 2.6, 7.3, 18.0] {
            let s = scaling_from_bandwidth(b, 1.1, 12.5e3).unwrap();
            assert!((s.bandwidth_hz * s.duration - b).abs() < 1e-12 * b);
            assert!((1.1 / (s.amplitude * s.duration) - s.scaling_factor).abs() < 1e-12);
            assert!((s.dt * s.slice_count as f64 - s.duration).abs() < 1e-15);
        }
    }

    #[test]
    fn non_integral_slice_count_is_recorded() {
        let s = scaling_from_bandwidth(0.31, PI, 1.0).unwrap();
        assert_eq!(s.slice_count, 16);
        assert_eq!(s.unrounded_slices, Some(50.0 * 0.31));
    }

    #[test]
    fn dispersion_examples() {
        let edge = PI * 40e3;
        assert_eq!(phase_dispersion(1234.0, 40e3, 18.0, 0.0).unwrap(), 0.0);
        assert!((phase_dispersion(0.0, 40e3, 18.0, 0.78).unwrap() - PI * 18.0 * 0.78).abs() < 1e-12);
        assert_eq!(phase_dispersion(edge, 40e3, 18.0, 0.78).unwrap(), 0.0);
        assert_eq!(phase_dispersion(-edge, 40e3, 18.0, 0.78).unwrap(), 0.0);
        assert!(matches!(
            phase_dispersion(edge * 1.01, 40e3, 18.0, 0.5),
            Err(Error::OutOfBand { .. })
        ));
    }

    #[test]
    fn dispersion_is_even() {
        for w in [0.1, 1e3, 5e4, 1.2e5] {
            let a = phase_dispersion(w, 40e3, 4.0, 0.37).unwrap();
            let b = phase_dispersion(-w, 40e3, 4.0, 0.37).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn target_identity_at_zero_angle() {
        assert!(max_abs(&(target_rotation(0.7, 0.0) - Mat4::identity())) < 1e-15);
    }

    #[test]
    fn pi_about_x_flips_y_and_z() {
        let r = target_rotation(0.0, PI);
        let x = apply_bloch(&r, [1.0, 0.0, 0.0]);
        let y = apply_bloch(&r, [0.0, 1.0, 0.0]);
        let z = apply_bloch(&r, [0.0, 0.0, 1.0]);
        for (got, want) in [(x, [1.0, 0.0, 0.0]), (y, [0.0, -1.0, 0.0]), (z, [0.0, 0.0, -1.0])] {
            for i in 0..3 {
                assert!((got[i] - want[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_turn_is_identity() {
        // the 2×2 propagator is −I; the global phase cancels in the conjugation
        assert!(max_abs(&(target_rotation(0.0, 2.0 * PI) - Mat4::identity())) < 1e-12);
        assert!(max_abs(&(conjugation_oracle(0.0, 2.0 * PI) - Mat4::identity())) < 1e-12);
    }

    #[test]
    fn targets_match_conjugation_oracle() {
        for (alpha, beta) in [(0.0, PI), (0.4, FRAC_PI_2), (-2.0, 1.3), (10.0, 3.0 * PI)] {
            let r = target_rotation(alpha, beta);
            assert!(max_abs(&(r - conjugation_oracle(alpha, beta))) < 1e-12);
            assert!(max_abs(&(r.adjoint() * r - Mat4::identity())) < 1e-10);
        }
    }

    #[test]
    fn global_phase_does_not_change_target() {
        let n = spin_x() * Complex64::from(0.3f64.cos()) + spin_y() * Complex64::from(0.3f64.sin());
        let u: Mat2 = expm(&(n * Complex64::new(0.0, -1.1))).unwrap();
        let shifted = u * Complex64::from_polar(1.0, 0.77);
        let a = conjugation_superoperator(&u);
        let b = conjugation_superoperator(&shifted);
        assert!(max_abs(&(a - b)) < 1e-15);
    }

    #[test]
    fn target_set_edges_and_centre() {
        let e = build_ensemble(2.0, 10e3, Some(21)).unwrap();
        let t = TargetSet::build(&e, 0.5, PI).unwrap();
        assert_eq!(t.len(), 21);
        assert_eq!(t.alphas[0], 0.0);
        assert_eq!(t.alphas[20], 0.0);
        assert!((t.alphas[10] - PI * 2.0 * 0.5).abs() < 1e-12);
        assert!(TargetSet::build(&e, 1.5, PI).is_err());
    }
}
