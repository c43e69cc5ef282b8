use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use sordor::ensemble::{phase_dispersion, scaling_from_bandwidth, target_rotation, EnsembleSpec, TargetSet};
use sordor::grape::{final_propagator, fidelity_of};
use sordor::io::{shape, waveform_json};
use sordor::lbfgs::Termination;
use sordor::morph::{resample_waveform, smoothing_starts, CellKey, CellResult, GridSpec, MorphGrid, Stage};
use sordor::sequence::{bloch_trajectory, phase_shift_pulse, BlochState, SequenceSpec};
use sordor::spin::{commutation_superoperator, conjugation_superoperator, member_hamiltonian, spin_z, step_propagator, Mat4};
use sordor::waveform::{PulseMetadata, PulseWaveform};

fn max_abs(m: &Mat4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn waveform(phases: Vec<f64>, amplitude: f64, dt: f64) -> PulseWaveform {
    let metadata = PulseMetadata {
        b: 2.0,
        q: 0.25,
        beta: PI,
        bandwidth_hz: 40e3,
    };
    PulseWaveform::new(phases, amplitude, dt, metadata).unwrap()
}

fn z_rotation(angle: f64) -> Mat4 {
    let u = sordor::expm::expm(&(spin_z() * num_complex::Complex64::new(0.0, -angle))).unwrap();
    conjugation_superoperator(&u)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_propagators_are_unitary(phase in -10.0..10.0f64, amp in 0.0..1e5f64, off in -2e5..2e5f64, dt in 0.0..1e-5f64) {
        let l = commutation_superoperator(&member_hamiltonian(phase, amp, off).unwrap());
        let p = step_propagator(&l, dt).unwrap();
        prop_assert!(max_abs(&(p * p.adjoint() - Mat4::identity())) < 1e-10);
    }

    #[test]
    fn member_fidelities_lie_in_unit_interval(
        phases in prop::collection::vec(-PI..PI, 1..30),
        q in 0.0..1.0f64,
    ) {
        let w = waveform(phases, TAU * 1e4, 1e-6);
        let ensemble = EnsembleSpec::from_offsets(2.0, 40e3, vec![-PI * 40e3, -1e4, 0.0, 3e4, PI * 40e3]).unwrap();
        let targets = TargetSet::build(&ensemble, q, PI).unwrap();
        let r = fidelity_of(&w, &ensemble, &targets).unwrap();
        for f in r.per_member {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        }
    }

    #[test]
    fn phase_shift_turns_the_axis(
        phases in prop::collection::vec(-PI..PI, 1..20),
        shift in -PI..PI,
        off in -1e5..1e5f64,
    ) {
        let w = waveform(phases, TAU * 1e4, 1e-6);
        let shifted = final_propagator(&phase_shift_pulse(&w, shift), off);
        let rotated = z_rotation(shift) * final_propagator(&w, off) * z_rotation(-shift);
        prop_assert!(max_abs(&(shifted - rotated)) < 1e-10);
    }

    #[test]
    fn bloch_norm_is_preserved(
        phases in prop::collection::vec(-PI..PI, 1..20),
        theta in 0.0..PI,
        psi in 0.0..TAU,
    ) {
        let w = waveform(phases, TAU * 1e4, 2e-6);
        let init = BlochState::new(theta.sin() * psi.cos(), theta.sin() * psi.sin(), theta.cos()).unwrap();
        let ensemble = EnsembleSpec::from_offsets(2.0, 40e3, vec![-1e5, 0.0, 7e4]).unwrap();
        let sim = bloch_trajectory(&SequenceSpec::from_pairs(&[(0, 0.0), (0, 1.0)]), &[w], init, &ensemble).unwrap();
        for f in sim.finals {
            prop_assert!((f.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rotations_about_one_axis_compose(alpha in -PI..PI, b1 in -TAU..TAU, b2 in -TAU..TAU) {
        let lhs = target_rotation(alpha, b1) * target_rotation(alpha, b2);
        prop_assert!(max_abs(&(lhs - target_rotation(alpha, b1 + b2))) < 1e-10);
    }

    #[test]
    fn dispersion_is_even_and_vanishes_at_edges(u in 0.0..1.0f64, b in 0.1..20.0f64, q in 0.0..1.0f64) {
        let edge = PI * 40e3;
        let plus = phase_dispersion(u * edge, 40e3, b, q).unwrap();
        let minus = phase_dispersion(-u * edge, 40e3, b, q).unwrap();
        prop_assert_eq!(plus, minus);
        prop_assert!(phase_dispersion(edge, 40e3, b, q).unwrap().abs() < 1e-12);
        prop_assert!(phase_dispersion(edge * 1.01, 40e3, b, q).is_err());
    }

    #[test]
    fn resampling_keeps_endpoints(
        phases in prop::collection::vec(-1.0..1.0f64, 2..60),
        b in 0.5..4.0f64,
    ) {
        let s = scaling_from_bandwidth(b, PI, 40e3).unwrap();
        let w = waveform(phases.clone(), 1.0, 1e-6);
        let r = resample_waveform(&w, s.slice_count.max(2), &s).unwrap();
        prop_assert!((r.phases[0] - phases[0]).abs() < 1e-12);
        prop_assert!((r.phases.last().unwrap() - phases.last().unwrap()).abs() < 1e-12);
        let (lo, hi) = phases.iter().fold((f64::MAX, f64::MIN), |(l, h), &p| (l.min(p), h.max(p)));
        prop_assert!(r.phases.iter().all(|&p| p >= lo - 1e-12 && p <= hi + 1e-12));
    }

    #[test]
    fn json_round_trip_is_exact(
        phases in prop::collection::vec(-1e3..1e3f64, 1..200),
        amplitude in 0.0..1e7f64,
        dt in 0.0..1e-3f64,
    ) {
        let w = waveform(phases, amplitude, dt);
        let back = waveform_json::from_str(&waveform_json::to_string(&w).unwrap()).unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn shape_round_trip_within_precision(phases in prop::collection::vec(-50.0..50.0f64, 1..200)) {
        let w = waveform(phases, TAU * 1e4, 5e-7);
        let back = shape::from_str(&shape::to_string(&w, "p")).unwrap();
        for (a, b) in w.phases.iter().zip(&back.phases) {
            let d = (a - b).rem_euclid(TAU);
            prop_assert!(d.min(TAU - d) <= 1e-6);
        }
        prop_assert!(((back.amplitude - w.amplitude) / w.amplitude).abs() <= 1e-6);
    }

    #[test]
    fn smoothing_starts_are_interior(
        profile in prop::collection::vec(0.0..1.0f64, 0..40),
        count in 0usize..15,
    ) {
        let starts = smoothing_starts(&profile, 0.05, count);
        prop_assert!(starts.len() <= count);
        for s in &starts {
            prop_assert!(s.q_index > 0 && s.q_index + 1 < profile.len());
        }
        prop_assert!(starts.windows(2).all(|w| w[0].magnitude >= w[1].magnitude));
    }

    #[test]
    fn stored_fidelity_is_running_maximum(offers in prop::collection::vec(0.0..1.0f64, 1..30)) {
        let spec = GridSpec { q_step: 0.5, q_max: 1.0, b_step: 1.0, b_max: 1.0 };
        let mut grid = MorphGrid::new(spec, PI, 40e3).unwrap();
        let key = CellKey::new(1, 1);
        let w = waveform(vec![0.0], 1.0, 1e-6);
        let mut best = f64::MIN;
        for f in offers {
            let result = CellResult {
                q: 0.5, b: 1.0, fidelity: f, gradient_norm: 0.0, gradient_calls: 1, iterations: 1,
                termination: Termination::Converged, stage: Stage::Smoothing, waveform: w.clone(),
            };
            let changed = grid.offer(key, result);
            prop_assert_eq!(changed, f > best);
            best = best.max(f);
            prop_assert_eq!(grid.get(key).unwrap().fidelity, best);
        }
    }
}
