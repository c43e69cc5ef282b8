//! Optimise π/2 and π pulses at b = 2 and follow x, y and z through the
//! built-in sequences, comparing with the ideal target composites.
//!
//!     cargo run --release --example bloch_sequences

use std::f64::consts::{FRAC_PI_2, PI};

use sordor::ensemble::{build_ensemble, scaling_from_bandwidth, TargetSet};
use sordor::optimizer::{optimize, OptimizerSettings};
use sordor::sequence::{bloch_trajectory, sequence_fidelity, BlochState, SequenceSpec};
use sordor::units::to_hz;
use sordor::waveform::PulseWaveform;

fn pulse(b: f64, beta: f64) -> sordor::Result<PulseWaveform> {
    let ensemble = build_ensemble(b, 40e3, None)?;
    let targets = TargetSet::build(&ensemble, 0.0, beta)?;
    let seed = PulseWaveform::chirp_seed(&scaling_from_bandwidth(b, beta, 40e3)?, 0.0, 0.1, 2);
    Ok(optimize(&seed, &ensemble, &targets, &OptimizerSettings::default())?.waveform)
}

fn main() -> sordor::Result<()> {
    let b = 2.0;
    let pulses = [pulse(b, FRAC_PI_2)?, pulse(b, PI)?];
    let ensemble = build_ensemble(b, 40e3, None)?;

    for name in SequenceSpec::NAMES {
        let seq = SequenceSpec::named(name)?;
        let f = sequence_fidelity(&seq, &seq.idealized(), &pulses, &ensemble)?;
        println!("{name:>13}: sequence F={:.4}", f.fidelity);
    }

    let seq = SequenceSpec::named("perfect-echo")?;
    println!("\nperfect echo from z, actual vs ideal:");
    let actual = bloch_trajectory(&seq, &pulses, BlochState::Z, &ensemble)?;
    let ideal = bloch_trajectory(&seq.idealized(), &pulses, BlochState::Z, &ensemble)?;
    for ((w, a), i) in actual.offsets.iter().zip(&actual.finals).zip(&ideal.finals) {
        println!(
            "{:9.0} Hz  ({:+.3} {:+.3} {:+.3})  ({:+.3} {:+.3} {:+.3})",
            to_hz(*w),
            a.x,
            a.y,
            a.z,
            i.x,
            i.y,
            i.z
        );
    }
    Ok(())
}
