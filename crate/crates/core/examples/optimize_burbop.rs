//! Optimise a broadband universal π rotation without phase dispersion
//! (Q = 0) at b = 4 and print the convergence trace.
//!
//!     cargo run --release --example optimize_burbop [b] [beta]

use std::f64::consts::PI;

use sordor::ensemble::{build_ensemble, scaling_from_bandwidth, TargetSet};
use sordor::optimizer::{optimize, OptimizerSettings};
use sordor::units::parse_angle;
use sordor::waveform::PulseWaveform;

fn main() -> sordor::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let b: f64 = args.get(1).map_or(4.0, |s| s.parse().expect("b must be a number"));
    let beta = args.get(2).map_or(Ok(PI), |s| parse_angle(s))?;

    let scaling = scaling_from_bandwidth(b, beta, 40e3)?;
    println!(
        "b={b}: T={:.1} µs, N={}, A/2π={:.0} Hz",
        scaling.duration * 1e6,
        scaling.slice_count,
        scaling.amplitude / (2.0 * PI)
    );
    let ensemble = build_ensemble(b, 40e3, None)?;
    let targets = TargetSet::build(&ensemble, 0.0, beta)?;
    let start = PulseWaveform::chirp_seed(&scaling, 0.0, 0.1, 1);
    let r = optimize(&start, &ensemble, &targets, &OptimizerSettings::default())?;

    for (i, rec) in r.trace.iter().enumerate().step_by(10) {
        println!("iter {i:4}  F={:.6}  |grad|={:.2e}", rec.fidelity, rec.gradient_norm);
    }
    println!(
        "final F={:.6} after {} iterations, {} gradient calls ({:?})",
        r.report.fidelity, r.iterations, r.gradient_evaluations, r.termination
    );
    let worst = r.report.per_member.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("worst member f={worst:.4} over {} offsets", ensemble.member_count());
    Ok(())
}
