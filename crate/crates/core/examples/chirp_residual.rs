//! Compare an optimised dispersed pulse with the amplitude-matched chirp
//! and print the residual phase.
//!
//!     cargo run --release --example chirp_residual [b] [Q]

use std::f64::consts::PI;

use sordor::chirp::{chirp_residual_with, slice_midpoints, ChirpReference};
use sordor::ensemble::{build_ensemble, scaling_from_bandwidth, TargetSet};
use sordor::optimizer::{optimize, OptimizerSettings};
use sordor::waveform::PulseWaveform;

fn main() -> sordor::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let b: f64 = args.get(1).map_or(4.0, |s| s.parse().expect("b must be a number"));
    let q: f64 = args.get(2).map_or(0.25, |s| s.parse().expect("Q must be a number"));
    let ensemble = build_ensemble(b, 40e3, None)?;
    let targets = TargetSet::build(&ensemble, q, PI)?;
    let seed = PulseWaveform::chirp_seed(&scaling_from_bandwidth(b, PI, 40e3)?, q, 0.1, 3);
    let w = optimize(&seed, &ensemble, &targets, &OptimizerSettings::default())?.waveform;

    let reference = ChirpReference::for_waveform(&w)?;
    println!(
        "T={:.0} µs, matched sweep {:.0} Hz",
        w.duration() * 1e6,
        reference.sweep_hz
    );
    let residual = chirp_residual_with(&w, &reference);
    for (t, r) in slice_midpoints(&w).iter().zip(&residual).step_by((w.len() / 20).max(1)) {
        println!("{:8.2} µs  {:+9.3} rad", t * 1e6, r);
    }
    Ok(())
}
