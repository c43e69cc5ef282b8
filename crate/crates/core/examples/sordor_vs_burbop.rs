//! Morph an optimised Q = 0 pulse forward in Q at fixed b and compare the
//! fidelity of the dispersed targets with the undispersed one.
//!
//!     cargo run --release --example sordor_vs_burbop [b] [dq]

use std::f64::consts::PI;

use sordor::morph::{optimize_cell, CellKey, GridSpec, MorphSettings, Stage};
use sordor::optimizer::OptimizerSettings;
use sordor::ensemble::scaling_from_bandwidth;
use sordor::waveform::PulseWaveform;

fn main() -> sordor::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let b: f64 = args.get(1).map_or(4.0, |s| s.parse().expect("b must be a number"));
    let dq: f64 = args.get(2).map_or(0.05, |s| s.parse().expect("dq must be a number"));
    let spec = GridSpec {
        q_step: dq,
        q_max: 1.0,
        b_step: b,
        b_max: b,
    };
    spec.validate()?;
    let settings = MorphSettings {
        beta: PI,
        bandwidth_hz: 40e3,
        members: None,
        optimizer: OptimizerSettings::default(),
    };
    let seed = PulseWaveform::chirp_seed(&scaling_from_bandwidth(b, PI, 40e3)?, 0.0, 0.1, 1);

    let mut carried = seed;
    let mut baseline = None;
    println!("{:>6} {:>10} {:>8}", "Q", "F", "calls");
    for q in 0..spec.q_count() {
        let cell = optimize_cell(&carried, CellKey::new(q, 1), &spec, &settings, Stage::Forward)?;
        let base = *baseline.get_or_insert(cell.fidelity);
        let mark = if cell.fidelity > base { "  > Q=0" } else { "" };
        println!("{:6.3} {:10.6} {:8}{mark}", cell.q, cell.fidelity, cell.gradient_calls);
        carried = cell.waveform;
    }
    Ok(())
}
