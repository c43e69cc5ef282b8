//! Compare the analytic fidelity gradient with central finite differences
//! on a random waveform.
//!
//!     cargo run --release --example gradient_check [b] [Q]

use std::f64::consts::PI;

use sordor::ensemble::{build_ensemble, scaling_from_bandwidth, TargetSet};
use sordor::grape::{evaluate, fidelity_of};
use sordor::waveform::PulseWaveform;

fn main() -> sordor::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let b: f64 = args.get(1).map_or(1.0, |s| s.parse().expect("b must be a number"));
    let q: f64 = args.get(2).map_or(0.5, |s| s.parse().expect("Q must be a number"));
    let ensemble = build_ensemble(b, 40e3, None)?;
    let targets = TargetSet::build(&ensemble, q, PI)?;
    let w = PulseWaveform::chirp_seed(&scaling_from_bandwidth(b, PI, 40e3)?, q, PI, 9);
    let analytic = evaluate(&w, &ensemble, &targets)?.gradient;

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for j in 0..w.len() {
        let mut plus = w.phases.clone();
        let mut minus = w.phases.clone();
        plus[j] += h;
        minus[j] -= h;
        let fp = fidelity_of(&w.with_phases(plus), &ensemble, &targets)?.fidelity;
        let fm = fidelity_of(&w.with_phases(minus), &ensemble, &targets)?.fidelity;
        let numeric = (fp - fm) / (2.0 * h);
        worst = worst.max((numeric - analytic[j]).abs());
    }
    let norm = analytic.iter().map(|g| g * g).sum::<f64>().sqrt();
    println!("{} slices, |grad|={norm:.4e}, max abs deviation {worst:.2e}", w.len());
    println!("relative deviation {:.2e}", worst / norm);
    Ok(())
}
