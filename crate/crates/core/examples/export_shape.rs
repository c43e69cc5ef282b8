//! Optimise a pulse, save it as versioned JSON and as a shape file, and
//! read both back.
//!
//!     cargo run --release --example export_shape [out-dir]

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use sordor::ensemble::{build_ensemble, scaling_from_bandwidth, TargetSet};
use sordor::io::{shape, waveform_json};
use sordor::optimizer::{optimize, OptimizerSettings};
use sordor::waveform::PulseWaveform;

fn main() -> sordor::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sordor-export-example"));
    let (b, q) = (2.0, 0.2);
    let ensemble = build_ensemble(b, 40e3, None)?;
    let targets = TargetSet::build(&ensemble, q, PI)?;
    let seed = PulseWaveform::chirp_seed(&scaling_from_bandwidth(b, PI, 40e3)?, q, 0.1, 5);
    let w = optimize(&seed, &ensemble, &targets, &OptimizerSettings::default())?.waveform;

    let json = out.join("p180.json");
    let shp = out.join("p180.shape");
    waveform_json::write(&json, &w)?;
    shape::write(&shp, &w, "SORDOR pi, b=2, Q=0.2")?;

    assert_eq!(waveform_json::read(&json)?, w);
    let back = shape::read(&shp)?;
    let worst = w
        .phases
        .iter()
        .zip(&back.phases)
        .map(|(a, b)| {
            let d = (a - b).rem_euclid(TAU);
            d.min(TAU - d)
        })
        .fold(0.0, f64::max);
    println!("wrote {} and {}", json.display(), shp.display());
    println!("JSON round trip exact; shape round trip max phase error {worst:.2e} rad");
    Ok(())
}
