//! Run the complete staged recipe on a small grid with checkpoints in a
//! directory, then print the stage log and the fidelity surface.
//!
//!     cargo run --release --example morph_recipe [checkpoint-dir]
//!
//! Rerunning with the same directory resumes instead of recomputing.

use std::path::PathBuf;

use sordor::morph::{run_recipe, GridSpec, RecipeConfig, RunControl};
use sordor::optimizer::OptimizerSettings;

fn main() -> sordor::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sordor-morph-example"));
    let config = RecipeConfig {
        grid: GridSpec {
            q_step: 0.1,
            q_max: 1.0,
            b_step: 1.0,
            b_max: 3.0,
        },
        optimizer: OptimizerSettings {
            max_iterations: 300,
            ..Default::default()
        },
        smoothing_count: 3,
        ..Default::default()
    };
    let report = run_recipe(&config, &dir, RunControl::default())?;
    println!("checkpoint: {}", dir.display());
    for s in &report.summaries {
        println!(
            "stage {:>2}: {:3} optimisations, {:6} gradient calls, {:2} cells improved, mean F {:.4}",
            s.stage.label(),
            s.optimizations,
            s.gradient_calls,
            s.improved_cells,
            s.mean_fidelity
        );
    }
    let g = &report.grid;
    print!("{:>5}", "Q\\b");
    for bi in 1..=g.spec.b_count() {
        print!("{:>8.1}", g.spec.b_value(bi));
    }
    println!();
    for qi in 0..g.spec.q_count() {
        print!("{:5.2}", g.spec.q_value(qi));
        for bi in 1..=g.spec.b_count() {
            match g.get(sordor::morph::CellKey::new(qi, bi)) {
                Some(c) => print!("{:8.4}", c.fidelity),
                None => print!("{:>8}", "-"),
            }
        }
        println!();
    }
    Ok(())
}
