use std::collections::BTreeMap;
use std::fs;

use sordor::grape::convergence_tolerance;
use sordor::lbfgs::Termination;
use sordor::morph::{load_checkpoint, run_recipe, GridSpec, RecipeConfig, RunControl, Stage};
use sordor::optimizer::OptimizerSettings;
use sordor::Error;

fn desk_config() -> RecipeConfig {
    RecipeConfig {
        grid: GridSpec {
            q_step: 0.1,
            q_max: 1.0,
            b_step: 0.5,
            b_max: 2.0,
        },
        smoothing_count: 11,
        seed: 1,
        ..Default::default()
    }
}

#[test]
fn desk_scale_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let config = desk_config();
    let report = run_recipe(&config, dir.path(), RunControl::default()).unwrap();
    let spec = config.grid;
    assert_eq!(report.grid.cells.len(), spec.q_count() * spec.b_count());

    let labels: Vec<_> = report.summaries.iter().map(|s| s.stage.label()).collect();
    assert_eq!(labels, ["1a", "1b", "2", "3a", "3b"]);
    assert!(report.summaries.iter().all(|s| s.gradient_calls >= s.optimizations));

    for cell in report.grid.cells.values() {
        let converged = cell.termination == Termination::Converged;
        assert!(
            !converged || cell.gradient_norm <= convergence_tolerance(cell.b),
            "Q={} b={} |grad|={}",
            cell.q,
            cell.b,
            cell.gradient_norm
        );
    }

    // a cell only ever holds the best attempt made on it
    let mut best: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for chain in &report.chains {
        for r in &chain.records {
            let e = best.entry((r.q.to_bits(), r.b.to_bits())).or_insert(f64::MIN);
            *e = e.max(r.fidelity);
        }
    }
    for cell in report.grid.cells.values() {
        assert_eq!(best[&(cell.q.to_bits(), cell.b.to_bits())], cell.fidelity);
    }

    // records marked as improvements are strictly increasing per cell
    let mut last: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for stage in Stage::ALL {
        for chain in report.chains.iter().filter(|c| c.stage == stage) {
            for r in chain.records.iter().filter(|r| r.improved) {
                let key = (r.q.to_bits(), r.b.to_bits());
                if let Some(&prev) = last.get(&key) {
                    assert!(r.fidelity > prev);
                }
                last.insert(key, r.fidelity);
            }
        }
    }

    let pairs = report.grid.matched_cells(2.0);
    assert!(!pairs.is_empty());
    for (p1, p2) in pairs {
        assert_eq!(spec.b_value(p1.b), 2.0 * spec.b_value(p2.b));
        assert!((spec.q_value(p2.q) - 2.0 * spec.q_value(p1.q)).abs() < 1e-12);
    }

    let (loaded_config, loaded, summaries) = load_checkpoint(dir.path()).unwrap();
    assert_eq!(loaded_config, config);
    assert_eq!(loaded, report.grid);
    assert_eq!(summaries, report.summaries);

    // rerunning a finished checkpoint performs no work
    let again = run_recipe(&config, dir.path(), RunControl { max_optimizations: Some(0) }).unwrap();
    assert_eq!(again.grid, report.grid);
}

fn small_config() -> RecipeConfig {
    RecipeConfig {
        grid: GridSpec {
            q_step: 0.5,
            q_max: 1.0,
            b_step: 0.5,
            b_max: 1.0,
        },
        optimizer: OptimizerSettings {
            max_iterations: 30,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn corrupted_cell_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    run_recipe(&small_config(), dir.path(), RunControl::default()).unwrap();
    let cell = dir.path().join("grid/pi/Q0500_b0100.json");
    assert!(cell.exists());
    fs::write(&cell, "{\"schema\": \"sordor-cell\", \"version\": 1, \"key\": ").unwrap();
    match run_recipe(&small_config(), dir.path(), RunControl::default()) {
        Err(Error::CorruptCheckpoint { path, .. }) => assert_eq!(path, cell),
        other => panic!("expected a corrupt-checkpoint error, got {other:?}"),
    }
}

#[test]
fn misplaced_cell_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    run_recipe(&small_config(), dir.path(), RunControl::default()).unwrap();
    let grid = dir.path().join("grid/pi");
    fs::copy(grid.join("Q0000_b0100.json"), grid.join("Q0500_b0050.json")).unwrap();
    assert!(matches!(
        run_recipe(&small_config(), dir.path(), RunControl::default()),
        Err(Error::CorruptCheckpoint { .. })
    ));
}

#[test]
fn corrupted_journal_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let stop = RunControl {
        max_optimizations: Some(2),
    };
    assert!(run_recipe(&small_config(), dir.path(), stop).is_err());
    let journal = dir.path().join("chains/pi/1a.json");
    fs::write(&journal, "not json").unwrap();
    assert!(matches!(
        run_recipe(&small_config(), dir.path(), RunControl::default()),
        Err(Error::CorruptCheckpoint { .. })
    ));
}

#[test]
fn missing_checkpoint_is_a_dependency_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_checkpoint(dir.path()), Err(Error::MissingDependency(_))));
}
