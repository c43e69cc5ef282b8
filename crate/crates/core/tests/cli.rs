use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sordor(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sordor"))
        .args(args)
        .current_dir(dir)
        .env("SORDOR_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = sordor(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn pulse_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stdout = ok(&["optimize", "--b", "2", "--Q", "0", "--beta", "pi/2", "--name", "p90.json"], d);
    assert!(stdout.contains("F="));
    ok(&["optimize", "--b", "2", "--q", "0", "--beta", "pi", "--name", "p180.json", "--seed", "3"], d);
    assert!(d.join("report.json").exists());
    let m = manifest(&d.join("p180.manifest.json"));
    assert_eq!(m["status"], "complete");
    assert_eq!(m["seeds"][0], 3);
    assert_eq!(m["config"]["b"], 2.0);

    ok(&["simulate", "--sequence", "perfect-echo", "--pulses", "p90.json,p180.json", "--out", "sim"], d);
    let rows = data_lines(&d.join("sim/bloch.csv"));
    assert_eq!(rows[0], "offset_hz,x_from_x,y_from_x,z_from_x,x_from_y,y_from_y,z_from_y,x_from_z,y_from_z,z_from_z");
    assert_eq!(rows.len() - 1, 21);
    for row in &rows[1..] {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        for s in 0..3 {
            let n = (v[1 + 3 * s].powi(2) + v[2 + 3 * s].powi(2) + v[3 + 3 * s].powi(2)).sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }
    assert!(d.join("sim/fidelity.csv").exists());
    assert!(d.join("sim/simulate.manifest.json").exists());

    ok(&["export", "--format", "shape", "--file", "p90.json"], d);
    let shape = std::fs::read_to_string(d.join("p90.shape")).unwrap();
    assert!(shape.contains("# N: 100"));
    assert_eq!(data_lines(&d.join("p90.shape")).len(), 100);

    ok(&["profile", "--file", "p180.json", "--members", "31", "--out", "prof"], d);
    let prof = data_lines(&d.join("prof/profile.csv"));
    assert_eq!(prof[0], "offset_hz,alpha_rad,fidelity");
    assert_eq!(prof.len(), 32);

    ok(&["chirp-compare", "--file", "p180.json", "--out", "chirp"], d);
    let chirp = data_lines(&d.join("chirp/chirp.csv"));
    assert_eq!(chirp[0], "time_us,phase_rad,reference_rad,residual_rad");
    let m = manifest(&d.join("chirp/chirp-compare.manifest.json"));
    assert!(m["conventions"]["chirp_sweep"].as_str().unwrap().contains("(A/2π)²·T"));
    assert_eq!(m["inputs"].as_object().unwrap().len(), 1);
}

#[test]
fn morph_resume_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "morph", "--b-max", "1", "--b-step", "0.5", "--q-step", "0.5", "--max-iterations", "40", "--out", "run",
    ];
    let mut interrupted = args.to_vec();
    interrupted.extend(["--stop-after", "2"]);
    let out = sordor(&interrupted, d);
    assert!(!out.status.success());
    let m = manifest(&d.join("run/morph.manifest.json"));
    assert!(m["status"].as_str().unwrap().starts_with("failed"));

    let stdout = ok(&args, d);
    for label in ["stage 1a", "stage 1b", "stage  2", "stage 3a", "stage 3b"] {
        assert!(stdout.contains(label), "{stdout}");
    }
    let surface = data_lines(&d.join("run/surface.csv"));
    assert_eq!(surface[0], "q,b,fidelity,infidelity,gradient_calls,stage_index");
    assert_eq!(surface.len() - 1, 6);

    ok(&["grid-report", "--dir", "run", "--out", "report"], d);
    assert_eq!(
        std::fs::read_to_string(d.join("report/surface.csv")).unwrap(),
        std::fs::read_to_string(d.join("run/surface.csv")).unwrap()
    );

    // a different configuration in the same directory is refused
    let out = sordor(&["morph", "--b-max", "1", "--b-step", "0.5", "--q-step", "0.5", "--seed", "9", "--out", "run"], d);
    assert!(!out.status.success());
}

#[test]
fn bad_inputs_fail_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = sordor(&["optimize", "--b", "2", "--no-such-flag"], d);
    assert!(!out.status.success());

    let out = sordor(&["optimize", "--b", "2", "--beta", "tau/3"], d);
    assert!(!out.status.success());

    std::fs::write(d.join("old.json"), r#"{"schema":"sordor-waveform","version":0}"#).unwrap();
    let out = sordor(&["export", "--file", "old.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
    let m = manifest(&d.join("export.manifest.json"));
    assert!(m["status"].as_str().unwrap().starts_with("failed"));

    let out = sordor(&["optimize", "--b", "2", "--q", "1.5"], d);
    assert!(!out.status.success());

    let out = Command::new(env!("CARGO_BIN_EXE_sordor"))
        .args(["optimize", "--b", "0.5", "--max-iterations", "1"])
        .current_dir(d)
        .env("SORDOR_THREADS", "many")
        .output()
        .unwrap();
    assert!(!out.status.success());
}
