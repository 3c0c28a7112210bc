//! Command-line behaviour: configuration errors, trace emission and I/O failures.

use std::process::{Command, Output};
use teichlab_cli::config::ExperimentConfig;
use teichlab_cli::report::{write_text, VerificationReport};

fn lab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lab"));
    cmd.args(args).env_remove("LAB_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("lab binary runs")
}

#[test]
fn negative_refinement_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["verify", "--refine", "-1", "--out-dir", dir.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`refine`"), "{err}");
}

#[test]
fn config_file_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"refine": 3, "grid_size": 4}"#).unwrap();
    let out = lab(&["build-surface", "--config", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`grid_size`"));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["verify", "--suite", "fem", "--refine", "2", "--out-dir", dir.path().to_str().unwrap()], &[("LAB_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("LAB_THREADS"));
}

#[test]
fn z_sweep_emits_row_major_csv_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let first = lab(&["sweep", "--kind", "z", "--refine", "2", "--out-dir", d], &[("LAB_THREADS", "1")]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let path = dir.path().join("sweep_z_surface.csv");
    let a = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "p1,p2,E,ell,residual,iterations");
    assert_eq!(lines.len(), 10);
    // row-major: p2 is constant along the first three rows and p1 increases
    let row = |i: usize| -> Vec<f64> { lines[i].split(',').take(2).map(|x| x.parse().unwrap()).collect() };
    assert!(row(1)[1] == row(3)[1] && row(1)[0] < row(2)[0] && row(3)[1] < row(4)[1]);
    let again = lab(&["sweep", "--kind", "z", "--refine", "2", "--out-dir", d], &[("LAB_THREADS", "2")]);
    assert!(again.status.success());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), a);
    assert!(dir.path().join("sweep_z_loop0.csv").exists());
}

#[test]
fn writing_into_a_missing_directory_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("absent").join("trace.csv");
    let err = write_text(&path, "p1\n").unwrap_err().to_string();
    assert!(err.contains(&path.display().to_string()), "{err}");
}

#[test]
fn fem_suite_writes_a_passing_report_echoing_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let report = dir.path().join("r.json");
    let out = lab(&["verify", "--suite", "fem", "--refine", "4", "--out-dir", d, "--report", report.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let r = VerificationReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r.passed && r.total == r.checks.len() && r.failed.is_empty());
    assert_eq!(r.config.refine, 4);
    assert_eq!(r.config.suite, "fem");
    assert!(r.checks.iter().all(|c| c.name.starts_with("fem.") && !c.anchor.is_empty()));
    let runtime = dir.path().join("r.json.runtime.json");
    assert!(std::fs::read_to_string(runtime).unwrap().contains("fem.topology"));
}

#[test]
fn build_surface_round_trips_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.json");
    let out = lab(&["build-surface", "--refine", "1", "--out", path.to_str().unwrap()], &[]);
    assert!(out.status.success());
    let mesh: teichlab::mesh::MeshFile = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(mesh.triangles.len(), 32);
    assert_eq!(mesh.gluing.len(), 8);
}

#[test]
fn default_config_round_trips() {
    let c = ExperimentConfig::default();
    assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap().to_json(), c.to_json());
}
