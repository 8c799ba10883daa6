//! End-to-end checks of the binary: flag parsing, config files and
//! overrides, exit codes, artifact contracts, and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_exochem"))
}

fn out_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

#[test]
fn stationary_flags_roundtrip() {
    let dir = out_dir("stationary");
    let output = run(&[
        "--mode", "stationary", "--D", "0.1", "--vstar", "1", "--mass", "1", "--n", "201",
        "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["results"]["lambda"].as_f64().unwrap() > 0.36);
    assert!(summary["results"]["residual_inf"].as_f64().unwrap() < 1e-10);
    // every artifact referenced by the summary exists and is non-empty
    for artifact in summary["artifacts"].as_array().unwrap() {
        let path = dir.join(artifact.as_str().unwrap());
        assert!(path.exists(), "missing {}", path.display());
        assert!(std::fs::metadata(&path).unwrap().len() > 0);
    }
    // verdicts all pass on exit 0
    for v in summary["verdicts"].as_array().unwrap() {
        assert_eq!(v["pass"], true, "{v}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = out_dir("config-override");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("exp.json");
    std::fs::write(
        &config_path,
        serde_json::json!({
            "mode": "evolve",
            "model": { "d": 0.1, "v_star": 1.0, "mass": 1.0 },
            "grid": { "n": 101 },
            "scheme": { "dt": 5e-4, "t_final": 0.2, "sample_every": 40 },
            "perturbation": { "eps": 0.01 },
            "output_dir": dir.join("run").to_str().unwrap(),
            "timestamp": false,
        })
        .to_string(),
    )
    .unwrap();

    let output = run(&["--config", config_path.to_str().unwrap(), "--eps", "0.02"]);
    assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("run").join("summary.json")).unwrap(),
    )
    .unwrap();
    // the flag override wins over the file value
    assert_eq!(summary["config"]["perturbation"]["eps"].as_f64().unwrap(), 0.02);
}

#[test]
fn missing_required_field_is_config_error() {
    let dir = out_dir("missing-field");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("bad.json");
    // model.mass missing
    std::fs::write(
        &config_path,
        r#"{ "mode": "stationary", "model": { "d": 0.1, "v_star": 1.0 },
             "grid": { "n": 101 }, "output_dir": "unused" }"#,
    )
    .unwrap();
    let output = run(&["--config", config_path.to_str().unwrap()]);
    assert_eq!(code(&output), 4);
}

#[test]
fn unknown_config_key_is_config_error() {
    let dir = out_dir("unknown-key");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("typo.json");
    std::fs::write(
        &config_path,
        r#"{ "mode": "stationary", "model": { "d": 0.1, "v_star": 1.0, "mass": 1.0 },
             "grid": { "n": 101 }, "output_dir": "unused", "gird": { "n": 7 } }"#,
    )
    .unwrap();
    let output = run(&["--config", config_path.to_str().unwrap()]);
    assert_eq!(code(&output), 4);
}

#[test]
fn negative_d_is_config_error() {
    let output = run(&[
        "--mode", "stationary", "--D", "-1", "--vstar", "1", "--mass", "1", "--n", "101",
        "--out", "unused",
    ]);
    assert_eq!(code(&output), 4);
    assert!(String::from_utf8_lossy(&output.stderr).contains("config error"));
}

#[test]
fn unknown_mode_is_config_error() {
    let output = run(&["--mode", "explode", "--D", "0.1", "--n", "11", "--mass", "1"]);
    assert_eq!(code(&output), 4);
}

#[test]
fn dt_violating_the_step_restriction_is_a_solver_failure() {
    // schema-valid config, but dt breaks the advective restriction at
    // this resolution: rejected inside the pipeline, exit 2
    let dir = out_dir("bad-dt");
    let output = run(&[
        "--mode", "evolve", "--D", "0.1", "--vstar", "1", "--mass", "1", "--n", "401",
        "--dt", "0.05", "--T", "1", "--eps", "0.01", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 2, "{}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn zero_eps_evolve_reports_persistence() {
    let dir = out_dir("persistence");
    let output = run(&[
        "--mode", "evolve", "--D", "0.1", "--vstar", "1", "--mass", "1", "--n", "101",
        "--dt", "5e-4", "--T", "0.5", "--eps", "0", "--sample-every", "100",
        "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("CHECK stationary_persistence: PASS"), "{stdout}");

    // constant mass column in the trajectory
    let body = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let masses: Vec<&str> = body
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert!(masses.len() >= 2);
    let m0: f64 = masses[0].parse().unwrap();
    for m in &masses {
        let m: f64 = m.parse().unwrap();
        assert!((m - m0).abs() <= 1e-12 * m0);
    }
}

#[test]
fn identical_configs_are_byte_identical_without_timestamp() {
    let dir_a = out_dir("determinism-a");
    let dir_b = out_dir("determinism-b");
    for dir in [&dir_a, &dir_b] {
        let output = run(&[
            "--mode", "evolve", "--D", "0", "--mass", "1", "--n", "101", "--dt", "5e-4",
            "--T", "0.2", "--eps", "0.01", "--sample-every", "40", "--no-timestamp",
            "--out", dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));
    }
    for name in ["trajectory.csv", "energies.csv"] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
        assert!(!a.starts_with(b"# generated-at-unix"), "timestamp not suppressed");
    }
}

#[test]
fn decay_mode_d0_brackets_the_rate() {
    let dir = out_dir("decay-d0");
    let output = run(&[
        "--mode", "decay", "--D", "0", "--mass", "1", "--n", "101", "--dt", "1e-3",
        "--T", "10", "--eps", "0.01", "--sample-every", "20",
        "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));
    let fits: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("decay.json")).unwrap()).unwrap();
    let alpha_v = fits["linf_v"]["alpha"].as_f64().unwrap();
    assert!((alpha_v - 1.0).abs() < 0.1, "alpha_v {alpha_v}");
}

#[test]
fn oracle_and_convergence_modes_run_green() {
    let dir = out_dir("oracle");
    let output = run(&[
        "--mode", "oracle", "--D", "0.1", "--vstar", "1", "--mass", "1", "--n", "101",
        "--dt", "5e-4", "--T", "0.2", "--eps", "0.01", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));

    let dir = out_dir("convergence");
    let output = run(&[
        "--mode", "convergence", "--D", "0.1", "--vstar", "1", "--mass", "1", "--n", "51",
        "--dt", "1.6e-3", "--T", "0.25", "--eps", "0.01", "--levels", "3",
        "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("convergence.json")).unwrap())
            .unwrap();
    assert_eq!(report["degenerate"], false);
}

#[test]
fn sweep_mode_reports_layer_widths() {
    let dir = out_dir("sweep");
    let output = run(&[
        "--mode", "sweep", "--D", "0.1", "--vstar", "1", "--mass", "1", "--n", "201",
        "--d-values", "0.1,0.05,0.02", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    let entries = summary["results"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    let widths: Vec<f64> = entries
        .iter()
        .map(|e| e["layer_width"].as_f64().expect("width defined at small D"))
        .collect();
    assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
}
