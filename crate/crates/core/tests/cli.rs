//! End-to-end checks of the command-line front end: each subcommand is run
//! as a child process and judged on exit code, stdout shape, and files.

use coarseloc::harness::{steps_header, ScenarioConfig};
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coarseloc"))
}

fn config_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

#[test]
fn svp_prints_the_partition_as_json() {
    let alpha = format!("{}", 3.0f64.sqrt() / 2.0);
    let out = run(&["svp", "--alpha", &alpha, "--dim", "2"]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let parsed: serde_json::Value =
        serde_json::from_str(&stdout_str(&out)).expect("stdout is a JSON document");
    assert_eq!(parsed["count"], 6);
    assert_eq!(parsed["dim"], 2);
    let eta = parsed["eta"].as_f64().expect("eta is a number");
    assert!((eta - 0.5).abs() < 1e-9, "eta {eta}");
    let vectors = parsed["vectors"].as_array().expect("vectors array");
    assert_eq!(vectors.len(), 6);
    for v in vectors {
        let coords: Vec<f64> = v
            .as_array()
            .expect("vector is an array")
            .iter()
            .map(|x| x.as_f64().expect("coordinate is a number"))
            .collect();
        let norm: f64 = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9, "direction norm {norm}");
    }
}

#[test]
fn svp_rejects_a_bad_aperture() {
    let out = run(&["svp", "--alpha", "1.5", "--dim", "2"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_str(&out));
}

#[test]
fn feasible_config_passes_the_condition_gate() {
    let out = run(&[
        "check-conditions",
        "--config",
        config_path("setup1.toml").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let text = stdout_str(&out);
    assert!(text.contains("verdict: FEASIBLE"), "stdout: {text}");
    assert!(text.contains("landmark"), "stdout: {text}");
}

#[test]
fn overly_fast_plant_fails_the_condition_gate() {
    let dir = tempfile::tempdir().expect("temp dir");
    let base = std::fs::read_to_string(config_path("setup1.toml")).expect("base config");
    let fast = base.replace("1.014", "1.1");
    assert_ne!(base, fast, "substitution changed the system");
    let path = dir.path().join("fast.toml");
    std::fs::write(&path, fast).expect("config written");

    let out = run(&["check-conditions", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stdout: {}", stdout_str(&out));
    assert!(stdout_str(&out).contains("verdict: INFEASIBLE"));
}

#[test]
fn missing_config_reports_bad_input() {
    let out = run(&["check-conditions", "--config", "/nonexistent/nowhere.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).starts_with("error:"));
}

#[test]
fn random_system_emits_a_feasible_scenario() {
    let out = run(&[
        "random-system",
        "--seed",
        "3",
        "--lambda",
        "1.012",
        "--dim",
        "2",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));

    let toml_text = stdout_str(&out);
    let cfg = ScenarioConfig::from_toml_str(&toml_text).expect("emitted TOML parses back");
    let scenario = cfg.validate().expect("emitted scenario validates");
    assert!((scenario.sys.lambda_min() - 1.012).abs() < 1e-9);

    // The emitted file passes the same gate it was searched under.
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("random.toml");
    std::fs::write(&path, toml_text).expect("config written");
    let check = run(&["check-conditions", "--config", path.to_str().unwrap()]);
    assert!(check.status.success());
    assert!(stdout_str(&check).contains("verdict: FEASIBLE"));
}

#[test]
fn simulate_streams_a_full_trace() {
    let out = run(&[
        "simulate",
        "--config",
        config_path("setup1.toml").to_str().unwrap(),
        "--x0",
        "0.2,-0.2",
        "--m",
        "0.5,0.5",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(steps_header(2, 2).as_str()));
    assert_eq!(lines.count(), 500, "one row per step");
}

#[test]
fn simulate_rejects_inconsistent_starts() {
    let config = config_path("setup1.toml");
    let config = config.to_str().unwrap();
    // Wrong dimension.
    let out = run(&[
        "simulate", "--config", config, "--x0", "0.2", "--m", "0.5,0.5",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_str(&out));
    // Outside the initial box.
    let out = run(&[
        "simulate", "--config", config, "--x0", "9,9", "--m", "0.5,0.5",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_str(&out));
    // Beyond sensing range of the landmark; a leading negative number needs
    // the equals form so the shellless parser does not read it as a flag.
    let out = run(&[
        "simulate",
        "--config",
        config,
        "--x0=-1.5,-1.9",
        "--m",
        "0.9,0.9",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_str(&out));
    assert!(stderr_str(&out).contains("sensing range"));
}

#[test]
fn experiment_writes_csv_and_plots() {
    let dir = tempfile::tempdir().expect("temp dir");
    let base = std::fs::read_to_string(config_path("setup1.toml")).expect("base config");
    let small = base
        .replace("trials = 40", "trials = 2")
        .replace("max_steps = 500", "max_steps = 50");
    let config = dir.path().join("small.toml");
    std::fs::write(&config, small).expect("config written");
    let out_dir = dir.path().join("results");

    let out = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--plots",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    assert!(stdout_str(&out).contains("violations: none"));

    let steps = std::fs::read_to_string(out_dir.join("steps.csv")).expect("steps.csv");
    assert!(steps.starts_with(&steps_header(2, 2)));
    assert_eq!(
        steps.lines().count(),
        1 + 2 * 50,
        "header plus trials x steps"
    );
    let aggregate = std::fs::read_to_string(out_dir.join("aggregate.csv")).expect("aggregate.csv");
    assert!(aggregate.starts_with("k,"));
    assert!(aggregate.lines().count() > 1);
    for plot in ["diam_x0.svg", "diam_m.svg"] {
        let svg = std::fs::read_to_string(out_dir.join(plot)).expect("plot file");
        assert!(svg.contains("<svg"), "{plot} is not an SVG");
    }
}
