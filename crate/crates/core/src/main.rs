//! Command-line front end: partition search, feasibility checks, random
//! system generation, single trials, and experiment batches.

use clap::{Parser, Subcommand};
use coarseloc::harness::{
    active_localize, default_template, random_feasible_system, run_experiment, steps_header,
    ConditionReport, ScenarioConfig,
};
use coarseloc::recovery::ConditionCheck;
use coarseloc::svp::{find_svp, Certificate};
use nalgebra::DVector;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Writes to stdout, swallowing a closed pipe (e.g. piping into `head`).
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

#[derive(Parser)]
#[command(
    name = "coarseloc",
    about = "Active localization of unstable linear systems from single-bit proximity measurements",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a minimal covering partition of the unit sphere and print it as JSON
    Svp {
        /// Cap opening in [-1, 1)
        #[arg(long)]
        alpha: f64,
        /// Ambient dimension (the sphere lives in R^dim)
        #[arg(long)]
        dim: usize,
        /// Seed for the direction optimizer
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate the feasibility conditions of a scenario file
    CheckConditions {
        #[arg(long)]
        config: PathBuf,
    },
    /// Search for a random feasible system at a target eigenvalue modulus
    /// and print its scenario as TOML
    RandomSystem {
        #[arg(long)]
        seed: u64,
        /// Eigenvalue modulus of every generated candidate
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        dim: usize,
    },
    /// Run one closed-loop trial from an explicit start and print its steps as CSV
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Starting state, comma- or space-separated
        #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, required = true)]
        x0: Vec<f64>,
        /// Landmark position, comma- or space-separated
        #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, required = true)]
        m: Vec<f64>,
    },
    /// Run the multi-trial experiment and write CSV (and optional SVG) outputs
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for steps.csv and aggregate.csv
        #[arg(long)]
        out: PathBuf,
        /// Also write diam_x0.svg and diam_m.svg
        #[arg(long)]
        plots: bool,
    },
}

/// Exit 2: bad input or infeasible config. Exit 1: a guarantee was violated.
fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Svp { alpha, dim, seed } => cmd_svp(alpha, dim, seed),
        Command::CheckConditions { config } => cmd_check(&config),
        Command::RandomSystem { seed, lambda, dim } => cmd_random(seed, lambda, dim),
        Command::Simulate { config, x0, m } => cmd_simulate(&config, x0, m),
        Command::Experiment { config, out, plots } => cmd_experiment(&config, &out, plots),
    }
}

#[derive(Serialize)]
struct SvpOutput {
    alpha: f64,
    dim: usize,
    count: usize,
    eta: f64,
    certificate: &'static str,
    cell_min_alignments: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

fn cmd_svp(alpha: f64, dim: usize, seed: u64) -> ExitCode {
    let svp = match find_svp(alpha, dim, None, seed) {
        Ok(s) => s,
        Err(e) => return fail_input(&format!("partition search failed: {e}")),
    };
    let out = SvpOutput {
        alpha: svp.alpha(),
        dim: svp.dim(),
        count: svp.len(),
        eta: svp.eta(),
        certificate: match svp.certificate() {
            Certificate::Exact => "exact",
            Certificate::Sampled => "sampled",
        },
        cell_min_alignments: svp.cell_mins().to_vec(),
        vectors: svp
            .basis()
            .vectors()
            .iter()
            .map(|v| v.iter().copied().collect())
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&out).expect("partition serializes");
    text.push('\n');
    emit(&text);
    ExitCode::SUCCESS
}

fn print_check(name: &str, check: &ConditionCheck) {
    println!(
        "{name:<16} {} <= {}  {}",
        check.lhs,
        check.rhs,
        if check.holds() { "PASS" } else { "FAIL" }
    );
}

fn cmd_check(path: &Path) -> ExitCode {
    let cfg = match ScenarioConfig::load(path) {
        Ok(c) => c,
        Err(e) => return fail_input(&e.to_string()),
    };
    let report: ConditionReport = match cfg.condition_report() {
        Ok(r) => r,
        Err(e) => return fail_input(&e.to_string()),
    };
    print_check("instability", &report.instability);
    print_check("controllability", &report.controllability);
    print_check("landmark", &report.landmark);
    print_check("start overlap", &report.start_overlap);
    println!(
        "partition size {}, controllability index {}, probe drift gain {}",
        report.partition_size, report.ctrl_index, report.dbar
    );
    if report.all_hold() {
        println!("verdict: FEASIBLE");
        ExitCode::SUCCESS
    } else {
        println!("verdict: INFEASIBLE");
        ExitCode::from(2)
    }
}

fn cmd_random(seed: u64, lambda: f64, dim: usize) -> ExitCode {
    let template = default_template(dim);
    match random_feasible_system(seed, dim, lambda, &template) {
        Ok(found) => {
            eprintln!("accepted after {} rejections", found.rejections);
            emit(&found.config.to_toml_string());
            ExitCode::SUCCESS
        }
        Err(e) => fail_input(&e.to_string()),
    }
}

fn cmd_simulate(path: &Path, x0: Vec<f64>, m: Vec<f64>) -> ExitCode {
    let scenario = match ScenarioConfig::load(path).and_then(|c| c.validate()) {
        Ok(s) => s,
        Err(e) => return fail_input(&e.to_string()),
    };
    let n = scenario.sys.state_dim();
    if x0.len() != n || m.len() != n {
        return fail_input(&format!(
            "x0 and m must each have {n} entries, got {} and {}",
            x0.len(),
            m.len()
        ));
    }
    let x0 = DVector::from_column_slice(&x0);
    let m = DVector::from_column_slice(&m);
    if !scenario.x0_box.contains(&x0) {
        return fail_input("x0 lies outside the configured initial box");
    }
    if !scenario.m_box.contains(&m) {
        return fail_input("m lies outside the configured landmark box");
    }
    if (&x0 - &m).norm() > scenario.config.r {
        return fail_input(
            "x0 is not within sensing range of m, so no consistent trial starts there",
        );
    }

    let trace = active_localize(&scenario, &x0, &m);
    let mut text = steps_header(scenario.sys.state_dim(), scenario.sys.input_dim());
    text.push('\n');
    for step in &trace.steps {
        text.push_str(&step.csv_row(trace.trial));
        text.push('\n');
    }
    emit(&text);
    eprintln!(
        "{} steps, longest contact gap {}, {} recovery phases",
        trace.steps.len(),
        trace.max_gap,
        trace.recovery_events
    );
    if trace.violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        for v in &trace.violations {
            eprintln!("violation: {v}");
        }
        ExitCode::FAILURE
    }
}

fn cmd_experiment(path: &Path, out: &Path, plots: bool) -> ExitCode {
    let scenario = match ScenarioConfig::load(path).and_then(|c| c.validate()) {
        Ok(s) => s,
        Err(e) => return fail_input(&e.to_string()),
    };
    let summary = match run_experiment(&scenario, out, plots) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    println!(
        "{} trials x {} steps in {:.2?}",
        scenario.config.trials, scenario.config.max_steps, summary.wall
    );
    println!("longest contact gap {}", summary.max_gap);
    println!("wrote {}", summary.steps_csv.display());
    println!("wrote {}", summary.aggregate_csv.display());
    for p in &summary.plot_files {
        println!("wrote {}", p.display());
    }
    if summary.violations.is_empty() {
        println!("violations: none");
        ExitCode::SUCCESS
    } else {
        println!("violations: {}", summary.violations.len());
        for (trial, v) in &summary.violations {
            eprintln!("violation (trial {trial}): {v}");
        }
        ExitCode::FAILURE
    }
}

fn fail_input(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}
