//! Trial batches: parallel execution, CSV outputs, aggregate statistics.
//!
//! Output files are byte-identical across runs of the same config: trials
//! draw from per-trial RNG streams, results are collected in trial order,
//! and floats are printed with the default shortest round-trip formatting.

use super::config::ValidatedScenario;
use super::plot;
use super::sim::run_trial;
use super::trace::{steps_header, TrialTrace, AGGREGATE_HEADER};
use super::HarnessError;
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

/// Runs every trial of the scenario in parallel, ordered by trial index.
pub fn run_trials(scenario: &ValidatedScenario) -> Vec<TrialTrace> {
    (0..scenario.config.trials)
        .into_par_iter()
        .map(|t| run_trial(scenario, t))
        .collect()
}

pub struct ExperimentSummary {
    pub traces: Vec<TrialTrace>,
    /// (trial, description) for every guarantee that failed.
    pub violations: Vec<(usize, String)>,
    pub max_gap: usize,
    pub steps_csv: PathBuf,
    pub aggregate_csv: PathBuf,
    pub plot_files: Vec<PathBuf>,
    pub wall: Duration,
}

/// Runs the batch and writes steps.csv, aggregate.csv, and (optionally) SVG
/// diameter charts under `out_dir`.
pub fn run_experiment(
    scenario: &ValidatedScenario,
    out_dir: &Path,
    plots: bool,
) -> Result<ExperimentSummary, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let traces = run_trials(scenario);
    let wall = start.elapsed();

    let steps_csv = out_dir.join("steps.csv");
    write_steps_csv(&steps_csv, scenario, &traces)?;
    let aggregate_csv = out_dir.join("aggregate.csv");
    let aggregate = aggregate_rows(scenario, &traces);
    write_aggregate_csv(&aggregate_csv, &aggregate)?;

    let mut plot_files = Vec::new();
    if plots {
        let x0_path = out_dir.join("diam_x0.svg");
        let m_path = out_dir.join("diam_m.svg");
        std::fs::write(&x0_path, plot::x0_chart(&aggregate))?;
        std::fs::write(&m_path, plot::m_chart(&aggregate))?;
        plot_files.push(x0_path);
        plot_files.push(m_path);
    }

    let violations: Vec<(usize, String)> = traces
        .iter()
        .flat_map(|t| t.violations.iter().map(move |v| (t.trial, v.clone())))
        .collect();
    let max_gap = traces.iter().map(|t| t.max_gap).max().unwrap_or(0);

    Ok(ExperimentSummary {
        traces,
        violations,
        max_gap,
        steps_csv,
        aggregate_csv,
        plot_files,
        wall,
    })
}

fn write_steps_csv(
    path: &Path,
    scenario: &ValidatedScenario,
    traces: &[TrialTrace],
) -> Result<(), HarnessError> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(
        f,
        "{}",
        steps_header(scenario.sys.state_dim(), scenario.sys.input_dim())
    )?;
    for trace in traces {
        for step in &trace.steps {
            writeln!(f, "{}", step.csv_row(trace.trial))?;
        }
    }
    f.flush()?;
    Ok(())
}

/// One aggregate.csv row: statistics at step k over the trials that reached
/// step k.
pub struct AggregateRow {
    pub k: usize,
    pub min_diam_x0: f64,
    pub mean_diam_x0: f64,
    pub max_diam_x0: f64,
    pub bound: f64,
    pub min_diam_m: f64,
    pub mean_diam_m: f64,
    pub max_diam_m: f64,
}

pub fn aggregate_rows(scenario: &ValidatedScenario, traces: &[TrialTrace]) -> Vec<AggregateRow> {
    let horizon = traces.iter().map(|t| t.steps.len()).max().unwrap_or(0);
    let mut rows = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let mut count = 0usize;
        let (mut min_x0, mut max_x0, mut sum_x0) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        let (mut min_m, mut max_m, mut sum_m) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for t in traces {
            let Some(s) = t.steps.get(k) else { continue };
            count += 1;
            min_x0 = min_x0.min(s.diam_x0_cloud);
            max_x0 = max_x0.max(s.diam_x0_cloud);
            sum_x0 += s.diam_x0_cloud;
            min_m = min_m.min(s.diam_m_cloud);
            max_m = max_m.max(s.diam_m_cloud);
            sum_m += s.diam_m_cloud;
        }
        if count == 0 {
            continue;
        }
        rows.push(AggregateRow {
            k,
            min_diam_x0: min_x0,
            mean_diam_x0: sum_x0 / count as f64,
            max_diam_x0: max_x0,
            bound: scenario.theoretical_bound(k),
            min_diam_m: min_m,
            mean_diam_m: sum_m / count as f64,
            max_diam_m: max_m,
        });
    }
    rows
}

fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<(), HarnessError> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{AGGREGATE_HEADER}")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            r.k,
            r.min_diam_x0,
            r.mean_diam_x0,
            r.max_diam_x0,
            r.bound,
            r.min_diam_m,
            r.mean_diam_m,
            r.max_diam_m,
        )?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ScenarioConfig;

    fn scenario() -> ValidatedScenario {
        ScenarioConfig::from_toml_str(
            r#"
seed = 5
trials = 3
max_steps = 120
r = 2.0
grid_resolution = 41

[system]
a = [[1.014, 0.0], [0.0, 1.014]]
b = [[1.0, 0.0], [0.0, 1.0]]

[x0_box]
center = [0.2, -0.2]
side = 3.5

[m_box]
center = [0.5, 0.5]
side = 1.0
"#,
        )
        .unwrap()
        .validate()
        .unwrap()
    }

    #[test]
    fn csv_outputs_have_the_documented_shape() {
        let dir = tempfile::tempdir().unwrap();
        let summary = run_experiment(&scenario(), dir.path(), true).unwrap();
        assert!(summary.violations.is_empty(), "{:?}", summary.violations);

        let steps = std::fs::read_to_string(&summary.steps_csv).unwrap();
        let mut lines = steps.lines();
        assert_eq!(
            lines.next().unwrap(),
            "trial,k,y,in_recovery,diam_x0_cloud,diam_x0_bound,diam_m_cloud,diam_xk_cloud,x1,x2,u1,u2"
        );
        assert_eq!(steps.lines().count(), 1 + 3 * 120);

        let agg = std::fs::read_to_string(&summary.aggregate_csv).unwrap();
        assert_eq!(agg.lines().next().unwrap(), AGGREGATE_HEADER);
        assert_eq!(agg.lines().count(), 1 + 120);
        let last = agg.lines().last().unwrap();
        let fields: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields[0] as usize, 119);
        assert!(fields[1] <= fields[2] && fields[2] <= fields[3]);
        assert!(fields[5] <= fields[6] && fields[6] <= fields[7]);

        for p in &summary.plot_files {
            let svg = std::fs::read_to_string(p).unwrap();
            assert!(svg.starts_with("<svg"));
            assert!(svg.contains("</svg>"));
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let sc = scenario();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let s1 = run_experiment(&sc, d1.path(), false).unwrap();
        let s2 = run_experiment(&sc, d2.path(), false).unwrap();
        assert_eq!(
            std::fs::read(&s1.steps_csv).unwrap(),
            std::fs::read(&s2.steps_csv).unwrap()
        );
        assert_eq!(
            std::fs::read(&s1.aggregate_csv).unwrap(),
            std::fs::read(&s2.aggregate_csv).unwrap()
        );
    }

    #[test]
    fn aggregate_tracks_contraction() {
        let sc = scenario();
        let traces = run_trials(&sc);
        let rows = aggregate_rows(&sc, &traces);
        let first = rows.first().unwrap();
        let last = rows.last().unwrap();
        assert!(last.max_diam_x0 <= first.min_diam_x0 + 1e-9);
        assert!(last.max_diam_m <= first.max_diam_m);
        for r in &rows {
            assert!(r.max_diam_x0 <= r.bound + 1e-6);
        }
    }
}
