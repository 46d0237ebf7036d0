//! Per-step and per-trial records produced by closed-loop runs.

use nalgebra::DVector;
use std::fmt::Write as _;

/// One simulation step as it is written to the per-step CSV.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub k: usize,
    /// Proximity bit observed at k.
    pub y: bool,
    /// True on steps driven by a recovery plan.
    pub in_recovery: bool,
    /// Position of this step's control within the active plan.
    pub recovery_step_index: Option<usize>,
    pub diam_x0_cloud: f64,
    /// Analytic ceiling tracked by the estimator, not the contraction curve.
    pub diam_x0_bound: f64,
    pub diam_m_cloud: f64,
    /// Only available on positive steps; blank in the CSV otherwise.
    pub diam_xk_cloud: Option<f64>,
    /// State at k, before the step is taken.
    pub x: DVector<f64>,
    /// Control applied at k.
    pub u: DVector<f64>,
}

pub fn steps_header(state_dim: usize, input_dim: usize) -> String {
    let mut h = String::from(
        "trial,k,y,in_recovery,diam_x0_cloud,diam_x0_bound,diam_m_cloud,diam_xk_cloud",
    );
    for i in 1..=state_dim {
        let _ = write!(h, ",x{i}");
    }
    for i in 1..=input_dim {
        let _ = write!(h, ",u{i}");
    }
    h
}

pub const AGGREGATE_HEADER: &str =
    "k,min_diam_x0,mean_diam_x0,max_diam_x0,bound,min_diam_m,mean_diam_m,max_diam_m";

impl StepRecord {
    pub fn csv_row(&self, trial: usize) -> String {
        let mut row = format!(
            "{},{},{},{},{},{},{},",
            trial,
            self.k,
            self.y as u8,
            self.in_recovery as u8,
            self.diam_x0_cloud,
            self.diam_x0_bound,
            self.diam_m_cloud,
        );
        if let Some(d) = self.diam_xk_cloud {
            let _ = write!(row, "{d}");
        }
        for v in self.x.iter() {
            let _ = write!(row, ",{v}");
        }
        for v in self.u.iter() {
            let _ = write!(row, ",{v}");
        }
        row
    }
}

/// Everything one trial produced.
#[derive(Debug, Clone)]
pub struct TrialTrace {
    pub trial: usize,
    pub steps: Vec<StepRecord>,
    /// Human-readable descriptions of every guarantee that failed.
    pub violations: Vec<String>,
    /// Longest run of consecutive misses observed.
    pub max_gap: usize,
    pub x0_true: DVector<f64>,
    pub m_true: DVector<f64>,
    /// Number of times a recovery plan was started.
    pub recovery_events: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_match_the_header_shape() {
        let rec = StepRecord {
            k: 3,
            y: true,
            in_recovery: false,
            recovery_step_index: None,
            diam_x0_cloud: 1.25,
            diam_x0_bound: 4.0,
            diam_m_cloud: 0.5,
            diam_xk_cloud: Some(2.5),
            x: DVector::from_column_slice(&[0.1, -0.2]),
            u: DVector::from_column_slice(&[0.0]),
        };
        let header = steps_header(2, 1);
        let row = rec.csv_row(7);
        assert_eq!(
            header.split(',').count(),
            row.split(',').count(),
            "{header} vs {row}"
        );
        assert_eq!(row, "7,3,1,0,1.25,4,0.5,2.5,0.1,-0.2,0");
    }

    #[test]
    fn missing_state_diameter_leaves_an_empty_cell() {
        let rec = StepRecord {
            k: 0,
            y: false,
            in_recovery: true,
            recovery_step_index: Some(0),
            diam_x0_cloud: 1.0,
            diam_x0_bound: 1.0,
            diam_m_cloud: 1.0,
            diam_xk_cloud: None,
            x: DVector::from_column_slice(&[1.0]),
            u: DVector::from_column_slice(&[2.0]),
        };
        assert_eq!(rec.csv_row(0), "0,0,0,1,1,1,1,,1,2");
    }
}
