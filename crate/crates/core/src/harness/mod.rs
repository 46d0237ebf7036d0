//! Closed-loop simulation: scenario configs, trial execution, experiment
//! batches, and their file outputs.

mod config;
mod experiment;
mod plot;
mod random_sys;
mod sim;
mod trace;

pub use config::{
    BoxConfig, ConditionReport, ConfigError, PolicyConfig, ScenarioConfig, SystemConfig,
    ValidatedScenario, DEFAULT_C_GROWTH, DEFAULT_GRID_RESOLUTION, GROWTH_HORIZON,
};
pub use experiment::{aggregate_rows, run_experiment, run_trials, AggregateRow, ExperimentSummary};
pub use random_sys::{default_template, random_feasible_system, RandomSystem, SEARCH_BUDGET};
pub use sim::{active_localize, run_trial, sense};
pub use trace::{steps_header, StepRecord, TrialTrace, AGGREGATE_HEADER};

use std::fmt;

#[derive(Debug)]
pub enum HarnessError {
    Config(ConfigError),
    Io(std::io::Error),
    /// The feasible-system search ran out of candidates. The margin is the
    /// smallest amount by which the landmark condition failed, when any
    /// candidate got that far.
    SearchExhausted {
        attempts: usize,
        tightest_margin: Option<f64>,
    },
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(e) => write!(f, "{e}"),
            HarnessError::Io(e) => write!(f, "io: {e}"),
            HarnessError::SearchExhausted {
                attempts,
                tightest_margin,
            } => {
                write!(f, "no feasible system in {attempts} draws")?;
                match tightest_margin {
                    Some(m) => write!(
                        f,
                        "; closest candidate missed the landmark condition by {m}"
                    ),
                    None => write!(f, "; no candidate reached the landmark condition"),
                }
            }
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e)
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e)
    }
}
