//! Experiment harness: trajectory library, scenario composition, the
//! closed-loop runner, metrics, CSV output, suites and gain tuning.

mod norm;
mod run;
mod scenario;
mod suite;
mod trajectory;
pub mod tuning;

use thiserror::Error;

pub use norm::{run_norm_check, NormCheckConfig, NormCheckOutcome};
pub use run::{
    avg_error_from_csv, compute_avg_error, csv_string, identify_pid_loop, ideal_mpc_problems,
    read_csv, run_scenario, run_scenario_traced, write_csv, CsvTable, ErrorStats,
    PidHoverExperiment, RunDiagnostics, RunFailure, ScenarioResult, CSV_COLUMNS,
};
pub use scenario::{
    default_gust, default_inner_pid, default_lqr, default_outer_pid, stack_label,
    IdentificationConfig, InnerKind, OuterKind, Scenario, WindPreset, WindSetting,
    DEFAULT_GUST_FORCE, DEFAULT_GUST_WIDTH,
};
pub use suite::{
    run_suite, write_suite_outputs, Assertion, AssertionOutcome, Grid, SuiteConfig, SuiteOptions,
    SuiteReport, SummaryRow,
};
pub use trajectory::{
    finite_difference, make_trajectory, Trajectory, TrajectoryInfo, TrajectoryParams,
    HOLD_SECONDS, HOVER_SECONDS, LIBRARY, MAX_SPEED,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scenario {key} failed at step {step}: {message}")]
    Runtime {
        key: String,
        step: usize,
        message: String,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    L1(#[from] crate::l1ctl::L1Error),
    #[error(transparent)]
    Mpc(#[from] crate::mpc::MpcError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
    #[error(transparent)]
    Plant(#[from] crate::plant::PlantError),
    #[error(transparent)]
    Lti(#[from] crate::lti::LtiError),
}

impl BenchError {
    /// True for problems with the inputs rather than with a run.
    pub fn is_config(&self) -> bool {
        !matches!(self, Self::Runtime { .. } | Self::Io(_))
    }
}
