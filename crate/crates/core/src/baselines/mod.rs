//! Comparison controllers: PID, LQR with integral action, and the
//! step-response model identification used by the MPC-over-PID stack.

mod ident;
mod lqr;
mod pid;

use thiserror::Error;

use crate::lti::LtiError;

pub use ident::{
    fit_first_order, fit_second_order, identify_step_response, ClosedLoopRunner,
    IdentifiedModel, SecondOrderModel,
};
pub use lqr::{solve_dare, DareSolution, LqrConfig, LqrTracker};
pub use pid::{pid_step, Pid, PidConfig, PidState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expected {expected} axes, got {got}")]
    Axes { expected: usize, got: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("Riccati iteration did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("identified model is unstable: {0}")]
    UnstableFit(String),
    #[error("closed-loop experiment failed: {0}")]
    Experiment(String),
    #[error(transparent)]
    Lti(#[from] LtiError),
}
