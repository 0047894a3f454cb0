//! L1 adaptive control with a model predictive reference generator.
//!
//! The crate is organized bottom-up:
//!
//! - [`lti`]: state-space and transfer-function substrate
//! - [`l1ctl`]: the L1 adaptive output-feedback controller and its design checks
//! - [`mpc`]: condensed receding-horizon QP and a dense dual active-set solver
//! - [`baselines`]: PID, LQR (with a DARE solver) and step-response identification
//! - [`plant`]: quadrotor simulator with wind disturbances
//! - [`bench`]: trajectories, scenarios, metrics and suite orchestration

pub mod lti;
pub mod l1ctl;
pub mod mpc;
pub mod baselines;
pub mod plant;
pub mod bench;

mod serde_ext;
