//! Quadrotor stand-in: point-mass translation behind first-order attitude and
//! climb-rate loops, with linear drag, parametric uncertainty and wind.
//!
//! ```text
//!   phi'   = (phi_cmd - phi) / tau_att          theta' likewise, psi' = yaw rate cmd
//!   a_xy   = g R(psi) [tan theta; -tan phi] - (c_xy / M) v_xy + F_xy / M
//!   vz'    = (vz_cmd - vz) / tau_vz - (c_z / M) vz + F_z / M
//! ```
//!
//! `M` is the mass times its error factor, `c` the drag times its error
//! factor. Integration is classical RK4; the wind force is sampled at the
//! start of each step and held across it.

mod wind;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use crate::lti::{LtiError, TransferFunction};

pub use wind::{Region, WindField, WindKind, WindModel};

pub const ATTITUDE_LIMIT: f64 = std::f64::consts::FRAC_PI_3;
pub const CLIMB_RATE_LIMIT: f64 = 4.0;
pub const DEFAULT_YAW_GAIN: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("invalid plant configuration: {0}")]
    Config(String),
    #[error("plant state became non-finite at t = {}", state.time)]
    NonFinite { state: Box<VehicleState> },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Roll, pitch, yaw.
    pub attitude: [f64; 3],
    pub time: f64,
}

impl VehicleState {
    pub fn at(position: [f64; 3]) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(&self.velocity)
            .chain(&self.attitude)
            .all(|v| v.is_finite())
            && self.time.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub roll: f64,
    pub pitch: f64,
    pub climb_rate: f64,
    pub yaw_rate: f64,
}

impl Command {
    /// Applies the actuator limits.
    pub fn saturated(self) -> Self {
        Self {
            roll: self.roll.clamp(-ATTITUDE_LIMIT, ATTITUDE_LIMIT),
            pitch: self.pitch.clamp(-ATTITUDE_LIMIT, ATTITUDE_LIMIT),
            climb_rate: self.climb_rate.clamp(-CLIMB_RATE_LIMIT, CLIMB_RATE_LIMIT),
            yaw_rate: self.yaw_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub mass: f64,
    pub linear_drag: [f64; 3],
    pub attitude_time_constant: f64,
    pub vz_time_constant: f64,
    pub gravity: f64,
    pub mass_error_factor: f64,
    pub drag_error_factor: f64,
}

impl Default for PlantParams {
    /// Nominal vehicle with the default model mismatch (heavier, less drag).
    fn default() -> Self {
        Self {
            mass_error_factor: 1.3,
            drag_error_factor: 0.7,
            ..Self::nominal()
        }
    }
}

impl PlantParams {
    pub fn nominal() -> Self {
        Self {
            mass: 0.5,
            linear_drag: [0.3, 0.3, 0.4],
            attitude_time_constant: 0.1,
            vz_time_constant: 0.3,
            gravity: 9.81,
            mass_error_factor: 1.0,
            drag_error_factor: 1.0,
        }
    }

    pub fn effective_mass(&self) -> f64 {
        self.mass * self.mass_error_factor
    }

    pub fn effective_drag(&self) -> [f64; 3] {
        self.linear_drag.map(|c| c * self.drag_error_factor)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            self.mass,
            self.attitude_time_constant,
            self.vz_time_constant,
            self.gravity,
            self.drag_error_factor,
        ]
        .iter()
        .chain(&self.linear_drag)
        .all(|v| v.is_finite() && *v > 0.0);
        if !positive {
            return Err(PlantError::Config(
                "mass, drag, time constants, gravity and drag factor must be positive".into(),
            ));
        }
        if !(0.5..=2.0).contains(&self.mass_error_factor) {
            return Err(PlantError::Config(format!(
                "mass error factor must lie in [0.5, 2], got {}",
                self.mass_error_factor
            )));
        }
        Ok(())
    }
}

/// Maps the L1 output (normalized accelerations and a climb rate) to an
/// attitude command at yaw `psi`. Returns the command and whether any arcsine
/// argument had to be clamped to [-1, 1].
pub fn attitude_command(u: [f64; 3], psi: f64, yaw_gain: f64) -> (Command, bool) {
    let (s, c) = psi.sin_cos();
    let lateral = -u[0] * s + u[1] * c;
    let forward = u[0] * c + u[1] * s;
    let clamped = lateral.abs() > 1.0 || forward.abs() > 1.0;
    let cmd = Command {
        roll: -lateral.clamp(-1.0, 1.0).asin(),
        pitch: forward.clamp(-1.0, 1.0).asin(),
        climb_rate: u[2],
        yaw_rate: -yaw_gain * psi,
    };
    (cmd, clamped)
}

/// [`attitude_command`] with the default yaw gain; saturated to the limits.
pub fn attitude_transform(u: [f64; 3], psi: f64) -> Command {
    attitude_command(u, psi, DEFAULT_YAW_GAIN).0.saturated()
}

type Deriv = [f64; 9];

fn derivative(p: &PlantParams, x: &Deriv, cmd: &Command, force: &[f64; 3]) -> Deriv {
    let m = p.effective_mass();
    let c = p.effective_drag();
    let g = p.gravity;
    let (phi, theta, psi) = (x[6], x[7], x[8]);
    let bx = g * theta.tan();
    let by = -g * phi.tan();
    let (s, co) = psi.sin_cos();
    [
        x[3],
        x[4],
        x[5],
        co * bx - s * by - c[0] / m * x[3] + force[0] / m,
        s * bx + co * by - c[1] / m * x[4] + force[1] / m,
        (cmd.climb_rate - x[5]) / p.vz_time_constant - c[2] / m * x[5] + force[2] / m,
        (cmd.roll - phi) / p.attitude_time_constant,
        (cmd.pitch - theta) / p.attitude_time_constant,
        cmd.yaw_rate,
    ]
}

fn pack(s: &VehicleState) -> Deriv {
    let mut x = [0.0; 9];
    x[0..3].copy_from_slice(&s.position);
    x[3..6].copy_from_slice(&s.velocity);
    x[6..9].copy_from_slice(&s.attitude);
    x
}

fn axpy(x: &Deriv, h: f64, k: &Deriv) -> Deriv {
    std::array::from_fn(|i| x[i] + h * k[i])
}

/// One RK4 step under a held command and a held wind force.
pub fn plant_step_with_force(
    params: &PlantParams,
    state: &VehicleState,
    cmd: &Command,
    force: [f64; 3],
    dt: f64,
) -> Result<VehicleState, PlantError> {
    let cmd = cmd.saturated();
    let x = pack(state);
    let k1 = derivative(params, &x, &cmd, &force);
    let k2 = derivative(params, &axpy(&x, dt / 2.0, &k1), &cmd, &force);
    let k3 = derivative(params, &axpy(&x, dt / 2.0, &k2), &cmd, &force);
    let k4 = derivative(params, &axpy(&x, dt, &k3), &cmd, &force);
    let next: Deriv = std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    let mut out = VehicleState {
        position: [next[0], next[1], next[2]],
        velocity: [next[3], next[4], next[5]],
        attitude: [next[6], next[7], next[8]],
        time: state.time + dt,
    };
    // first-order tracking of a saturated command cannot leave the limits,
    // but round-off may graze them
    out.attitude[0] = out.attitude[0].clamp(-ATTITUDE_LIMIT, ATTITUDE_LIMIT);
    out.attitude[1] = out.attitude[1].clamp(-ATTITUDE_LIMIT, ATTITUDE_LIMIT);
    if !out.is_finite() {
        return Err(PlantError::NonFinite {
            state: Box::new(out),
        });
    }
    Ok(out)
}

/// One RK4 step with the wind evaluated at the start of the step.
pub fn plant_step(
    params: &PlantParams,
    state: &VehicleState,
    cmd: &Command,
    wind: &WindField,
    dt: f64,
) -> Result<VehicleState, PlantError> {
    let force = wind.force(state.time, &state.position);
    plant_step_with_force(params, state, cmd, force, dt)
}

/// Velocity-slope and offset bounds `(L, L0)` of the lumped disturbance.
pub fn lipschitz_estimate(wind: &WindModel, params: &PlantParams) -> (f64, f64) {
    let m = params.effective_mass();
    let l = params.effective_drag().iter().cloned().fold(0.0, f64::max) / m;
    (l, wind.force_bound() / m)
}

/// Hover linearization of the command-to-velocity channels, one transfer
/// function per axis: `g / ((tau s + 1)(s + c/m))` horizontally and
/// `(1/tau_z) / (s + 1/tau_z + c_z/m)` vertically.
pub fn linearized_velocity_channels(params: &PlantParams) -> Result<Vec<TransferFunction>, LtiError> {
    let m = params.effective_mass();
    let c = params.effective_drag();
    let tau = params.attitude_time_constant;
    let mut out = Vec::with_capacity(3);
    for ci in &c[..2] {
        let d = ci / m;
        out.push(TransferFunction::new(
            vec![params.gravity / tau],
            vec![1.0, 1.0 / tau + d, d / tau],
        )?);
    }
    let tz = params.vz_time_constant;
    out.push(TransferFunction::new(vec![1.0 / tz], vec![1.0, 1.0 / tz + c[2] / m])?);
    Ok(out)
}

/// A plant with its own wind field, advanced in fixed inner steps.
#[derive(Debug, Clone)]
pub struct Plant {
    params: PlantParams,
    state: VehicleState,
    wind: WindField,
    dt: f64,
    steps: u64,
    start_time: f64,
    last_force: [f64; 3],
}

impl Plant {
    pub fn new(
        params: PlantParams,
        initial: VehicleState,
        wind: &WindModel,
        dt: f64,
    ) -> Result<Self, PlantError> {
        params.validate()?;
        wind.validate()?;
        if !(dt > 0.0 && dt <= 1e-3 + 1e-15) {
            return Err(PlantError::Config(format!(
                "inner step must be in (0, 1 ms], got {dt}"
            )));
        }
        Ok(Self {
            params,
            state: initial,
            wind: wind.field(),
            dt,
            steps: 0,
            start_time: initial.time,
            last_force: [0.0; 3],
        })
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    /// Wind force applied during the most recent inner step.
    pub fn last_force(&self) -> [f64; 3] {
        self.last_force
    }

    /// Holds `cmd` for `steps` inner steps and returns the last nonzero wind
    /// force seen during the interval (zero if the wind never acted).
    pub fn advance(&mut self, cmd: &Command, steps: usize) -> Result<[f64; 3], PlantError> {
        let mut seen = [0.0; 3];
        for _ in 0..steps {
            let force = self.wind.force(self.state.time, &self.state.position);
            if force != [0.0; 3] {
                seen = force;
            }
            self.state = plant_step_with_force(&self.params, &self.state, cmd, force, self.dt)?;
            // time from the step count, so it does not drift with repeated sums
            self.steps += 1;
            self.state.time = self.start_time + self.steps as f64 * self.dt;
            self.last_force = force;
        }
        Ok(seen)
    }
}
