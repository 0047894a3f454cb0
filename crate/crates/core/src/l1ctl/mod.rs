//! L1 adaptive output-feedback control.
//!
//! Per axis `i` the controller runs
//!
//! ```text
//! output predictor   yhat' = -m_i yhat + m_i (u + sigma_hat)
//! adaptation law     sigma_hat' = Gamma * Proj(sigma_hat, -(yhat - y))
//! control law        u = C_i(s) (r1 - sigma_hat),   C_i(s) = w_i / (s + w_i)
//! ```
//!
//! and, in the extended form, an outer proportional position loop
//! `r1 = K (r2 - y2)`. The predictor and the filters are discretized exactly
//! (zero-order hold); the adaptation law is integrated by forward Euler.

mod condition;

pub use condition::{
    check_norm_condition, closed_loop_h, closed_loop_h_state_space, NormConditionReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lti::{discretize_zoh, LtiError, LtiRunner, LtiSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum L1Error {
    #[error("invalid L1 configuration: {0}")]
    Config(String),
    #[error("axis count mismatch: expected {expected}, got {got}")]
    Axes { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Lti(#[from] LtiError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct L1Config {
    /// Reference-model poles `m_i` (rad/s).
    pub ref_poles: Vec<f64>,
    /// Low-pass filter cutoffs `w_i` (rad/s).
    pub filter_cutoffs: Vec<f64>,
    /// Adaptation gain shared by all axes (1/s).
    pub adaptation_gain: f64,
    /// Per-axis projection bound on `sigma_hat`.
    pub projection_bounds: Vec<f64>,
    /// Controller sample period (s).
    pub sample_period: f64,
    /// Outer proportional gains `K_i` (1/s); zero disables the outer loop.
    pub outer_gains: Vec<f64>,
}

impl Default for L1Config {
    fn default() -> Self {
        let ts = 0.01;
        Self {
            ref_poles: vec![3.0, 3.0, 3.0],
            filter_cutoffs: vec![30.0, 30.0, 30.0],
            adaptation_gain: 40.0 / ts,
            projection_bounds: vec![10.0; 3],
            sample_period: ts,
            outer_gains: vec![1.5, 1.5, 1.5],
        }
    }
}

impl L1Config {
    pub fn axes(&self) -> usize {
        self.ref_poles.len()
    }

    /// Largest adaptation gain for which the discrete predictor/adaptation
    /// loop of axis `i` is stable.
    ///
    /// With `a = exp(-m Ts)` and `b = 1 - a` the error dynamics of one axis
    /// have characteristic polynomial `z^2 - (1 + a - b Gamma Ts) z + a`; the
    /// Jury conditions reduce to `b Gamma Ts < 2 (1 + a)`.
    pub fn adaptation_gain_limit(&self, axis: usize) -> f64 {
        let a = (-self.ref_poles[axis] * self.sample_period).exp();
        let b = 1.0 - a;
        2.0 * (1.0 + a) / (b * self.sample_period)
    }

    pub fn validate(&self) -> Result<(), L1Error> {
        let n = self.axes();
        if n == 0 {
            return Err(L1Error::Config("at least one axis is required".into()));
        }
        for (name, v) in [
            ("filter_cutoffs", &self.filter_cutoffs),
            ("projection_bounds", &self.projection_bounds),
            ("outer_gains", &self.outer_gains),
        ] {
            if v.len() != n {
                return Err(L1Error::Config(format!(
                    "{name} has {} entries, ref_poles has {n}",
                    v.len()
                )));
            }
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !self.ref_poles.iter().all(|&m| positive(m)) {
            return Err(L1Error::Config("ref_poles must be positive".into()));
        }
        if !self.filter_cutoffs.iter().all(|&w| positive(w)) {
            return Err(L1Error::Config("filter_cutoffs must be positive".into()));
        }
        if !self.projection_bounds.iter().all(|&s| positive(s)) {
            return Err(L1Error::Config("projection_bounds must be positive".into()));
        }
        if !self.outer_gains.iter().all(|&k| k.is_finite() && k >= 0.0) {
            return Err(L1Error::Config("outer_gains must be nonnegative".into()));
        }
        if !positive(self.sample_period) {
            return Err(L1Error::Config("sample_period must be positive".into()));
        }
        if !positive(self.adaptation_gain) {
            return Err(L1Error::Config("adaptation_gain must be positive".into()));
        }
        for i in 0..n {
            let limit = self.adaptation_gain_limit(i);
            if self.adaptation_gain >= limit {
                return Err(L1Error::Config(format!(
                    "adaptation_gain {} destabilizes the Euler-integrated adaptation on axis {i} \
                     (limit {limit:.1} at sample period {})",
                    self.adaptation_gain, self.sample_period
                )));
            }
        }
        Ok(())
    }

    /// Ideal closed-loop response from the reference input to the output.
    ///
    /// Without the outer loop each axis is `m_i / (s + m_i)`. With `K_i > 0`
    /// each axis is `K_i m_i / (s^2 + m_i s + K_i m_i)` realized on the
    /// state `[position; velocity]`.
    pub fn ideal_response_model(&self) -> Result<LtiSystem, L1Error> {
        self.validate()?;
        let blocks = (0..self.axes())
            .map(|i| ideal_axis_model(self.ref_poles[i], self.outer_gains[i]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LtiSystem::block_diagonal(&blocks)?)
    }
}

/// Ideal single-axis model; see [`L1Config::ideal_response_model`].
pub fn ideal_axis_model(ref_pole: f64, outer_gain: f64) -> Result<LtiSystem, LtiError> {
    use nalgebra::DMatrix;
    if outer_gain == 0.0 {
        return LtiSystem::first_order(ref_pole);
    }
    let km = outer_gain * ref_pole;
    LtiSystem::continuous(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -km, -ref_pole]),
        DMatrix::from_row_slice(2, 1, &[0.0, km]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::zeros(1, 1),
    )
}

/// Controller memory. `sigma_hat` and `predictor` start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct L1State {
    pub sigma_hat: Vec<f64>,
    pub predictor: Vec<f64>,
    pub last_output: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct L1Diagnostics {
    /// Adaptation updates clipped by the projection.
    pub projection_hits: u64,
    pub steps: u64,
}

/// Everything one controller tick produced.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Tick {
    pub r1: Vec<f64>,
    pub u: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    /// Predictor output compared against the measurement at this tick.
    pub predictor: Vec<f64>,
    /// `yhat - y` at this tick.
    pub prediction_error: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct L1Controller {
    cfg: L1Config,
    predictor_decay: Vec<f64>,
    filters: Vec<LtiRunner>,
    state: L1State,
    diag: L1Diagnostics,
}

impl L1Controller {
    pub fn new(cfg: L1Config) -> Result<Self, L1Error> {
        cfg.validate()?;
        let ts = cfg.sample_period;
        let predictor_decay = cfg.ref_poles.iter().map(|m| (-m * ts).exp()).collect();
        let filters = cfg
            .filter_cutoffs
            .iter()
            .map(|&w| {
                let c = LtiSystem::first_order(w)?;
                LtiRunner::new(discretize_zoh(&c, ts)?)
            })
            .collect::<Result<Vec<_>, LtiError>>()?;
        let n = cfg.axes();
        Ok(Self {
            cfg,
            predictor_decay,
            filters,
            state: L1State {
                sigma_hat: vec![0.0; n],
                predictor: vec![0.0; n],
                last_output: vec![0.0; n],
            },
            diag: L1Diagnostics::default(),
        })
    }

    pub fn config(&self) -> &L1Config {
        &self.cfg
    }

    pub fn state(&self) -> &L1State {
        &self.state
    }

    pub fn diagnostics(&self) -> L1Diagnostics {
        self.diag
    }

    fn check(&self, v: &[f64], what: &'static str) -> Result<(), L1Error> {
        if v.len() != self.cfg.axes() {
            return Err(L1Error::Axes {
                expected: self.cfg.axes(),
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(L1Error::NonFinite(what));
        }
        Ok(())
    }

    /// Advances the output predictor by one sample with `u + sigma_hat` held.
    pub fn predictor_step(&mut self, u: &[f64]) -> Result<&[f64], L1Error> {
        self.check(u, "predictor input")?;
        for i in 0..self.cfg.axes() {
            let a = self.predictor_decay[i];
            self.state.predictor[i] =
                a * self.state.predictor[i] + (1.0 - a) * (u[i] + self.state.sigma_hat[i]);
        }
        Ok(&self.state.predictor)
    }

    /// One Euler step of the projected adaptation law against measurement `y1`.
    pub fn adapt_step(&mut self, y1: &[f64]) -> Result<&[f64], L1Error> {
        self.check(y1, "measurement")?;
        let ts = self.cfg.sample_period;
        let gain = self.cfg.adaptation_gain;
        for i in 0..self.cfg.axes() {
            let err = self.state.predictor[i] - y1[i];
            let bound = self.cfg.projection_bounds[i];
            let s = self.state.sigma_hat[i];
            let rate = -err;
            let outward = (s >= bound && rate > 0.0) || (s <= -bound && rate < 0.0);
            if outward {
                self.diag.projection_hits += 1;
                continue;
            }
            let next = s + ts * gain * rate;
            if next.abs() > bound {
                self.diag.projection_hits += 1;
            }
            self.state.sigma_hat[i] = next.clamp(-bound, bound);
        }
        Ok(&self.state.sigma_hat)
    }

    /// Filters `r1 - sigma_hat` through `C(s)`.
    pub fn control_step(&mut self, r1: &[f64]) -> Result<&[f64], L1Error> {
        self.check(r1, "reference")?;
        for i in 0..self.cfg.axes() {
            let v = r1[i] - self.state.sigma_hat[i];
            self.state.last_output[i] = self.filters[i].step_scalar(v)?;
        }
        Ok(&self.state.last_output)
    }

    /// Outer proportional loop `r1 = K (r2 - y2)`.
    pub fn outer_loop(&self, r2: &[f64], y2: &[f64]) -> Result<Vec<f64>, L1Error> {
        self.check(r2, "position reference")?;
        self.check(y2, "position measurement")?;
        Ok(self
            .cfg
            .outer_gains
            .iter()
            .zip(r2.iter().zip(y2))
            .map(|(k, (r, y))| k * (r - y))
            .collect())
    }

    /// One controller tick with the reference `r1` given directly.
    pub fn tick(&mut self, y1: &[f64], r1: &[f64]) -> Result<L1Tick, L1Error> {
        let predictor = self.state.predictor.clone();
        let prediction_error: Vec<f64> = predictor.iter().zip(y1).map(|(p, y)| p - y).collect();
        self.adapt_step(y1)?;
        let sigma_hat = self.state.sigma_hat.clone();
        let u = self.control_step(r1)?.to_vec();
        self.predictor_step(&u)?;
        self.diag.steps += 1;
        Ok(L1Tick {
            r1: r1.to_vec(),
            u,
            sigma_hat,
            predictor,
            prediction_error,
        })
    }

    /// One tick of the extended architecture: position reference `r2`,
    /// measured velocity `y1` and position `y2`.
    pub fn tick_extended(&mut self, r2: &[f64], y1: &[f64], y2: &[f64]) -> Result<L1Tick, L1Error> {
        let r1 = self.outer_loop(r2, y2)?;
        self.tick(y1, &r1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_cfg(m: f64, w: f64, gain: f64, ts: f64) -> L1Config {
        L1Config {
            ref_poles: vec![m],
            filter_cutoffs: vec![w],
            adaptation_gain: gain,
            projection_bounds: vec![10.0],
            sample_period: ts,
            outer_gains: vec![0.0],
        }
    }

    #[test]
    fn default_config_is_valid() {
        L1Config::default().validate().unwrap();
        assert_eq!(L1Config::default().adaptation_gain, 4000.0);
    }

    #[test]
    fn rejects_invalid_parameters() {
        let mut c = L1Config::default();
        c.ref_poles[1] = 0.0;
        assert!(c.validate().is_err());
        let mut c = L1Config::default();
        c.outer_gains[0] = -1.0;
        assert!(c.validate().is_err());
        let mut c = L1Config::default();
        c.filter_cutoffs.pop();
        assert!(c.validate().is_err());
        let mut c = L1Config::default();
        c.adaptation_gain = 1e6;
        assert!(matches!(c.validate(), Err(L1Error::Config(_))));
    }

    #[test]
    fn predictor_equilibrium() {
        let mut c = L1Controller::new(scalar_cfg(1.0, 10.0, 10.0, 0.1)).unwrap();
        assert_eq!(c.predictor_step(&[0.0]).unwrap(), &[0.0]);
    }

    #[test]
    fn predictor_one_step_is_zoh() {
        let mut c = L1Controller::new(scalar_cfg(1.0, 10.0, 10.0, 0.1)).unwrap();
        let y = c.predictor_step(&[1.0]).unwrap()[0];
        assert!((y - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
        assert!((y - 0.095163).abs() < 1e-6);
    }

    #[test]
    fn predictor_reaches_held_input() {
        let mut c = L1Controller::new(scalar_cfg(1.0, 10.0, 10.0, 0.1)).unwrap();
        let mut y = 0.0;
        for _ in 0..200 {
            y = c.predictor_step(&[0.7]).unwrap()[0];
        }
        assert!((y - 0.7).abs() < 1e-6);
    }

    #[test]
    fn adaptation_zero_error_is_noop() {
        let mut c = L1Controller::new(scalar_cfg(2.0, 10.0, 100.0, 0.01)).unwrap();
        assert_eq!(c.adapt_step(&[0.0]).unwrap(), &[0.0]);
    }

    #[test]
    fn adaptation_single_euler_step() {
        // yhat = 0, y = 0.01 gives yhat - y = -0.01; one step adds Gamma * 0.01 * Ts.
        let mut c = L1Controller::new(scalar_cfg(1.0, 10.0, 1e4, 0.001)).unwrap();
        let s = c.adapt_step(&[0.01]).unwrap()[0];
        assert!((s - 0.1).abs() < 1e-12);
        assert_eq!(c.diagnostics().projection_hits, 0);
    }

    #[test]
    fn projection_holds_boundary() {
        let mut cfg = scalar_cfg(1.0, 10.0, 1e4, 0.001);
        cfg.projection_bounds = vec![0.05];
        let mut c = L1Controller::new(cfg).unwrap();
        // overshoot is clipped onto the bound
        assert_eq!(c.adapt_step(&[0.01]).unwrap()[0], 0.05);
        // outward push at the bound leaves it unchanged
        assert_eq!(c.adapt_step(&[0.5]).unwrap()[0], 0.05);
        assert_eq!(c.diagnostics().projection_hits, 2);
        // inward motion is allowed
        assert!(c.adapt_step(&[-0.001]).unwrap()[0] < 0.05);
    }

    #[test]
    fn control_cancellation_and_dc_gain() {
        let mut c = L1Controller::new(scalar_cfg(1.0, 10.0, 10.0, 0.01)).unwrap();
        assert_eq!(c.control_step(&[0.0]).unwrap(), &[0.0]);
        let first = c.control_step(&[1.0]).unwrap()[0];
        assert!((first - (1.0 - (-0.1f64).exp())).abs() < 1e-12);
        assert!((first - 0.095163).abs() < 1e-6);
        let mut u = 0.0;
        for _ in 0..300 {
            u = c.control_step(&[1.0]).unwrap()[0];
        }
        assert!((u - 1.0).abs() < 1e-6);
    }

    #[test]
    fn outer_loop_scales_elementwise() {
        let mut cfg = L1Config::default();
        cfg.outer_gains = vec![2.0, 2.0, 2.0];
        let c = L1Controller::new(cfg).unwrap();
        assert_eq!(c.outer_loop(&[0.3; 3], &[0.3; 3]).unwrap(), vec![0.0; 3]);
        let r1 = c.outer_loop(&[0.5, 0.0, -1.0], &[0.0; 3]).unwrap();
        assert_eq!(r1, vec![1.0, 0.0, -2.0]);
        let mut cfg = scalar_cfg(1.0, 10.0, 10.0, 0.01);
        cfg.outer_gains = vec![3.0];
        let c = L1Controller::new(cfg).unwrap();
        assert!((c.outer_loop(&[0.1], &[0.0]).unwrap()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn ideal_models() {
        let mut cfg = L1Config::default();
        cfg.outer_gains = vec![0.0; 3];
        cfg.ref_poles = vec![2.0; 3];
        let m = cfg.ideal_response_model().unwrap();
        assert_eq!(m.order(), 3);
        let g = m.dc_gain();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-12);
        let w = m.frequency_response(2.0)[(1, 1)];
        let want = num_complex::Complex64::new(2.0, 0.0) / num_complex::Complex64::new(2.0, 2.0);
        assert!((w - want).norm() < 1e-12);

        let d = ideal_axis_model(1.0, 1.0).unwrap();
        assert!((d.dc_gain()[(0, 0)] - 1.0).abs() < 1e-12);
        // s^2 + s + 1: natural frequency 1, damping 0.5
        let eig = d.eigenvalues();
        let wn = eig[0].norm();
        let zeta = -eig[0].re / wn;
        assert!((wn - 1.0).abs() < 1e-12);
        assert!((zeta - 0.5).abs() < 1e-12);
    }

    #[test]
    fn extended_tick_runs_whole_chain() {
        let mut c = L1Controller::new(L1Config::default()).unwrap();
        let t = c.tick_extended(&[1.0, 0.0, 0.0], &[0.0; 3], &[0.0; 3]).unwrap();
        assert!((t.r1[0] - 1.5).abs() < 1e-15);
        assert!(t.u[0] > 0.0);
        assert_eq!(t.prediction_error, vec![0.0; 3]);
        assert!(c.state().predictor[0] > 0.0);
    }
}
