use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::lti::{Domain, LtiSystem};

/// `y(k+1) = a1 y(k) + a2 y(k-1) + b1 u(k) + b2 u(k-1)` in deviation
/// coordinates around the first sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderModel {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub sample_period: f64,
    /// RMS of the simulated output error over the fit data.
    pub fit_residual: f64,
}

impl SecondOrderModel {
    pub fn coefficients(&self) -> [f64; 4] {
        [self.a1, self.a2, self.b1, self.b2]
    }

    /// Both roots of `z^2 - a1 z - a2` strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        // Jury conditions for z^2 + c1 z + c0 with c1 = -a1, c0 = -a2
        let (c1, c0) = (-self.a1, -self.a2);
        c0.abs() < 1.0 && 1.0 + c1 + c0 > 0.0 && 1.0 - c1 + c0 > 0.0
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b1 + self.b2) / (1.0 - self.a1 - self.a2)
    }

    /// Observable canonical realization with state
    /// `[y(k); a2 y(k-1) + b2 u(k-1)]`.
    pub fn to_system(&self) -> Result<LtiSystem, BaselineError> {
        Ok(LtiSystem::new(
            DMatrix::from_row_slice(2, 2, &[self.a1, 1.0, self.a2, 0.0]),
            DMatrix::from_row_slice(2, 1, &[self.b1, self.b2]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
            Domain::Discrete {
                step: self.sample_period,
            },
        )?)
    }

    /// Model state matching the realization of [`Self::to_system`].
    pub fn state(&self, y_now: f64, y_prev: f64, u_prev: f64) -> [f64; 2] {
        [y_now, self.a2 * y_prev + self.b2 * u_prev]
    }

    /// Free simulation from rest at the initial samples.
    pub fn simulate(&self, u: &[f64], y0: f64, u0: f64) -> Vec<f64> {
        simulate(&self.coefficients(), u, y0, u0)
    }
}

/// Identified per-axis models of a closed loop, kept fixed once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedModel {
    pub axes: Vec<SecondOrderModel>,
    /// Largest per-axis residual.
    pub fit_residual: f64,
}

fn simulate(theta: &[f64; 4], u: &[f64], y0: f64, u0: f64) -> Vec<f64> {
    let n = u.len();
    let mut y = vec![0.0; n];
    if n == 0 {
        return y;
    }
    let [a1, a2, b1, b2] = *theta;
    let du = |k: usize| u[k] - u0;
    // deviation coordinates, at rest before k = 0
    let mut dy = vec![0.0; n];
    for k in 0..n - 1 {
        let ym1 = if k >= 1 { dy[k - 1] } else { 0.0 };
        let um1 = if k >= 1 { du(k - 1) } else { 0.0 };
        dy[k + 1] = a1 * dy[k] + a2 * ym1 + b1 * du(k) + b2 * um1;
    }
    for k in 0..n {
        y[k] = y0 + dy[k];
    }
    y
}

fn rms_error(theta: &[f64; 4], u: &[f64], y: &[f64]) -> f64 {
    let sim = simulate(theta, u, y[0], u[0]);
    (sim.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt()
}

/// Linear least-squares fit of the equation error.
fn arx_fit(u: &[f64], y: &[f64]) -> Result<[f64; 4], BaselineError> {
    let (u0, y0) = (u[0], y[0]);
    let n = y.len();
    let rows = n - 1;
    let mut phi = DMatrix::zeros(rows, 4);
    let mut target = DVector::zeros(rows);
    for k in 0..rows {
        let ym1 = if k >= 1 { y[k - 1] - y0 } else { 0.0 };
        let um1 = if k >= 1 { u[k - 1] - u0 } else { 0.0 };
        phi[(k, 0)] = y[k] - y0;
        phi[(k, 1)] = ym1;
        phi[(k, 2)] = u[k] - u0;
        phi[(k, 3)] = um1;
        target[k] = y[k + 1] - y0;
    }
    let svd = phi.svd(true, true);
    let theta = svd
        .solve(&target, 1e-12)
        .map_err(|e| BaselineError::Numerical(format!("least squares failed: {e}")))?;
    Ok([theta[0], theta[1], theta[2], theta[3]])
}

/// Gauss-Newton (Levenberg-damped) refinement of the output error, which
/// removes the bias the equation-error fit suffers under output noise.
fn output_error_refine(u: &[f64], y: &[f64], start: [f64; 4]) -> [f64; 4] {
    let n = y.len();
    let mut theta = start;
    let mut cost = rms_error(&theta, u, y);
    let mut damping = 1e-6;
    for _ in 0..50 {
        let base = simulate(&theta, u, y[0], u[0]);
        let mut jac = DMatrix::zeros(n, 4);
        for j in 0..4 {
            let h = 1e-7 * theta[j].abs().max(1e-3);
            let mut t = theta;
            t[j] += h;
            let s = simulate(&t, u, y[0], u[0]);
            for k in 0..n {
                jac[(k, j)] = (s[k] - base[k]) / h;
            }
        }
        let resid = DVector::from_fn(n, |k, _| y[k] - base[k]);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * resid;
        let mut improved = false;
        for _ in 0..10 {
            let mut lhs = jtj.clone();
            for d in 0..4 {
                lhs[(d, d)] *= 1.0 + damping;
            }
            let Some(delta) = lhs.lu().solve(&jtr) else {
                damping *= 10.0;
                continue;
            };
            let mut cand = theta;
            for j in 0..4 {
                cand[j] += delta[j];
            }
            let c = rms_error(&cand, u, y);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                theta = cand;
                cost = c;
                damping = (damping * 0.3).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    theta
}

/// Fits a second-order discrete model to one recorded input/output record.
/// With `refine`, the least-squares estimate seeds an output-error fit.
pub fn fit_second_order(
    u: &[f64],
    y: &[f64],
    sample_period: f64,
    refine: bool,
) -> Result<SecondOrderModel, BaselineError> {
    if u.len() != y.len() {
        return Err(BaselineError::Config(format!(
            "input has {} samples, output {}",
            u.len(),
            y.len()
        )));
    }
    if y.len() < 8 {
        return Err(BaselineError::Config("need at least 8 samples to fit".into()));
    }
    if u.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(BaselineError::Numerical("non-finite identification data".into()));
    }
    let mut theta = arx_fit(u, y)?;
    if refine {
        theta = output_error_refine(u, y, theta);
    }
    let model = SecondOrderModel {
        a1: theta[0],
        a2: theta[1],
        b1: theta[2],
        b2: theta[3],
        sample_period,
        fit_residual: rms_error(&theta, u, y),
    };
    if !model.is_stable() {
        return Err(BaselineError::UnstableFit(format!(
            "a1 = {}, a2 = {}, b1 = {}, b2 = {}, residual = {}",
            model.a1, model.a2, model.b1, model.b2, model.fit_residual
        )));
    }
    Ok(model)
}

/// First-order fit `y(k+1) = a y(k) + b u(k)`, used to compare model classes.
pub fn fit_first_order(u: &[f64], y: &[f64]) -> Result<(f64, f64, f64), BaselineError> {
    if u.len() != y.len() || y.len() < 4 {
        return Err(BaselineError::Config("bad first-order fit data".into()));
    }
    let (u0, y0) = (u[0], y[0]);
    let rows = y.len() - 1;
    let phi = DMatrix::from_fn(rows, 2, |k, j| if j == 0 { y[k] - y0 } else { u[k] - u0 });
    let target = DVector::from_fn(rows, |k, _| y[k + 1] - y0);
    let theta = phi
        .svd(true, true)
        .solve(&target, 1e-12)
        .map_err(|e| BaselineError::Numerical(e.to_string()))?;
    let (a, b) = (theta[0], theta[1]);
    let full = [a, 0.0, b, 0.0];
    Ok((a, b, rms_error(&full, u, y)))
}

/// A closed loop that can be excited with a reference step on one axis.
pub trait ClosedLoopRunner {
    fn sample_period(&self) -> f64;
    /// Returns the applied reference and the measured output on `axis`.
    fn step_response(
        &mut self,
        axis: usize,
        step_size: f64,
        duration: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), BaselineError>;
}

/// Steps each listed axis separately and fits one model per axis.
pub fn identify_step_response(
    runner: &mut dyn ClosedLoopRunner,
    axes: &[usize],
    step_size: f64,
    duration: f64,
) -> Result<IdentifiedModel, BaselineError> {
    let ts = runner.sample_period();
    let mut models = Vec::with_capacity(axes.len());
    for &axis in axes {
        let (u, y) = runner.step_response(axis, step_size, duration)?;
        models.push(fit_second_order(&u, &y, ts, true)?);
    }
    let fit_residual = models.iter().map(|m| m.fit_residual).fold(0.0, f64::max);
    Ok(IdentifiedModel {
        axes: models,
        fit_residual,
    })
}
