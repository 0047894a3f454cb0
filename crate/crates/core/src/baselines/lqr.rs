use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::lti::{discretize_zoh, LtiSystem};

/// Stabilizing solution of the discrete algebraic Riccati equation.
#[derive(Debug, Clone, PartialEq)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
}

const DARE_MAX_ITERATIONS: usize = 100_000;

fn riccati_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let at_p = a.transpose() * p;
    let s = r + b.transpose() * p * b;
    let gain = s.lu().solve(&(b.transpose() * p * a))?;
    let next = q + &at_p * a - at_p * b * &gain;
    Some(((&next + next.transpose()) * 0.5, gain))
}

/// Kleinman step: the cost matrix of the fixed gain `k`, from the Stein
/// equation `P = Acl' P Acl + Q + K' R K` solved through its Kronecker form.
fn newton_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    k: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let acl = a - b * k;
    let rhs = q + k.transpose() * r * k;
    let lhs = DMatrix::identity(n * n, n * n) - acl.transpose().kronecker(&acl.transpose());
    let x = lhs.lu().solve(&DVector::from_column_slice(rhs.as_slice()))?;
    let p = DMatrix::from_column_slice(n, n, x.as_slice());
    Some((&p + p.transpose()) * 0.5)
}

/// Fixed-point Riccati iteration from `P = Q`, polished by Newton steps.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DareSolution, BaselineError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.shape() != (n, n) || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(BaselineError::Config(format!(
            "DARE shapes A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    if r.clone().cholesky().is_none() {
        return Err(BaselineError::Config("R must be positive definite".into()));
    }
    let mut p = q.clone();
    for it in 1..=DARE_MAX_ITERATIONS {
        let (next, _) = riccati_map(a, b, q, r, &p)
            .ok_or_else(|| BaselineError::Numerical("singular R + B'PB".into()))?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(BaselineError::Numerical("Riccati iteration diverged".into()));
        }
        let change = (&next - &p).amax();
        p = next;
        if change <= 1e-12 * p.amax().max(1.0) {
            let (mapped, mut gain) = riccati_map(a, b, q, r, &p)
                .ok_or_else(|| BaselineError::Numerical("singular R + B'PB".into()))?;
            let mut residual = (&mapped - &p).amax();
            // slow contraction leaves an absolute residual of order 1e-12 |P| / (1 - rho^2)
            for _ in 0..3 {
                let Some(polished) = newton_step(a, b, q, r, &gain) else { break };
                let Some((m2, g2)) = riccati_map(a, b, q, r, &polished) else { break };
                let res2 = (&m2 - &polished).amax();
                if !(res2 < residual) {
                    break;
                }
                (p, gain, residual) = (polished, g2, res2);
            }
            return Ok(DareSolution {
                p,
                gain,
                iterations: it,
                residual,
            });
        }
    }
    Err(BaselineError::NoConvergence {
        iterations: DARE_MAX_ITERATIONS,
    })
}

/// Per-axis LQR weights on `[position error, velocity error, integral]` and
/// on the reference correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrConfig {
    pub position_weight: Vec<f64>,
    pub velocity_weight: Vec<f64>,
    pub integral_weight: Vec<f64>,
    pub input_weight: Vec<f64>,
    pub sample_period: f64,
}

impl LqrConfig {
    pub fn uniform(q_pos: f64, q_vel: f64, q_int: f64, r: f64, sample_period: f64) -> Self {
        Self {
            position_weight: vec![q_pos; 3],
            velocity_weight: vec![q_vel; 3],
            integral_weight: vec![q_int; 3],
            input_weight: vec![r; 3],
            sample_period,
        }
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        let n = self.position_weight.len();
        if n == 0
            || self.velocity_weight.len() != n
            || self.integral_weight.len() != n
            || self.input_weight.len() != n
        {
            return Err(BaselineError::Config("LQR weight vectors must share a nonzero length".into()));
        }
        let psd = self
            .position_weight
            .iter()
            .chain(&self.velocity_weight)
            .chain(&self.integral_weight)
            .all(|w| w.is_finite() && *w >= 0.0);
        if !psd || self.input_weight.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(BaselineError::Config(
                "state weights must be nonnegative and input weights positive".into(),
            ));
        }
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return Err(BaselineError::Config("LQR sample period must be positive".into()));
        }
        Ok(())
    }
}

/// Infinite-horizon LQR with integral action producing `r2 = p* + correction`.
///
/// Each axis model is a continuous `[position; velocity]` system driven by
/// `r2`; it is discretized by ZOH and augmented with `xi += Ts (p - p*)`.
#[derive(Debug, Clone)]
pub struct LqrTracker {
    gains: Vec<DMatrix<f64>>,
    closed_loop_radius: Vec<f64>,
    integral: Vec<f64>,
    sample_period: f64,
}

impl LqrTracker {
    pub fn new(config: &LqrConfig, models: &[LtiSystem]) -> Result<Self, BaselineError> {
        config.validate()?;
        if models.len() != config.position_weight.len() {
            return Err(BaselineError::Axes {
                expected: config.position_weight.len(),
                got: models.len(),
            });
        }
        let ts = config.sample_period;
        let mut gains = Vec::new();
        let mut radius = Vec::new();
        for (i, model) in models.iter().enumerate() {
            if model.order() != 2 || model.inputs() != 1 {
                return Err(BaselineError::Config(
                    "LQR axis model must have state [position; velocity] and one input".into(),
                ));
            }
            let d = discretize_zoh(model, ts)?;
            let mut a = DMatrix::zeros(3, 3);
            a.view_mut((0, 0), (2, 2)).copy_from(d.a());
            a[(2, 0)] = ts;
            a[(2, 2)] = 1.0;
            let mut b = DMatrix::zeros(3, 1);
            b.view_mut((0, 0), (2, 1)).copy_from(d.b());
            let q = DMatrix::from_diagonal(&DVector::from_vec(vec![
                config.position_weight[i],
                config.velocity_weight[i],
                config.integral_weight[i],
            ]));
            let r = DMatrix::from_element(1, 1, config.input_weight[i]);
            let sol = solve_dare(&a, &b, &q, &r)?;
            let closed = &a - &b * &sol.gain;
            let rho = closed
                .complex_eigenvalues()
                .iter()
                .map(|l| l.norm())
                .fold(0.0, f64::max);
            gains.push(sol.gain);
            radius.push(rho);
        }
        Ok(Self {
            integral: vec![0.0; gains.len()],
            gains,
            closed_loop_radius: radius,
            sample_period: ts,
        })
    }

    pub fn gains(&self) -> &[DMatrix<f64>] {
        &self.gains
    }

    pub fn closed_loop_spectral_radius(&self) -> &[f64] {
        &self.closed_loop_radius
    }

    pub fn reset(&mut self) {
        self.integral.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Returns `r2` given targets and measured position/velocity.
    pub fn step(
        &mut self,
        target_pos: &[f64],
        target_vel: &[f64],
        pos: &[f64],
        vel: &[f64],
    ) -> Result<Vec<f64>, BaselineError> {
        let n = self.gains.len();
        for len in [target_pos.len(), target_vel.len(), pos.len(), vel.len()] {
            if len != n {
                return Err(BaselineError::Axes { expected: n, got: len });
            }
        }
        let mut out = vec![0.0; n];
        for i in 0..n {
            let ep = pos[i] - target_pos[i];
            let ev = vel[i] - target_vel[i];
            let k = &self.gains[i];
            let corr = -(k[(0, 0)] * ep + k[(0, 1)] * ev + k[(0, 2)] * self.integral[i]);
            out[i] = target_pos[i] + corr;
            self.integral[i] += self.sample_period * ep;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn memoryless_plant() {
        let sol = solve_dare(&s(0.0), &s(1.0), &s(1.0), &s(1.0)).unwrap();
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(sol.gain[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn golden_ratio() {
        let sol = solve_dare(&s(1.0), &s(1.0), &s(1.0), &s(1.0)).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.p[(0, 0)] - phi).abs() < 1e-9);
        assert!((sol.gain[(0, 0)] - phi / (1.0 + phi)).abs() < 1e-9);
        assert!(sol.residual <= 1e-9);
    }

    #[test]
    fn vanishing_state_cost() {
        let sol = solve_dare(&s(0.5), &s(1.0), &s(0.0), &s(1.0)).unwrap();
        assert!(sol.p[(0, 0)].abs() < 1e-12);
        assert!(sol.gain[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn rejects_singular_input_weight() {
        assert!(solve_dare(&s(1.0), &s(1.0), &s(1.0), &s(0.0)).is_err());
    }

    #[test]
    fn tracker_gains_stabilize_ideal_model() {
        let model = crate::l1ctl::ideal_axis_model(3.0, 1.5).unwrap();
        let cfg = LqrConfig::uniform(10.0, 1.0, 5.0, 0.1, 0.01);
        let lqr = LqrTracker::new(&cfg, &[model.clone(), model.clone(), model]).unwrap();
        assert!(lqr.closed_loop_spectral_radius().iter().all(|&r| r < 1.0));
    }

    #[test]
    fn tracker_on_target_outputs_target() {
        let model = crate::l1ctl::ideal_axis_model(3.0, 1.5).unwrap();
        let cfg = LqrConfig {
            position_weight: vec![1.0],
            velocity_weight: vec![1.0],
            integral_weight: vec![1.0],
            input_weight: vec![1.0],
            sample_period: 0.01,
        };
        let mut lqr = LqrTracker::new(&cfg, &[model]).unwrap();
        let out = lqr.step(&[0.7], &[0.0], &[0.7], &[0.0]).unwrap();
        assert_eq!(out, vec![0.7]);
    }
}
