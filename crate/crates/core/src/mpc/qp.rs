//! Dense strictly convex QP solver.
//!
//! Solves
//!
//! ```text
//!     minimize     1/2 x' H x + f' x
//!     subject to   A x <= b
//! ```
//!
//! with the dual active-set method of Goldfarb and Idnani. The iteration starts
//! from the unconstrained minimizer and adds the most violated constraint at a
//! time, dropping constraints whose multipliers would turn negative, so it
//! needs no feasible starting point and detects infeasibility directly.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("QP dimension mismatch: {0}")]
    Dimension(String),
    #[error("QP data contains non-finite values")]
    NonFinite,
    #[error("Hessian is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("infeasible: constraint {constraint} cannot be satisfied together with the active set")]
    Infeasible { constraint: usize },
    #[error("iteration cap {cap} exceeded")]
    IterationLimit { cap: usize, best: Box<QpSolution> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSpec {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_bound: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub primal: DVector<f64>,
    /// Indices of the constraints active at the solution, in insertion order.
    pub active_set: Vec<usize>,
    /// One multiplier per inequality row; zero for inactive rows.
    pub multipliers: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl QpSpec {
    pub fn unconstrained(hessian: DMatrix<f64>, linear: DVector<f64>) -> Self {
        let d = linear.len();
        Self {
            hessian,
            linear,
            ineq_matrix: DMatrix::zeros(0, d),
            ineq_bound: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn constraints(&self) -> usize {
        self.ineq_bound.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    /// Largest constraint violation `max(0, max_i (A x - b)_i)`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        if self.constraints() == 0 {
            return 0.0;
        }
        (&self.ineq_matrix * x - &self.ineq_bound)
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let d = self.dim();
        if self.hessian.shape() != (d, d) {
            return Err(QpError::Dimension(format!(
                "hessian {:?} for {d} variables",
                self.hessian.shape()
            )));
        }
        if self.ineq_matrix.shape() != (self.constraints(), d) {
            return Err(QpError::Dimension(format!(
                "constraint matrix {:?} for {} bounds and {d} variables",
                self.ineq_matrix.shape(),
                self.constraints()
            )));
        }
        let finite = self.hessian.iter().all(|v| v.is_finite())
            && self.linear.iter().all(|v| v.is_finite())
            && self.ineq_matrix.iter().all(|v| v.is_finite())
            && self.ineq_bound.iter().all(|v| v.is_finite());
        if !finite {
            return Err(QpError::NonFinite);
        }
        let asym = (&self.hessian - self.hessian.transpose()).amax();
        if asym > 1e-12 * self.hessian.amax().max(1.0) {
            return Err(QpError::NotSymmetric(asym));
        }
        Ok(())
    }

    /// KKT residual of a candidate primal/dual pair: the largest of the
    /// stationarity error, the primal violation, the complementarity product
    /// and the dual sign violation.
    pub fn kkt_residual(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
        let grad = &self.hessian * x + &self.linear + self.ineq_matrix.transpose() * lambda;
        let mut res = grad.amax();
        if self.constraints() > 0 {
            let slack = &self.ineq_bound - &self.ineq_matrix * x;
            for i in 0..self.constraints() {
                res = res
                    .max(-slack[i])
                    .max((lambda[i] * slack[i]).abs())
                    .max(-lambda[i]);
            }
        }
        res
    }
}

fn row_scale(spec: &QpSpec, i: usize) -> f64 {
    1.0 + spec.ineq_bound[i].abs()
}

/// Re-solves the equality-constrained problem on the final active set so the
/// active rows hold to working precision rather than to accumulated round-off.
fn polish(spec: &QpSpec, active: &[usize]) -> Option<(DVector<f64>, Vec<f64>)> {
    if active.is_empty() {
        return None;
    }
    let d = spec.dim();
    let q = active.len();
    let mut kkt = DMatrix::zeros(d + q, d + q);
    let mut rhs = DVector::zeros(d + q);
    kkt.view_mut((0, 0), (d, d)).copy_from(&spec.hessian);
    rhs.rows_mut(0, d).copy_from(&(-&spec.linear));
    for (k, &i) in active.iter().enumerate() {
        let row = spec.ineq_matrix.row(i);
        kkt.view_mut((d + k, 0), (1, d)).copy_from(&row);
        kkt.view_mut((0, d + k), (d, 1)).copy_from(&row.transpose());
        rhs[d + k] = spec.ineq_bound[i];
    }
    let sol = kkt.lu().solve(&rhs)?;
    let mult: Vec<f64> = sol.rows(d, q).iter().copied().collect();
    if sol.iter().any(|v| !v.is_finite()) || mult.iter().any(|&m| m < 0.0) {
        return None;
    }
    Some((sol.rows(0, d).into_owned(), mult))
}

/// Solves a strictly convex QP. Deterministic for a given spec.
pub fn solve_qp(spec: &QpSpec) -> Result<QpSolution, QpError> {
    spec.validate()?;
    let d = spec.dim();
    let c = spec.constraints();
    let chol = spec
        .hessian
        .clone()
        .cholesky()
        .ok_or(QpError::NotPositiveDefinite)?;
    let hinv = chol.inverse();
    // In Goldfarb-Idnani form the constraints read n_i' x >= b'_i with
    // n_i = -a_i, b'_i = -b_i; the slack is b_i - a_i' x.
    let normal = |i: usize| -> DVector<f64> { -spec.ineq_matrix.row(i).transpose() };

    let mut x = -(&hinv * &spec.linear);
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let cap = 10 * d + 100;
    let mut iterations = 0;
    let tol = 1e-11;

    let finish = |x: DVector<f64>, active: &[usize], mult: &[f64], iterations: usize| {
        let mut lambda = DVector::zeros(c);
        for (k, &i) in active.iter().enumerate() {
            lambda[i] = mult[k];
        }
        let kkt = spec.kkt_residual(&x, &lambda);
        QpSolution {
            objective: spec.objective(&x),
            primal: x,
            active_set: active.to_vec(),
            multipliers: lambda,
            kkt_residual: kkt,
            iterations,
        }
    };

    loop {
        // Step 1: most violated constraint, scaled by its bound magnitude.
        let mut pick: Option<(usize, f64)> = None;
        if c > 0 {
            let slack = &spec.ineq_bound - &spec.ineq_matrix * &x;
            for i in 0..c {
                if active.contains(&i) {
                    continue;
                }
                let scaled = slack[i] / row_scale(spec, i);
                if scaled < -tol && pick.is_none_or(|(_, s)| scaled < s) {
                    pick = Some((i, scaled));
                }
            }
        }
        let Some((p, _)) = pick else {
            if let Some((xp, mp)) = polish(spec, &active) {
                if spec.max_violation(&xp) <= spec.max_violation(&x) {
                    return Ok(finish(xp, &active, &mp, iterations));
                }
            }
            return Ok(finish(x, &active, &mult, iterations));
        };
        let n_plus = normal(p);
        let mut u_plus = 0.0;

        // Step 2: move toward satisfying constraint p.
        loop {
            iterations += 1;
            if iterations > cap {
                let best = finish(x, &active, &mult, iterations);
                return Err(QpError::IterationLimit {
                    cap,
                    best: Box::new(best),
                });
            }
            let q = active.len();
            let hn = &hinv * &n_plus;
            let hn_norm = n_plus.dot(&hn);
            let (z, r) = if q == 0 {
                (hn.clone(), DVector::zeros(0))
            } else {
                let mut nmat = DMatrix::zeros(d, q);
                for (k, &i) in active.iter().enumerate() {
                    nmat.set_column(k, &normal(i));
                }
                let hn_mat = &hinv * &nmat;
                let w = nmat.transpose() * &hn_mat;
                let rhs = nmat.transpose() * &hn;
                let r = w
                    .cholesky()
                    .map(|ch| ch.solve(&rhs))
                    .ok_or(QpError::Infeasible { constraint: p })?;
                (&hn - hn_mat * &r, r)
            };

            // Partial step: first active multiplier to reach zero.
            let mut t1 = f64::INFINITY;
            let mut drop_k = None;
            for k in 0..q {
                if r[k] > 1e-14 {
                    let t = mult[k] / r[k];
                    if t < t1 {
                        t1 = t;
                        drop_k = Some(k);
                    }
                }
            }
            // Full step: constraint p becomes active.
            let curvature = z.dot(&n_plus);
            let slack_p = spec.ineq_bound[p] - spec.ineq_matrix.row(p).dot(&x.transpose());
            let t2 = if curvature > 1e-14 * hn_norm.max(f64::MIN_POSITIVE) {
                (-slack_p / curvature).max(0.0)
            } else {
                f64::INFINITY
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpError::Infeasible { constraint: p });
            }
            if t2.is_infinite() {
                // Only dual progress possible.
                for k in 0..q {
                    mult[k] -= t1 * r[k];
                }
                u_plus += t1;
                let k = drop_k.expect("finite t1 has a blocking index");
                active.remove(k);
                mult.remove(k);
                continue;
            }
            let t = t1.min(t2);
            x += &z * t;
            for k in 0..q {
                mult[k] -= t * r[k];
            }
            u_plus += t;
            if t2 <= t1 {
                active.push(p);
                mult.push(u_plus);
                break;
            }
            let k = drop_k.expect("t1 < t2 implies a blocking index");
            active.remove(k);
            mult.remove(k);
        }
    }
}
