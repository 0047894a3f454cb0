//! Receding-horizon reference generator.
//!
//! Each axis is a discrete SISO model `x(k+1) = A x(k) + B r(k)`, `y = C x`.
//! Over a horizon of `N_h + 1` moves the cost is
//!
//! ```text
//!   sum_{j=1}^{N_h+1} q (y*(j) - y(j))^2 + sum_{j=0}^{N_h} r r(j)^2 + s (r(j) - r(j-1))^2
//! ```
//!
//! subject to `|r(j) - 2 r(j-1) + r(j-2)| / Ts^2 <= r_max`. Predicted outputs
//! are eliminated by forward substitution, leaving a dense QP in the moves.

mod qp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lti::{LtiError, LtiSystem};
pub use qp::{solve_qp, QpError, QpSolution, QpSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpcError {
    #[error("invalid MPC configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Lti(#[from] LtiError),
}

/// What the input penalty `r |R|^2` measures the moves against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputReference {
    /// Plain `r * r(k)^2`. Biases the output toward the origin by about
    /// `r / (q + r)` of the target at steady state.
    Zero,
    /// `r * (r(k) - y*(k+1) / g)^2` with `g` the model DC gain: penalizes the
    /// distance from the input that holds the target.
    #[default]
    Target,
}

/// Tuning shared by all axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub horizon: usize,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    /// Bound on the second difference of the moves over `Ts^2`; infinite disables it.
    #[serde(with = "crate::serde_ext")]
    pub r_max: f64,
    pub sample_period: f64,
    pub input_reference: InputReference,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 50,
            q: 17.0,
            r: 0.08,
            s: 0.02,
            r_max: 40.0,
            sample_period: 0.01,
            input_reference: InputReference::Target,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), MpcError> {
        if self.horizon == 0 {
            return Err(MpcError::Config("horizon must be at least 1".into()));
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(MpcError::Config(format!(
                "tracking weight q must be positive, got {}",
                self.q
            )));
        }
        for (name, w) in [("r", self.r), ("s", self.s)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(MpcError::Config(format!(
                    "weight {name} must be nonnegative, got {w}"
                )));
            }
        }
        if !(self.r_max > 0.0) || self.r_max.is_nan() {
            return Err(MpcError::Config(format!(
                "r_max must be positive (or infinite), got {}",
                self.r_max
            )));
        }
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return Err(MpcError::Config(format!(
                "sample period must be positive, got {}",
                self.sample_period
            )));
        }
        Ok(())
    }
}

/// One axis: a validated config plus its discrete model and the cached
/// prediction matrices `Y = Phi x0 + G R`.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    config: MpcConfig,
    model: LtiSystem,
    phi: DMatrix<f64>,
    gamma: DMatrix<f64>,
    hessian: DMatrix<f64>,
    diff: DMatrix<f64>,
    dc_gain: f64,
}

/// Result of one receding-horizon step.
#[derive(Debug, Clone)]
pub struct MpcStep {
    /// The move to apply now.
    pub input: f64,
    pub sequence: DVector<f64>,
    /// Model outputs `y(1..=N_h+1)` under `sequence`.
    pub predicted: DVector<f64>,
    pub solution: QpSolution,
}

impl MpcProblem {
    pub fn new(config: MpcConfig, model: LtiSystem) -> Result<Self, MpcError> {
        config.validate()?;
        match model.sample_period() {
            Some(t) if (t - config.sample_period).abs() <= 1e-12 * t.max(1.0) => {}
            Some(t) => {
                return Err(MpcError::Config(format!(
                    "model sampled at {t} s but MPC runs at {} s",
                    config.sample_period
                )))
            }
            None => {
                return Err(MpcError::Config("MPC model must be discrete".into()));
            }
        }
        if model.inputs() != 1 || model.outputs() != 1 {
            return Err(MpcError::Dimension(format!(
                "per-axis model must be SISO, got {} inputs and {} outputs",
                model.inputs(),
                model.outputs()
            )));
        }
        if model.d()[(0, 0)] != 0.0 {
            return Err(MpcError::Dimension(
                "per-axis model must have no feedthrough".into(),
            ));
        }
        let n = model.order();
        let len = config.horizon + 1;
        let mut phi = DMatrix::zeros(len, n);
        let mut gamma = DMatrix::zeros(len, len);
        // markov[j] = C A^j B
        let mut markov = Vec::with_capacity(len);
        let mut ab = model.b().clone();
        let mut ca = model.c().clone();
        for j in 0..len {
            markov.push((model.c() * &ab)[(0, 0)]);
            ab = model.a() * ab;
            ca = &ca * model.a();
            phi.set_row(j, &ca.row(0));
        }
        for j in 0..len {
            for i in 0..=j {
                gamma[(j, i)] = markov[j - i];
            }
        }
        let mut diff = DMatrix::<f64>::identity(len, len);
        for j in 1..len {
            diff[(j, j - 1)] = -1.0;
        }
        let ident = DMatrix::<f64>::identity(len, len);
        let hessian = (gamma.transpose() * &gamma * config.q
            + ident * config.r
            + diff.transpose() * &diff * config.s)
            * 2.0;
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        let dc_gain = (DMatrix::<f64>::identity(n, n) - model.a())
            .lu()
            .solve(model.b())
            .map(|x| (model.c() * x)[(0, 0)])
            .filter(|g| g.is_finite() && g.abs() > 1e-9);
        if config.input_reference == InputReference::Target && config.r > 0.0 && dc_gain.is_none() {
            return Err(MpcError::Config(
                "target-referenced input penalty needs a model with finite nonzero DC gain".into(),
            ));
        }
        Ok(Self {
            config,
            model,
            phi,
            gamma,
            hessian,
            diff,
            dc_gain: dc_gain.unwrap_or(1.0),
        })
    }

    /// Model `y(k+1) = a_d y(k) + b_d (r(k) - y(k))` in the form used above.
    pub fn error_feedback_model(a_d: f64, b_d: f64, step: f64) -> Result<LtiSystem, MpcError> {
        Ok(LtiSystem::new(
            DMatrix::from_element(1, 1, a_d - b_d),
            DMatrix::from_element(1, 1, b_d),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            crate::lti::Domain::Discrete { step },
        )?)
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn model(&self) -> &LtiSystem {
        &self.model
    }

    /// Steady-state output per unit input of the prediction model.
    pub fn dc_gain(&self) -> f64 {
        self.dc_gain
    }

    /// Number of moves in the decision vector.
    pub fn moves(&self) -> usize {
        self.config.horizon + 1
    }

    fn window(&self, targets: &[f64]) -> Result<DVector<f64>, MpcError> {
        let Some(&last) = targets.last() else {
            return Err(MpcError::Dimension("empty target window".into()));
        };
        let len = self.moves();
        Ok(DVector::from_fn(len, |j, _| {
            targets.get(j).copied().unwrap_or(last)
        }))
    }

    /// Builds the QP for state `x0`, targets `y*(1..)` (held at their last
    /// value past the end) and the two previous moves `[r(-1), r(-2)]`.
    pub fn condense(
        &self,
        x0: &[f64],
        targets: &[f64],
        r_prev: [f64; 2],
    ) -> Result<QpSpec, MpcError> {
        if x0.len() != self.model.order() {
            return Err(MpcError::Dimension(format!(
                "state has {} entries, model order is {}",
                x0.len(),
                self.model.order()
            )));
        }
        if x0.iter().chain(targets).chain(&r_prev).any(|v| !v.is_finite()) {
            return Err(MpcError::Config("non-finite MPC input".into()));
        }
        let len = self.moves();
        let cfg = &self.config;
        let x0 = DVector::from_column_slice(x0);
        let free = &self.phi * x0;
        let target = self.window(targets)?;
        let mut d0 = DVector::zeros(len);
        d0[0] = r_prev[0];
        let mut linear = -(self.gamma.transpose() * (&target - free) * cfg.q
            + self.diff.transpose() * d0 * cfg.s)
            * 2.0;
        if cfg.input_reference == InputReference::Target {
            linear -= target * (2.0 * cfg.r / self.dc_gain);
        }

        if cfg.r_max.is_infinite() {
            return Ok(QpSpec::unconstrained(self.hessian.clone(), linear));
        }
        let ts2 = cfg.sample_period * cfg.sample_period;
        let mut rows = DMatrix::zeros(2 * len, len);
        let mut bound = DVector::zeros(2 * len);
        for j in 0..len {
            // r(j) - 2 r(j-1) + r(j-2) = coeffs * R + known
            let mut coeffs = DVector::zeros(len);
            let mut known = 0.0;
            for (offset, w) in [(0usize, 1.0), (1, -2.0), (2, 1.0)] {
                if j >= offset {
                    coeffs[j - offset] = w;
                } else {
                    known += w * r_prev[offset - j - 1];
                }
            }
            // Rows are kept in acceleration units so the solver tolerance
            // applies on the same scale as r_max.
            let coeffs = coeffs / ts2;
            let known = known / ts2;
            rows.set_row(2 * j, &coeffs.transpose());
            bound[2 * j] = cfg.r_max - known;
            rows.set_row(2 * j + 1, &(-&coeffs).transpose());
            bound[2 * j + 1] = cfg.r_max + known;
        }
        Ok(QpSpec {
            hessian: self.hessian.clone(),
            linear,
            ineq_matrix: rows,
            ineq_bound: bound,
        })
    }

    /// Model outputs `y(1..=N_h+1)` for a move sequence.
    pub fn predict(&self, x0: &[f64], sequence: &DVector<f64>) -> Result<DVector<f64>, MpcError> {
        if sequence.len() != self.moves() || x0.len() != self.model.order() {
            return Err(MpcError::Dimension("prediction inputs have wrong length".into()));
        }
        let mut x = DVector::from_column_slice(x0);
        let mut out = DVector::zeros(self.moves());
        for (j, &r) in sequence.iter().enumerate() {
            x = self.model.a() * x + self.model.b().column(0) * r;
            out[j] = (self.model.c() * &x)[(0, 0)];
        }
        Ok(out)
    }

    pub fn step(&self, x0: &[f64], targets: &[f64], r_prev: [f64; 2]) -> Result<MpcStep, MpcError> {
        let spec = self.condense(x0, targets, r_prev)?;
        let solution = solve_qp(&spec)?;
        let sequence = solution.primal.clone();
        let predicted = self.predict(x0, &sequence)?;
        Ok(MpcStep {
            input: sequence[0],
            sequence,
            predicted,
            solution,
        })
    }
}

/// One receding-horizon step; returns the first move and the predicted outputs.
pub fn mpc_step(
    prob: &MpcProblem,
    x0: &[f64],
    targets: &[f64],
    r_prev: [f64; 2],
) -> Result<MpcStep, MpcError> {
    prob.step(x0, targets, r_prev)
}

/// Joint QP over several independent axes with a block-diagonal structure.
/// The decision vector concatenates the per-axis move sequences.
pub fn condense_stacked(
    problems: &[MpcProblem],
    states: &[Vec<f64>],
    targets: &[Vec<f64>],
    r_prev: &[[f64; 2]],
) -> Result<QpSpec, MpcError> {
    let k = problems.len();
    if states.len() != k || targets.len() != k || r_prev.len() != k {
        return Err(MpcError::Dimension(format!(
            "{k} axes but {} states, {} target windows, {} previous moves",
            states.len(),
            targets.len(),
            r_prev.len()
        )));
    }
    let parts = problems
        .iter()
        .enumerate()
        .map(|(i, p)| p.condense(&states[i], &targets[i], r_prev[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let d: usize = parts.iter().map(QpSpec::dim).sum();
    let c: usize = parts.iter().map(QpSpec::constraints).sum();
    let mut hessian = DMatrix::zeros(d, d);
    let mut linear = DVector::zeros(d);
    let mut ineq_matrix = DMatrix::zeros(c, d);
    let mut ineq_bound = DVector::zeros(c);
    let (mut od, mut oc) = (0, 0);
    for p in &parts {
        let (pd, pc) = (p.dim(), p.constraints());
        hessian.view_mut((od, od), (pd, pd)).copy_from(&p.hessian);
        linear.rows_mut(od, pd).copy_from(&p.linear);
        ineq_matrix.view_mut((oc, od), (pc, pd)).copy_from(&p.ineq_matrix);
        ineq_bound.rows_mut(oc, pc).copy_from(&p.ineq_bound);
        od += pd;
        oc += pc;
    }
    Ok(QpSpec {
        hessian,
        linear,
        ineq_matrix,
        ineq_bound,
    })
}
