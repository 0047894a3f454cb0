#![allow(dead_code)]

use l1mpc::bench::ScenarioResult;
use l1mpc::lti::{discretize_zoh, LtiSystem};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

/// Random Hurwitz matrix: `S - P` with `S` skew and `P` positive definite,
/// so `A + A^T < 0` and every eigenvalue sits in the open left half-plane.
pub fn random_hurwitz(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n, 1.0);
    let k = random_matrix(rng, n, n, 2.0);
    let skew = (&k - k.transpose()) * 0.5;
    let spd = &m * m.transpose() + DMatrix::identity(n, n) * rng.random_range(0.05..1.0);
    skew - spd
}

/// Random stable continuous system of order `1..=max_order`.
pub fn random_stable(rng: &mut ChaCha8Rng, max_order: usize, inputs: usize, outputs: usize) -> LtiSystem {
    let n = rng.random_range(1..=max_order);
    let a = random_hurwitz(rng, n);
    LtiSystem::continuous(
        a,
        random_matrix(rng, n, inputs, 1.0),
        random_matrix(rng, outputs, n, 1.0),
        DMatrix::zeros(outputs, inputs),
    )
    .unwrap()
}

/// Largest per-axis |yhat1 - y1| over the run.
pub fn max_prediction_error(res: &ScenarioResult) -> f64 {
    res.yhat1
        .iter()
        .zip(&res.y1)
        .flat_map(|(a, b)| (0..3).map(move |i| (a[i] - b[i]).abs()))
        .fold(0.0, f64::max)
}

/// Output of the ideal model `sys` driven by the recorded `r2`, starting at
/// rest at the first sample.
pub fn ideal_positions(sys: &LtiSystem, res: &ScenarioResult) -> Vec<[f64; 3]> {
    let ts = res.scenario.sample_period;
    let d = discretize_zoh(sys, ts).unwrap();
    let n = d.order();
    let mut x = nalgebra::DVector::zeros(n);
    // start at equilibrium on the first reference: position states track r2
    let r0 = res.r2[0];
    for axis in 0..3 {
        x[2 * axis] = r0[axis];
    }
    let mut out = Vec::with_capacity(res.len());
    for r in &res.r2 {
        let y = d.c() * &x;
        out.push([y[0], y[1], y[2]]);
        let u = nalgebra::DVector::from_row_slice(r);
        x = d.a() * &x + d.b() * u;
    }
    out
}

pub fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (s / n as f64).sqrt()
}

/// Random strictly convex QP with a known feasible point. Returns the spec
/// and that point.
pub fn random_qp(rng: &mut ChaCha8Rng, max_dim: usize, max_cons: usize) -> (l1mpc::mpc::QpSpec, nalgebra::DVector<f64>) {
    use nalgebra::DVector;
    let d = rng.random_range(1..=max_dim);
    let c = rng.random_range(0..=max_cons);
    let m = random_matrix(rng, d, d, 1.0);
    let hessian = &m * m.transpose() + DMatrix::identity(d, d) * rng.random_range(0.01..1.0);
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    let linear = DVector::from_fn(d, |_, _| rng.random_range(-5.0..5.0));
    let feasible = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let ineq_matrix = random_matrix(rng, c, d, 1.0);
    // some rows tight at the feasible point, the rest with slack
    let slack = DVector::from_fn(c, |_, _| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..2.0) });
    let ineq_bound = &ineq_matrix * &feasible + slack;
    (
        l1mpc::mpc::QpSpec {
            hessian,
            linear,
            ineq_matrix,
            ineq_bound,
        },
        feasible,
    )
}

/// Outcome of checking one QP against its oracles.
#[derive(Debug, Default, Clone, Copy)]
pub struct QpCheck {
    pub kkt: f64,
    pub violation: f64,
    /// Worst `objective(x*) - objective(p)` over sampled feasible points
    /// (should be <= 0).
    pub sample_gap: f64,
    /// Distance to the unconstrained minimizer when that point is feasible.
    pub unconstrained_gap: Option<f64>,
}

/// Solves `spec` and compares against the factorization and sampling oracles.
pub fn check_qp(rng: &mut ChaCha8Rng, spec: &l1mpc::mpc::QpSpec, feasible: &nalgebra::DVector<f64>, samples: usize) -> QpCheck {
    use nalgebra::DVector;
    let sol = l1mpc::mpc::solve_qp(spec).unwrap();
    let x = &sol.primal;
    let d = spec.dim();
    let kkt = sol.kkt_residual.max(spec.kkt_residual(x, &sol.multipliers));
    let violation = spec.max_violation(x);

    let unc = spec.hessian.clone().cholesky().unwrap().solve(&(-&spec.linear));
    let unconstrained_gap = (spec.max_violation(&unc) <= 0.0)
        .then(|| (x - &unc).norm() / unc.norm().max(1.0));

    // Feasible samples: random points pulled back along the segment to the
    // known feasible point, half of them scattered around the optimum.
    let fx = spec.objective(x);
    let base_slack = &spec.ineq_bound - &spec.ineq_matrix * feasible;
    let mut gap = f64::NEG_INFINITY;
    for k in 0..samples {
        let center = if k % 2 == 0 { x } else { feasible };
        let radius = 10f64.powf(rng.random_range(-6.0..0.5));
        let p = center + DVector::from_fn(d, |_, _| rng.random_range(-radius..radius));
        let dir = &p - feasible;
        let ad = &spec.ineq_matrix * &dir;
        let mut t: f64 = 1.0;
        for i in 0..spec.constraints() {
            if ad[i] > 0.0 {
                t = t.min(base_slack[i] / ad[i]);
            }
        }
        let q = feasible + dir * (t.max(0.0) * (1.0 - 1e-12));
        if spec.max_violation(&q) > 0.0 {
            continue;
        }
        gap = gap.max(fx - spec.objective(&q));
    }
    QpCheck {
        kkt,
        violation,
        sample_gap: gap,
        unconstrained_gap,
    }
}
