//! Linear time-invariant systems.
//!
//! Continuous and discrete state-space models, rational transfer functions,
//! exact zero-order-hold discretization, an online stepping runner, block
//! composition and a numerical L1 (peak-to-peak) norm.

mod compose;
mod expm;
mod norm;
mod runner;
mod tf;

pub use compose::{feedback, parallel, series};
pub use expm::expm;
pub use norm::{l1_norm, L1Norm, L1NormOptions};
pub use runner::LtiRunner;
pub use tf::{FirstOrderTF, TransferFunction};
pub(crate) use tf::{poly_add, poly_mul};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("expected a {expected} system")]
    WrongDomain { expected: &'static str },
    #[error("L1 norm undefined: system is not asymptotically stable")]
    Unstable,
    #[error("ill-posed feedback interconnection: I + D1*D2 is singular")]
    IllPosedFeedback,
}

/// Time domain of a state-space model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Continuous,
    Discrete { step: f64 },
}

impl Domain {
    pub fn is_continuous(&self) -> bool {
        matches!(self, Domain::Continuous)
    }
}

/// State-space model `x' = A x + B u`, `y = C x + D u` (continuous) or
/// `x[k+1] = A x[k] + B u[k]`, `y = C x + D u` (discrete).
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    domain: Domain,
}

fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

impl LtiSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        domain: Domain,
    ) -> Result<Self, LtiError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LtiError::Dimension(format!(
                "state matrix is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(LtiError::Dimension(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if !all_finite(m) {
                return Err(LtiError::NonFinite(name));
            }
        }
        if let Domain::Discrete { step } = domain {
            if !(step.is_finite() && step > 0.0) {
                return Err(LtiError::InvalidParameter(format!(
                    "sample period must be positive, got {step}"
                )));
            }
        }
        Ok(Self { a, b, c, d, domain })
    }

    pub fn continuous(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self, LtiError> {
        Self::new(a, b, c, d, Domain::Continuous)
    }

    /// Static gain with no states. Compatible with any domain under composition.
    pub fn gain(k: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 1),
            c: DMatrix::zeros(1, 0),
            d: DMatrix::from_element(1, 1, k),
            domain: Domain::Continuous,
        }
    }

    /// `pole / (s + pole)`, realized with unit output scaling.
    pub fn first_order(pole: f64) -> Result<Self, LtiError> {
        FirstOrderTF::new(pole)?.to_system()
    }

    /// Block-diagonal stack of independent systems sharing a domain.
    pub fn block_diagonal(blocks: &[LtiSystem]) -> Result<Self, LtiError> {
        let domain = blocks
            .iter()
            .find(|s| s.order() > 0)
            .or(blocks.first())
            .map(|s| s.domain)
            .unwrap_or(Domain::Continuous);
        if blocks
            .iter()
            .any(|s| s.order() > 0 && !same_domain(s.domain, domain))
        {
            return Err(LtiError::Dimension("blocks have mixed domains".into()));
        }
        let n: usize = blocks.iter().map(|s| s.order()).sum();
        let m: usize = blocks.iter().map(|s| s.inputs()).sum();
        let p: usize = blocks.iter().map(|s| s.outputs()).sum();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, m);
        let mut c = DMatrix::zeros(p, n);
        let mut d = DMatrix::zeros(p, m);
        let (mut io, mut ii, mut iy) = (0, 0, 0);
        for s in blocks {
            let (sn, sm, sp) = (s.order(), s.inputs(), s.outputs());
            a.view_mut((io, io), (sn, sn)).copy_from(&s.a);
            b.view_mut((io, ii), (sn, sm)).copy_from(&s.b);
            c.view_mut((iy, io), (sp, sn)).copy_from(&s.c);
            d.view_mut((iy, ii), (sp, sm)).copy_from(&s.d);
            io += sn;
            ii += sm;
            iy += sp;
        }
        Self::new(a, b, c, d, domain)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn is_continuous(&self) -> bool {
        self.domain.is_continuous()
    }
    pub fn sample_period(&self) -> Option<f64> {
        match self.domain {
            Domain::Continuous => None,
            Domain::Discrete { step } => Some(step),
        }
    }

    /// Output scaled by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: &self.c * k,
            d: &self.d * k,
            domain: self.domain,
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        if self.order() == 0 {
            return Vec::new();
        }
        self.a
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect()
    }

    /// Asymptotic stability: open left half-plane (continuous) or open unit
    /// disc (discrete).
    pub fn is_stable(&self) -> bool {
        let eig = self.eigenvalues();
        match self.domain {
            Domain::Continuous => eig.iter().all(|z| z.re < 0.0),
            Domain::Discrete { .. } => eig.iter().all(|z| z.norm() < 1.0),
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Complex frequency response at angular frequency `omega` (rad/s). For
    /// discrete systems the evaluation point is `exp(j omega T)`.
    pub fn frequency_response(&self, omega: f64) -> DMatrix<Complex64> {
        let s = match self.domain {
            Domain::Continuous => Complex64::new(0.0, omega),
            Domain::Discrete { step } => Complex64::from_polar(1.0, omega * step),
        };
        self.evaluate(s)
    }

    /// Transfer matrix `C (sI - A)^-1 B + D` at complex point `s`.
    pub fn evaluate(&self, s: Complex64) -> DMatrix<Complex64> {
        let n = self.order();
        let d = self.d.map(|v| Complex64::new(v, 0.0));
        if n == 0 {
            return d;
        }
        let a = self.a.map(|v| Complex64::new(v, 0.0));
        let b = self.b.map(|v| Complex64::new(v, 0.0));
        let c = self.c.map(|v| Complex64::new(v, 0.0));
        let lhs = DMatrix::<Complex64>::identity(n, n) * s - a;
        let sol = lhs
            .lu()
            .solve(&b)
            .unwrap_or_else(|| DMatrix::from_element(n, b.ncols(), Complex64::new(f64::NAN, 0.0)));
        c * sol + d
    }

    /// Steady-state gain for constant inputs.
    pub fn dc_gain(&self) -> DMatrix<f64> {
        self.evaluate(match self.domain {
            Domain::Continuous => Complex64::new(0.0, 0.0),
            Domain::Discrete { .. } => Complex64::new(1.0, 0.0),
        })
        .map(|z| z.re)
    }
}

fn same_domain(a: Domain, b: Domain) -> bool {
    match (a, b) {
        (Domain::Continuous, Domain::Continuous) => true,
        (Domain::Discrete { step: x }, Domain::Discrete { step: y }) => {
            (x - y).abs() <= 1e-12 * x.abs().max(y.abs())
        }
        _ => false,
    }
}

/// Exact zero-order-hold equivalent of a continuous system.
///
/// Uses the block exponential `exp([[A, B], [0, 0]] * step)`, whose top blocks
/// are `A_d = exp(A step)` and `B_d = integral_0^step exp(A t) dt B`.
pub fn discretize_zoh(sys: &LtiSystem, step: f64) -> Result<LtiSystem, LtiError> {
    if !sys.is_continuous() {
        return Err(LtiError::WrongDomain {
            expected: "continuous",
        });
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(LtiError::InvalidParameter(format!(
            "discretization step must be positive, got {step}"
        )));
    }
    let n = sys.order();
    let m = sys.inputs();
    let mut block = DMatrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * step));
    block.view_mut((0, n), (n, m)).copy_from(&(sys.b() * step));
    let e = expm(&block);
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();
    LtiSystem::new(
        ad,
        bd,
        sys.c().clone(),
        sys.d().clone(),
        Domain::Discrete { step },
    )
}
