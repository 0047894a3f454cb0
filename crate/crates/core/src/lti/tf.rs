use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LtiError, LtiSystem};

/// Unit-DC-gain first-order lag `dc_gain * pole / (s + pole)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderTF {
    pub pole: f64,
    pub dc_gain: f64,
}

impl FirstOrderTF {
    pub fn new(pole: f64) -> Result<Self, LtiError> {
        if !(pole.is_finite() && pole > 0.0) {
            return Err(LtiError::InvalidParameter(format!(
                "first-order pole must be positive, got {pole}"
            )));
        }
        Ok(Self { pole, dc_gain: 1.0 })
    }

    pub fn transfer_function(&self) -> TransferFunction {
        TransferFunction {
            num: vec![self.dc_gain * self.pole],
            den: vec![1.0, self.pole],
        }
    }

    pub fn to_system(&self) -> Result<LtiSystem, LtiError> {
        LtiSystem::continuous(
            DMatrix::from_element(1, 1, -self.pole),
            DMatrix::from_element(1, 1, self.pole),
            DMatrix::from_element(1, 1, self.dc_gain),
            DMatrix::zeros(1, 1),
        )
    }
}

/// SISO rational transfer function with coefficients in descending powers of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

pub(crate) fn trim(mut p: Vec<f64>) -> Vec<f64> {
    let first = p.iter().position(|&c| c != 0.0).unwrap_or(p.len().saturating_sub(1));
    p.drain(..first);
    if p.is_empty() {
        p.push(0.0);
    }
    p
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, x) in a.iter().rev().enumerate() {
        out[n - 1 - i] += x;
    }
    for (i, x) in b.iter().rev().enumerate() {
        out[n - 1 - i] += x;
    }
    out
}

fn poly_eval(p: &[f64], s: Complex64) -> Complex64 {
    p.iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, LtiError> {
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(LtiError::NonFinite("transfer function coefficients"));
        }
        let num = trim(num);
        let den = trim(den);
        if den.len() == 1 && den[0] == 0.0 {
            return Err(LtiError::InvalidParameter("zero denominator".into()));
        }
        if num.len() > den.len() {
            return Err(LtiError::InvalidParameter(
                "improper transfer function (numerator degree exceeds denominator)".into(),
            ));
        }
        Ok(Self { num, den })
    }

    pub fn constant(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
        }
    }

    pub fn evaluate(&self, s: Complex64) -> Complex64 {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }

    pub fn frequency_response(&self, omega: f64) -> Complex64 {
        self.evaluate(Complex64::new(0.0, omega))
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            num: trim(poly_mul(&self.num, &other.num)),
            den: trim(poly_mul(&self.den, &other.den)),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let num = poly_add(
            &poly_mul(&self.num, &other.den),
            &poly_mul(&other.num, &self.den),
        );
        Self {
            num: trim(num),
            den: trim(poly_mul(&self.den, &other.den)),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            num: self.num.iter().map(|c| -c).collect(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// `self / other`; fails if the quotient is improper or `other` is zero.
    pub fn div(&self, other: &Self) -> Result<Self, LtiError> {
        Self::new(
            poly_mul(&self.num, &other.den),
            poly_mul(&self.den, &other.num),
        )
    }

    /// Controllable canonical realization.
    pub fn to_system(&self) -> Result<LtiSystem, LtiError> {
        let lead = self.den[0];
        let den: Vec<f64> = self.den.iter().map(|c| c / lead).collect();
        let n = den.len() - 1;
        let mut num = vec![0.0; n + 1 - self.num.len()];
        num.extend(self.num.iter().map(|c| c / lead));
        let d0 = num[0];
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, 1);
        let mut c = DMatrix::zeros(1, n);
        if n > 0 {
            for j in 0..n {
                a[(0, j)] = -den[j + 1];
                c[(0, j)] = num[j + 1] - d0 * den[j + 1];
            }
            for i in 1..n {
                a[(i, i - 1)] = 1.0;
            }
            b[(0, 0)] = 1.0;
        }
        LtiSystem::continuous(a, b, c, DMatrix::from_element(1, 1, d0))
    }

    /// Transfer function of a continuous SISO state-space model.
    ///
    /// The denominator is the characteristic polynomial of `A`; the numerator
    /// uses `C adj(sI - A) B = det(sI - A + B C) - det(sI - A)`.
    pub fn from_system(sys: &LtiSystem) -> Result<Self, LtiError> {
        if sys.inputs() != 1 || sys.outputs() != 1 {
            return Err(LtiError::Dimension("transfer function needs a SISO system".into()));
        }
        let den = char_poly(sys.a());
        let closed = sys.a() - sys.b() * sys.c();
        let shifted = char_poly(&closed);
        let strictly = poly_add(&shifted, &den.iter().map(|c| -c).collect::<Vec<_>>());
        let d = sys.d()[(0, 0)];
        let num = poly_add(&strictly, &den.iter().map(|c| c * d).collect::<Vec<_>>());
        Self::new(num, den)
    }

    pub fn degree(&self) -> usize {
        self.den.len() - 1
    }
}

/// Characteristic polynomial `det(sI - A)` by the Faddeev-LeVerrier recursion.
pub(crate) fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    let ident = DMatrix::<f64>::identity(n, n);
    let mut c_prev = 1.0;
    for k in 1..=n {
        m = a * &m + &ident * c_prev;
        let am = a * &m;
        let c = -am.trace() / k as f64;
        coeffs.push(c);
        c_prev = c;
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn first_order_rejects_nonpositive_pole() {
        assert!(FirstOrderTF::new(0.0).is_err());
        assert!(FirstOrderTF::new(-1.0).is_err());
        assert!(FirstOrderTF::new(f64::NAN).is_err());
    }

    #[test]
    fn realization_matches_rational_evaluation() {
        let tf = TransferFunction::new(vec![2.0, 3.0, 1.0], vec![1.0, 4.0, 5.0, 2.0]).unwrap();
        let sys = tf.to_system().unwrap();
        for w in [0.1, 1.0, 10.0] {
            let s = Complex64::new(0.0, w);
            assert!(close(sys.evaluate(s)[(0, 0)], tf.evaluate(s), 1e-12));
        }
    }

    #[test]
    fn biproper_realization_has_feedthrough() {
        let tf = TransferFunction::new(vec![3.0, 1.0], vec![1.0, 2.0]).unwrap();
        let sys = tf.to_system().unwrap();
        assert_eq!(sys.d()[(0, 0)], 3.0);
        let s = Complex64::new(0.3, 2.0);
        assert!(close(sys.evaluate(s)[(0, 0)], tf.evaluate(s), 1e-12));
    }

    #[test]
    fn round_trip_through_state_space() {
        let tf = TransferFunction::new(vec![1.0, -2.0], vec![2.0, 6.0, 4.0]).unwrap();
        let back = TransferFunction::from_system(&tf.to_system().unwrap()).unwrap();
        for w in [0.2, 3.0] {
            let s = Complex64::new(0.0, w);
            assert!(close(back.evaluate(s), tf.evaluate(s), 1e-12));
        }
    }

    #[test]
    fn improper_is_rejected() {
        assert!(TransferFunction::new(vec![1.0, 0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn algebra_matches_pointwise() {
        let a = TransferFunction::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        let b = TransferFunction::new(vec![2.0, 1.0], vec![1.0, 3.0, 2.0]).unwrap();
        let s = Complex64::new(0.0, 0.7);
        assert!(close(a.mul(&b).evaluate(s), a.evaluate(s) * b.evaluate(s), 1e-12));
        assert!(close(a.add(&b).evaluate(s), a.evaluate(s) + b.evaluate(s), 1e-12));
        assert!(close(a.sub(&b).evaluate(s), a.evaluate(s) - b.evaluate(s), 1e-12));
        let q = b.div(&a).unwrap();
        assert!(close(q.evaluate(s), b.evaluate(s) / a.evaluate(s), 1e-12));
    }
}
