use nalgebra::DVector;

use super::{LtiError, LtiSystem};

/// Online executor of a discrete system.
///
/// Each [`LtiRunner::step`] applies the input over one sample: the state is
/// advanced first and the output `C x[k+1] + D u[k]` is returned, so a unit
/// pulse at `k = 0` yields `C A^k B` at step `k`.
#[derive(Debug, Clone)]
pub struct LtiRunner {
    system: LtiSystem,
    state: DVector<f64>,
}

impl LtiRunner {
    pub fn new(system: LtiSystem) -> Result<Self, LtiError> {
        if system.is_continuous() {
            return Err(LtiError::WrongDomain {
                expected: "discrete",
            });
        }
        let n = system.order();
        Ok(Self {
            system,
            state: DVector::zeros(n),
        })
    }

    pub fn with_state(system: LtiSystem, state: DVector<f64>) -> Result<Self, LtiError> {
        let mut r = Self::new(system)?;
        if state.len() != r.state.len() {
            return Err(LtiError::Dimension(format!(
                "initial state has {} entries, system order is {}",
                state.len(),
                r.state.len()
            )));
        }
        r.state = state;
        Ok(r)
    }

    pub fn system(&self) -> &LtiSystem {
        &self.system
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    pub fn step(&mut self, input: &[f64]) -> Result<DVector<f64>, LtiError> {
        if input.len() != self.system.inputs() {
            return Err(LtiError::Dimension(format!(
                "input has {} entries, system takes {}",
                input.len(),
                self.system.inputs()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(LtiError::NonFinite("runner input"));
        }
        let u = DVector::from_column_slice(input);
        self.state = self.system.a() * &self.state + self.system.b() * &u;
        Ok(self.system.c() * &self.state + self.system.d() * &u)
    }

    /// Scalar convenience for SISO systems.
    pub fn step_scalar(&mut self, input: f64) -> Result<f64, LtiError> {
        Ok(self.step(&[input])?[0])
    }
}
