use serde::{Deserialize, Serialize};

use super::BaselineError;

/// Parallel-form PID, one channel per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidConfig {
    pub kp: Vec<f64>,
    pub ki: Vec<f64>,
    pub kd: Vec<f64>,
    /// Cutoff of the first-order filter on the derivative term, rad/s.
    pub derivative_filter_cutoff: f64,
    /// Symmetric bound on each output; the integrator is clamped so that
    /// `|ki * integral|` never exceeds it.
    #[serde(default)]
    pub output_limit: Option<f64>,
    pub sample_period: f64,
}

impl PidConfig {
    pub fn uniform(kp: f64, ki: f64, kd: f64, axes: usize, sample_period: f64) -> Self {
        Self {
            kp: vec![kp; axes],
            ki: vec![ki; axes],
            kd: vec![kd; axes],
            derivative_filter_cutoff: 20.0,
            output_limit: None,
            sample_period,
        }
    }

    pub fn axes(&self) -> usize {
        self.kp.len()
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        let n = self.kp.len();
        if n == 0 || self.ki.len() != n || self.kd.len() != n {
            return Err(BaselineError::Config(format!(
                "gain vectors must share a nonzero length (kp {}, ki {}, kd {})",
                n,
                self.ki.len(),
                self.kd.len()
            )));
        }
        if self
            .kp
            .iter()
            .chain(&self.ki)
            .chain(&self.kd)
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return Err(BaselineError::Config("PID gains must be finite and nonnegative".into()));
        }
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return Err(BaselineError::Config("PID sample period must be positive".into()));
        }
        if !(self.derivative_filter_cutoff > 0.0) {
            return Err(BaselineError::Config(
                "derivative filter cutoff must be positive (use a large value to disable)".into(),
            ));
        }
        if let Some(l) = self.output_limit {
            if !(l > 0.0) {
                return Err(BaselineError::Config("output limit must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PidState {
    pub integral: Vec<f64>,
    pub derivative: Vec<f64>,
    pub last_error: Option<Vec<f64>>,
}

impl PidState {
    pub fn zeros(axes: usize) -> Self {
        Self {
            integral: vec![0.0; axes],
            derivative: vec![0.0; axes],
            last_error: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pid {
    config: PidConfig,
    state: PidState,
    alpha: f64,
}

impl Pid {
    pub fn new(config: PidConfig) -> Result<Self, BaselineError> {
        config.validate()?;
        let alpha = (-config.derivative_filter_cutoff * config.sample_period).exp();
        Ok(Self {
            state: PidState::zeros(config.axes()),
            config,
            alpha,
        })
    }

    pub fn config(&self) -> &PidConfig {
        &self.config
    }

    pub fn state(&self) -> &PidState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = PidState::zeros(self.config.axes());
    }

    /// Integrates, filters the derivative, then forms the output.
    /// The derivative is zero on the first call.
    pub fn step(&mut self, error: &[f64]) -> Result<Vec<f64>, BaselineError> {
        let cfg = &self.config;
        let n = cfg.axes();
        if error.len() != n {
            return Err(BaselineError::Axes {
                expected: n,
                got: error.len(),
            });
        }
        let ts = cfg.sample_period;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let e = error[i];
            let st = &mut self.state;
            st.integral[i] += e * ts;
            if let (Some(lim), true) = (cfg.output_limit, cfg.ki[i] > 0.0) {
                let cap = lim / cfg.ki[i];
                st.integral[i] = st.integral[i].clamp(-cap, cap);
            }
            let raw = match &st.last_error {
                Some(prev) => (e - prev[i]) / ts,
                None => 0.0,
            };
            st.derivative[i] = self.alpha * st.derivative[i] + (1.0 - self.alpha) * raw;
            let mut v = cfg.kp[i] * e + cfg.ki[i] * st.integral[i] + cfg.kd[i] * st.derivative[i];
            if let Some(lim) = cfg.output_limit {
                v = v.clamp(-lim, lim);
            }
            out[i] = v;
        }
        self.state.last_error = Some(error.to_vec());
        Ok(out)
    }
}

/// One PID update with explicit state; see [`Pid::step`].
pub fn pid_step(
    config: &PidConfig,
    state: &mut PidState,
    error: &[f64],
) -> Result<Vec<f64>, BaselineError> {
    let mut pid = Pid::new(config.clone())?;
    if state.integral.len() != config.axes() {
        return Err(BaselineError::Axes {
            expected: config.axes(),
            got: state.integral.len(),
        });
    }
    pid.state = state.clone();
    let out = pid.step(error)?;
    *state = pid.state;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_zero_output() {
        let mut pid = Pid::new(PidConfig::uniform(1.0, 2.0, 0.5, 3, 0.01)).unwrap();
        for _ in 0..50 {
            assert_eq!(pid.step(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn proportional_only() {
        let mut pid = Pid::new(PidConfig::uniform(2.0, 0.0, 0.0, 1, 0.01)).unwrap();
        assert!((pid.step(&[0.3]).unwrap()[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn integrator_ramp() {
        let cfg = PidConfig::uniform(0.0, 1.0, 0.0, 1, 0.1);
        let mut state = PidState::zeros(1);
        let mut out = 0.0;
        for _ in 0..10 {
            out = pid_step(&cfg, &mut state, &[1.0]).unwrap()[0];
        }
        assert!((out - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anti_windup_bounds_integrator() {
        let mut cfg = PidConfig::uniform(0.5, 2.0, 0.0, 1, 0.01);
        cfg.output_limit = Some(1.0);
        let mut pid = Pid::new(cfg).unwrap();
        for _ in 0..10_000 {
            let out = pid.step(&[3.0]).unwrap()[0];
            assert!(out.abs() <= 1.0);
            assert!((2.0 * pid.state().integral[0]).abs() <= 1.0 + 1e-12);
        }
        // recovers immediately once the error flips
        let out = pid.step(&[-3.0]).unwrap()[0];
        assert!(out < 0.0);
    }

    #[test]
    fn derivative_filtered_response() {
        let cfg = PidConfig {
            derivative_filter_cutoff: 10.0,
            ..PidConfig::uniform(0.0, 0.0, 1.0, 1, 0.01)
        };
        let mut pid = Pid::new(cfg).unwrap();
        assert_eq!(pid.step(&[0.0]).unwrap()[0], 0.0);
        // ramp error e = k Ts: raw derivative 1, filtered tends to 1
        let mut last = 0.0;
        for k in 1..400 {
            last = pid.step(&[k as f64 * 0.01]).unwrap()[0];
        }
        assert!((last - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(Pid::new(PidConfig::uniform(-1.0, 0.0, 0.0, 1, 0.01)).is_err());
        assert!(Pid::new(PidConfig::uniform(1.0, 0.0, 0.0, 1, 0.0)).is_err());
        let mut pid = Pid::new(PidConfig::uniform(1.0, 0.0, 0.0, 2, 0.01)).unwrap();
        assert!(pid.step(&[1.0]).is_err());
    }
}
