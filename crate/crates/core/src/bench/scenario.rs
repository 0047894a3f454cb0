use serde::{Deserialize, Serialize};

use super::trajectory::{make_trajectory, Trajectory, TrajectoryParams};
use super::BenchError;
use crate::baselines::{LqrConfig, PidConfig};
use crate::l1ctl::L1Config;
use crate::mpc::MpcConfig;
use crate::plant::{PlantParams, Region, WindKind, WindModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterKind {
    /// The trajectory itself is the position reference.
    Direct,
    Pid,
    Lqr,
    Mpc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerKind {
    L1,
    Pid,
}

impl OuterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Direct => "direct",
            Self::Pid => "pid",
            Self::Lqr => "lqr",
            Self::Mpc => "mpc",
        }
    }
}

impl InnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::L1 => "l1",
            Self::Pid => "pid",
        }
    }
}

/// Stack label in the usual `OUTER-INNER` form, e.g. `MPC-L1`.
pub fn stack_label(outer: OuterKind, inner: InnerKind) -> String {
    format!("{}-{}", outer.as_str(), inner.as_str()).to_uppercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindPreset {
    Off,
    /// The default gust for the trajectory; see [`default_gust`].
    Gust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindSetting {
    Preset(WindPreset),
    Model(WindModel),
}

impl Default for WindSetting {
    fn default() -> Self {
        Self::Preset(WindPreset::Off)
    }
}

pub const DEFAULT_GUST_FORCE: f64 = 1.5;
pub const DEFAULT_GUST_WIDTH: f64 = 1.0;

/// A 1 m box centred on the middle of the moving segment, pushing
/// horizontally across the path there.
pub fn default_gust(traj: &Trajectory) -> WindModel {
    let k = traj.midpoint();
    let v = traj.velocities[k];
    let h = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let dir = if h > 1e-6 {
        [-v[1] / h, v[0] / h, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    WindModel::gust(
        DEFAULT_GUST_FORCE,
        dir,
        Region::around(traj.positions[k], DEFAULT_GUST_WIDTH, false),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentificationConfig {
    pub step_size: f64,
    pub duration: f64,
}

impl Default for IdentificationConfig {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            duration: 6.0,
        }
    }
}

/// Outer PID on the position error, adding a correction to the trajectory.
/// Gains come from `l1mpc tune` over the default L1 loop (mean error over
/// the trajectory library).
pub fn default_outer_pid() -> PidConfig {
    PidConfig {
        kp: vec![50.41; 3],
        ki: vec![0.3278; 3],
        kd: vec![1.305; 3],
        derivative_filter_cutoff: 20.0,
        output_limit: Some(2.0),
        sample_period: 0.01,
    }
}

/// Position PID mapping the error straight to normalized tilt (x, y) and
/// climb rate (z). Tuned inside the MPC-PID stack on trajectory 4, calm and
/// with the default gust.
pub fn default_inner_pid() -> PidConfig {
    PidConfig {
        kp: vec![0.6471, 0.6471, 1.434],
        ki: vec![0.1309, 0.1309, 1.575],
        kd: vec![0.2733, 0.2733, 0.0],
        derivative_filter_cutoff: 20.0,
        output_limit: Some(0.8),
        sample_period: 0.01,
    }
}

/// Tuned like the outer PID. The velocity weight sits at the tuner's floor:
/// the L1 loop already damps velocity.
pub fn default_lqr() -> LqrConfig {
    LqrConfig::uniform(119.8, 1e-4, 2423.0, 1.0, 0.01)
}

/// One closed-loop experiment; every field has a default so a scenario file
/// only needs what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: Option<String>,
    pub outer: OuterKind,
    pub inner: InnerKind,
    pub trajectory: u8,
    pub trajectory_params: TrajectoryParams,
    pub wind: WindSetting,
    pub seed: u64,
    /// Standard deviation of additive Gaussian position noise, m.
    pub position_noise: f64,
    pub sample_period: f64,
    pub plant_step: f64,
    pub plant: PlantParams,
    pub l1: L1Config,
    pub mpc: MpcConfig,
    pub outer_pid: PidConfig,
    pub inner_pid: PidConfig,
    pub lqr: LqrConfig,
    pub identification: IdentificationConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: None,
            outer: OuterKind::Mpc,
            inner: InnerKind::L1,
            trajectory: 1,
            trajectory_params: TrajectoryParams::default(),
            wind: WindSetting::default(),
            seed: 0,
            position_noise: 0.0,
            sample_period: 0.01,
            plant_step: 0.001,
            plant: PlantParams::default(),
            l1: L1Config::default(),
            mpc: MpcConfig::default(),
            outer_pid: default_outer_pid(),
            inner_pid: default_inner_pid(),
            lqr: default_lqr(),
            identification: IdentificationConfig::default(),
        }
    }
}

impl Scenario {
    pub fn stack(outer: OuterKind, inner: InnerKind, trajectory: u8) -> Self {
        Self {
            outer,
            inner,
            trajectory,
            ..Self::default()
        }
    }

    pub fn with_wind(mut self, wind: WindSetting) -> Self {
        self.wind = wind;
        self
    }

    /// Moves the scenario and every controller to sample period `ts`.
    pub fn with_sample_period(mut self, ts: f64) -> Self {
        self.sample_period = ts;
        self.l1.sample_period = ts;
        self.mpc.sample_period = ts;
        self.outer_pid.sample_period = ts;
        self.inner_pid.sample_period = ts;
        self.lqr.sample_period = ts;
        self
    }

    pub fn label(&self) -> String {
        stack_label(self.outer, self.inner)
    }

    pub fn wind_label(&self) -> String {
        match &self.wind {
            WindSetting::Preset(WindPreset::Off) => "off".into(),
            WindSetting::Preset(WindPreset::Gust) => "gust".into(),
            WindSetting::Model(m) => match m.kind {
                WindKind::Off => "off".into(),
                WindKind::Constant => "constant".into(),
                WindKind::GustRegion => "gust".into(),
                WindKind::Turbulent => "turbulent".into(),
            },
        }
    }

    /// Stable identifier used for file names and ordering.
    pub fn key(&self) -> String {
        let base = format!(
            "{}-{}-t{}-{}",
            self.outer.as_str(),
            self.inner.as_str(),
            self.trajectory,
            self.wind_label()
        );
        match &self.name {
            Some(n) => format!("{base}-{}", sanitize(n)),
            None => base,
        }
    }

    pub fn make_trajectory(&self) -> Result<Trajectory, BenchError> {
        make_trajectory(
            self.trajectory,
            &TrajectoryParams {
                sample_period: self.sample_period,
                ..self.trajectory_params
            },
        )
    }

    pub fn wind_model(&self, traj: &Trajectory) -> WindModel {
        match &self.wind {
            WindSetting::Preset(WindPreset::Off) => WindModel::off(),
            WindSetting::Preset(WindPreset::Gust) => default_gust(traj),
            WindSetting::Model(m) => m.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.outer == OuterKind::Lqr && self.inner == InnerKind::Pid {
            return Err(BenchError::Config(
                "LQR outer loop is designed on the L1 ideal model and needs the L1 inner loop"
                    .into(),
            ));
        }
        let ts = self.sample_period;
        if !(ts.is_finite() && ts > 0.0) {
            return Err(BenchError::Config("sample period must be positive".into()));
        }
        let ratio = ts / self.plant_step;
        if !(self.plant_step > 0.0 && self.plant_step <= 1e-3 + 1e-15)
            || (ratio - ratio.round()).abs() > 1e-9
        {
            return Err(BenchError::Config(format!(
                "plant step {} must be at most 1 ms and divide the sample period {ts}",
                self.plant_step
            )));
        }
        if !(self.position_noise.is_finite() && self.position_noise >= 0.0) {
            return Err(BenchError::Config("position noise must be nonnegative".into()));
        }
        let same = |t: f64| (t - ts).abs() <= 1e-12;
        let periods = [
            ("l1", self.l1.sample_period),
            ("mpc", self.mpc.sample_period),
            ("outer_pid", self.outer_pid.sample_period),
            ("inner_pid", self.inner_pid.sample_period),
            ("lqr", self.lqr.sample_period),
        ];
        for (name, t) in periods {
            if !same(t) {
                return Err(BenchError::Config(format!(
                    "{name} sample period {t} differs from the scenario's {ts}"
                )));
            }
        }
        if self.l1.axes() != 3 {
            return Err(BenchError::Config("the L1 controller must have three axes".into()));
        }
        self.l1.validate()?;
        self.mpc.validate()?;
        self.outer_pid.validate()?;
        self.inner_pid.validate()?;
        self.lqr.validate()?;
        self.plant.validate()?;
        let traj = self.make_trajectory()?;
        self.wind_model(&traj).validate()?;
        if !(self.identification.step_size.is_finite()
            && self.identification.step_size != 0.0
            && self.identification.duration > 10.0 * ts)
        {
            return Err(BenchError::Config("identification step and duration must be usable".into()));
        }
        Ok(())
    }

    /// The scenario with the wind preset replaced by the concrete model, so
    /// the emitted configuration describes the run completely.
    pub fn resolved(&self) -> Result<Self, BenchError> {
        let traj = self.make_trajectory()?;
        Ok(Self {
            wind: WindSetting::Model(self.wind_model(&traj)),
            ..self.clone()
        })
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for outer in [OuterKind::Direct, OuterKind::Pid, OuterKind::Lqr, OuterKind::Mpc] {
            for inner in [InnerKind::L1, InnerKind::Pid] {
                let sc = Scenario::stack(outer, inner, 2);
                let ok = sc.validate().is_ok();
                assert_eq!(ok, !(outer == OuterKind::Lqr && inner == InnerKind::Pid));
            }
        }
    }

    #[test]
    fn json_round_trip_and_presets() {
        let sc: Scenario =
            serde_json::from_str(r#"{"outer":"pid","inner":"l1","trajectory":3,"wind":"gust"}"#)
                .unwrap();
        assert_eq!(sc.outer, OuterKind::Pid);
        assert_eq!(sc.wind, WindSetting::Preset(WindPreset::Gust));
        let resolved = sc.resolved().unwrap();
        let text = serde_json::to_string(&resolved).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back, resolved);
        assert!(matches!(back.wind, WindSetting::Model(ref m) if m.kind == WindKind::GustRegion));
        assert!(serde_json::from_str::<Scenario>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn gust_crosses_the_path() {
        let traj = crate::bench::make_trajectory(1, &TrajectoryParams::default()).unwrap();
        let g = default_gust(&traj);
        let mid = traj.positions[traj.midpoint()];
        assert!(g.is_active(5.0, &mid));
        let v = traj.velocities[traj.midpoint()];
        let dot: f64 = (0..3).map(|i| v[i] * g.direction[i]).sum();
        assert!(dot.abs() < 1e-9);
    }

    #[test]
    fn keys_are_distinct() {
        let a = Scenario::stack(OuterKind::Mpc, InnerKind::L1, 1);
        let b = a.clone().with_wind(WindSetting::Preset(WindPreset::Gust));
        assert_ne!(a.key(), b.key());
        assert_eq!(a.label(), "MPC-L1");
    }
}
