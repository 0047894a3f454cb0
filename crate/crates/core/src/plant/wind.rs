use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PlantError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindKind {
    Off,
    Constant,
    GustRegion,
    Turbulent,
}

/// Axis-aligned box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Cube of side `width` centred at `center`, unbounded in z when `tall`.
    pub fn around(center: [f64; 3], width: f64, tall: bool) -> Self {
        let h = width / 2.0;
        let mut r = Self {
            min: [center[0] - h, center[1] - h, center[2] - h],
            max: [center[0] + h, center[1] + h, center[2] + h],
        };
        if tall {
            r.min[2] = -1e3;
            r.max[2] = 1e3;
        }
        r
    }
}

/// Disturbance force acting on the vehicle.
///
/// The force is `magnitude * direction` while `t_on <= t < t_off` (and, for
/// the gust kind, while the vehicle is inside `region`). The turbulent kind
/// adds a seeded, zero-mean fluctuation with standard deviation
/// `intensity * magnitude` per axis, built from a sum of random sinusoids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindModel {
    pub kind: WindKind,
    pub magnitude: f64,
    pub direction: [f64; 3],
    pub region: Option<Region>,
    pub t_on: f64,
    #[serde(with = "crate::serde_ext")]
    pub t_off: f64,
    pub intensity: f64,
    pub noise_seed: u64,
}

impl Default for WindModel {
    fn default() -> Self {
        Self::off()
    }
}

const TURBULENCE_COMPONENTS: usize = 8;

impl WindModel {
    pub fn off() -> Self {
        Self {
            kind: WindKind::Off,
            magnitude: 0.0,
            direction: [1.0, 0.0, 0.0],
            region: None,
            t_on: 0.0,
            t_off: f64::INFINITY,
            intensity: 0.3,
            noise_seed: 0,
        }
    }

    pub fn constant(magnitude: f64, direction: [f64; 3]) -> Self {
        Self {
            kind: WindKind::Constant,
            magnitude,
            direction,
            ..Self::off()
        }
    }

    pub fn gust(magnitude: f64, direction: [f64; 3], region: Region) -> Self {
        Self {
            kind: WindKind::GustRegion,
            magnitude,
            direction,
            region: Some(region),
            ..Self::off()
        }
    }

    pub fn turbulent(magnitude: f64, direction: [f64; 3], intensity: f64, seed: u64) -> Self {
        Self {
            kind: WindKind::Turbulent,
            magnitude,
            direction,
            intensity,
            noise_seed: seed,
            ..Self::off()
        }
    }

    pub fn with_window(mut self, t_on: f64, t_off: f64) -> Self {
        self.t_on = t_on;
        self.t_off = t_off;
        self
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.magnitude.is_finite() && self.magnitude >= 0.0) {
            return Err(PlantError::Config(format!(
                "wind magnitude must be nonnegative, got {}",
                self.magnitude
            )));
        }
        let norm = self.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(PlantError::Config(format!(
                "wind direction must be a unit vector (norm {norm})"
            )));
        }
        // An empty window is allowed and means the wind never acts.
        if !(self.t_on.is_finite() && self.t_on <= self.t_off) || self.t_off.is_nan() {
            return Err(PlantError::Config(format!(
                "wind window [{}, {}) is invalid",
                self.t_on, self.t_off
            )));
        }
        if self.kind == WindKind::GustRegion && self.region.is_none() {
            return Err(PlantError::Config("gust_region wind needs a region".into()));
        }
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return Err(PlantError::Config("turbulence intensity must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn is_active(&self, t: f64, position: &[f64; 3]) -> bool {
        if self.kind == WindKind::Off || !(self.t_on <= t && t < self.t_off) {
            return false;
        }
        match (self.kind, &self.region) {
            (WindKind::GustRegion, Some(r)) => r.contains(position),
            _ => true,
        }
    }

    /// Standard deviation of the turbulent fluctuation per axis, N.
    pub fn fluctuation_std(&self) -> f64 {
        if self.kind == WindKind::Turbulent {
            self.intensity * self.magnitude
        } else {
            0.0
        }
    }

    /// Largest force magnitude the model is expected to produce; the
    /// turbulent kind uses the mean plus three standard deviations per axis.
    pub fn force_bound(&self) -> f64 {
        match self.kind {
            WindKind::Off => 0.0,
            WindKind::Constant | WindKind::GustRegion => self.magnitude,
            WindKind::Turbulent => self.magnitude + 3.0 * self.fluctuation_std() * 3f64.sqrt(),
        }
    }

    pub fn field(&self) -> WindField {
        WindField::new(self.clone())
    }
}

#[derive(Debug, Clone, Copy)]
struct Sinusoid {
    amplitude: f64,
    omega: f64,
    phase: f64,
}

/// A wind model with its turbulence components drawn once from the seed.
#[derive(Debug, Clone)]
pub struct WindField {
    model: WindModel,
    components: Vec<[Sinusoid; 3]>,
}

impl WindField {
    pub fn new(model: WindModel) -> Self {
        let mut components = Vec::new();
        if model.kind == WindKind::Turbulent {
            let mut rng = ChaCha8Rng::seed_from_u64(model.noise_seed);
            // sum of K sinusoids with amplitude a has variance K a^2 / 2
            let amplitude =
                model.fluctuation_std() * (2.0 / TURBULENCE_COMPONENTS as f64).sqrt();
            for _ in 0..TURBULENCE_COMPONENTS {
                let mut draw = || Sinusoid {
                    amplitude,
                    omega: 2.0 * std::f64::consts::PI * rng.random_range(0.1..2.0),
                    phase: rng.random_range(0.0..2.0 * std::f64::consts::PI),
                };
                components.push([draw(), draw(), draw()]);
            }
        }
        Self { model, components }
    }

    pub fn model(&self) -> &WindModel {
        &self.model
    }

    /// Force on the vehicle at time `t` and position `p`, N.
    pub fn force(&self, t: f64, p: &[f64; 3]) -> [f64; 3] {
        if !self.model.is_active(t, p) {
            return [0.0; 3];
        }
        let m = &self.model;
        let mut f = [
            m.magnitude * m.direction[0],
            m.magnitude * m.direction[1],
            m.magnitude * m.direction[2],
        ];
        for comp in &self.components {
            for (i, s) in comp.iter().enumerate() {
                f[i] += s.amplitude * (s.omega * t + s.phase).sin();
            }
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_half_open_and_may_be_empty() {
        let w = WindModel::constant(1.0, [1.0, 0.0, 0.0]).with_window(1.0, 2.0);
        let f = w.field();
        assert_eq!(f.force(0.99, &[0.0; 3]), [0.0; 3]);
        assert_eq!(f.force(1.0, &[0.0; 3]), [1.0, 0.0, 0.0]);
        assert_eq!(f.force(2.0, &[0.0; 3]), [0.0; 3]);
        let empty = WindModel::constant(1.0, [1.0, 0.0, 0.0]).with_window(1.0, 1.0);
        assert!(empty.validate().is_ok());
        assert!((0..300).all(|k| !empty.is_active(k as f64 * 0.01, &[0.0; 3])));
        let backwards = WindModel::constant(1.0, [1.0, 0.0, 0.0]).with_window(2.0, 1.0);
        assert!(backwards.validate().is_err());
    }

    #[test]
    fn gust_only_inside_region() {
        let w = WindModel::gust(1.5, [0.0, 1.0, 0.0], Region::around([1.0, 1.0, 0.0], 1.0, false));
        let f = w.field();
        assert_eq!(f.force(3.0, &[1.2, 0.9, 0.1]), [0.0, 1.5, 0.0]);
        assert_eq!(f.force(3.0, &[1.6, 0.9, 0.1]), [0.0; 3]);
    }

    #[test]
    fn turbulence_statistics_and_seed() {
        let w = WindModel::turbulent(1.0, [1.0, 0.0, 0.0], 0.3, 7);
        let (a, b) = (w.field(), w.field());
        let other = WindModel {
            noise_seed: 8,
            ..w.clone()
        }
        .field();
        let mut sum = 0.0;
        let mut sq = 0.0;
        let n = 200_000;
        for k in 0..n {
            let t = k as f64 * 0.01;
            let fa = a.force(t, &[0.0; 3]);
            assert_eq!(fa, b.force(t, &[0.0; 3]));
            sum += fa[1];
            sq += fa[1] * fa[1];
            if k == 10 {
                assert_ne!(fa, other.force(t, &[0.0; 3]));
            }
        }
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((std - 0.3).abs() < 0.03, "{std}");
    }

    #[test]
    fn rejects_non_unit_direction() {
        assert!(WindModel::constant(1.0, [1.0, 1.0, 0.0]).validate().is_err());
        assert!(WindModel::constant(-1.0, [1.0, 0.0, 0.0]).validate().is_err());
    }
}
