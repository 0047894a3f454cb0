use serde::{Deserialize, Serialize};

use super::BenchError;

pub const HOVER_SECONDS: f64 = 1.5;
pub const HOLD_SECONDS: f64 = 1.5;
pub const MAX_SPEED: f64 = 2.0;

/// Shape knobs shared by the library.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryParams {
    pub sample_period: f64,
    /// Stretches the moving segment in time; below 1 the path is flown faster.
    pub time_scale: f64,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            sample_period: 0.01,
            time_scale: 1.0,
        }
    }
}

/// Sampled reference positions with finite-difference velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: u8,
    pub sample_period: f64,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    /// Index range of the moving segment.
    pub motion: std::ops::Range<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.sample_period
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.sample_period
    }

    /// Position at index `k`, held at the final sample past the end.
    pub fn position(&self, k: usize) -> [f64; 3] {
        self.positions[k.min(self.len() - 1)]
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities
            .iter()
            .map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn peak_to_peak(&self) -> f64 {
        (0..3)
            .map(|i| {
                let (lo, hi) = self.positions.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
                    (lo.min(p[i]), hi.max(p[i]))
                });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Sample in the middle of the moving segment.
    pub fn midpoint(&self) -> usize {
        (self.motion.start + self.motion.end) / 2
    }
}

pub struct TrajectoryInfo {
    pub id: u8,
    pub name: &'static str,
    pub description: &'static str,
}

pub const LIBRARY: [TrajectoryInfo; 5] = [
    TrajectoryInfo {
        id: 1,
        name: "line",
        description: "minimum-jerk straight line to (1, 1, 0.5) over 5 s",
    },
    TrajectoryInfo {
        id: 2,
        name: "circle",
        description: "horizontal circle, radius 1 m, period 8 s",
    },
    TrajectoryInfo {
        id: 3,
        name: "figure-eight",
        description: "2:1 lissajous, 1.5 m by 0.75 m, period 12 s",
    },
    TrajectoryInfo {
        id: 4,
        name: "spiral",
        description: "1.5 turns of radius 1 m climbing 1 m, 8 s per turn",
    },
    TrajectoryInfo {
        id: 5,
        name: "square",
        description: "2 m square with tanh-rounded corners, period 16 s",
    },
];

/// Smootherstep and its integral; both ramps start and end with zero
/// acceleration so sampled positions are C2.
fn smootherstep(x: f64) -> f64 {
    x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

fn smootherstep_integral(x: f64) -> f64 {
    x.powi(4) * (2.5 + x * (-3.0 + x))
}

/// Phase that accelerates smoothly to a constant rate, then decelerates,
/// covering `total` radians in `duration` seconds with ramps of `ramp`.
fn phase(t: f64, total: f64, duration: f64, ramp: f64) -> f64 {
    let rate = total / (duration - ramp);
    let t = t.clamp(0.0, duration);
    if t < ramp {
        rate * ramp * smootherstep_integral(t / ramp)
    } else if t <= duration - ramp {
        rate * (ramp * 0.5 + (t - ramp))
    } else {
        let rest = (duration - t) / ramp;
        total - rate * ramp * smootherstep_integral(rest)
    }
}

fn squircle(x: f64) -> f64 {
    const K: f64 = 3.0;
    (K * x).tanh() / K.tanh()
}

fn shape(id: u8, t: f64, scale: f64) -> Option<([f64; 3], f64)> {
    use std::f64::consts::PI;
    let ramp = 2.0 * scale;
    Some(match id {
        1 => {
            let dur = 5.0 * scale;
            let s = (t / dur).clamp(0.0, 1.0);
            let m = smootherstep(s);
            ([m, m, 0.5 * m], dur)
        }
        2 => {
            let dur = 8.0 * scale + ramp;
            let p = phase(t, 2.0 * PI, dur, ramp);
            ([p.sin(), 1.0 - p.cos(), 0.0], dur)
        }
        3 => {
            let dur = 12.0 * scale + ramp;
            let p = phase(t, 2.0 * PI, dur, ramp);
            ([1.5 * p.sin(), 0.75 * (2.0 * p).sin(), 0.0], dur)
        }
        4 => {
            let total = 3.0 * PI;
            let dur = 12.0 * scale + ramp;
            let p = phase(t, total, dur, ramp);
            ([p.sin(), 1.0 - p.cos(), p / total], dur)
        }
        5 => {
            let dur = 16.0 * scale + ramp;
            let p = phase(t, 2.0 * PI, dur, ramp);
            ([squircle(p.sin()), 1.0 - squircle(p.cos()), 0.0], dur)
        }
        _ => return None,
    })
}

/// Builds trajectory `id` (1..=5): hover at the origin, fly, then hold.
pub fn make_trajectory(id: u8, params: &TrajectoryParams) -> Result<Trajectory, BenchError> {
    let ts = params.sample_period;
    if !(ts.is_finite() && ts > 0.0) {
        return Err(BenchError::Config(format!("sample period must be positive, got {ts}")));
    }
    if !(params.time_scale.is_finite() && params.time_scale > 0.0) {
        return Err(BenchError::Config("time_scale must be positive".into()));
    }
    let (_, motion) = shape(id, 0.0, params.time_scale)
        .ok_or_else(|| BenchError::Config(format!("unknown trajectory id {id} (expected 1..=5)")))?;
    let hover = (HOVER_SECONDS / ts).round() as usize;
    let moving = (motion / ts).round() as usize;
    let hold = (HOLD_SECONDS / ts).round() as usize;
    let n = hover + moving + hold + 1;
    let positions: Vec<[f64; 3]> = (0..n)
        .map(|k| {
            if k < hover {
                [0.0; 3]
            } else {
                let t = (k - hover) as f64 * ts;
                shape(id, t.min(motion), params.time_scale).unwrap().0
            }
        })
        .collect();
    let velocities = finite_difference(&positions, ts);
    let traj = Trajectory {
        id,
        sample_period: ts,
        positions,
        velocities,
        motion: hover..hover + moving,
    };
    let top = traj.max_speed();
    if top > MAX_SPEED {
        return Err(BenchError::Config(format!(
            "trajectory {id} peaks at {top:.3} m/s, above the {MAX_SPEED} m/s limit"
        )));
    }
    Ok(traj)
}

/// Central differences inside, one-sided at the ends.
pub fn finite_difference(x: &[[f64; 3]], ts: f64) -> Vec<[f64; 3]> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let (a, b, h) = match (k, n) {
                (_, 1) => (0, 0, 1.0),
                (0, _) => (0, 1, ts),
                (k, n) if k == n - 1 => (k - 1, k, ts),
                (k, _) => (k - 1, k + 1, 2.0 * ts),
            };
            std::array::from_fn(|i| (x[b][i] - x[a][i]) / h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_endpoint() {
        let t = make_trajectory(1, &TrajectoryParams::default()).unwrap();
        let end = t.positions.last().unwrap();
        for (a, b) in end.iter().zip([1.0, 1.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_speed() {
        let t = make_trajectory(2, &TrajectoryParams::default()).unwrap();
        let want = 2.0 * std::f64::consts::PI / 8.0;
        assert!((t.max_speed() - want).abs() < 1e-3, "{}", t.max_speed());
    }

    #[test]
    fn all_start_with_hover() {
        for id in 1..=5 {
            let t = make_trajectory(id, &TrajectoryParams::default()).unwrap();
            assert!(t.positions[..150].iter().all(|p| *p == [0.0; 3]), "trajectory {id}");
            assert!(t.positions[150] != [0.0; 3] || t.positions[151] != [0.0; 3]);
            assert!(t.max_speed() <= MAX_SPEED);
            assert!(t.positions.iter().flatten().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn continuity() {
        // bounded second differences: no jumps in velocity
        for id in 1..=5 {
            let t = make_trajectory(id, &TrajectoryParams::default()).unwrap();
            let ts2 = t.sample_period * t.sample_period;
            for w in t.positions.windows(3) {
                for i in 0..3 {
                    let acc = (w[2][i] - 2.0 * w[1][i] + w[0][i]) / ts2;
                    assert!(acc.abs() < 3.0, "trajectory {id}: {acc}");
                }
            }
        }
    }

    #[test]
    fn rejects_unknown_and_too_fast() {
        assert!(make_trajectory(6, &TrajectoryParams::default()).is_err());
        let fast = TrajectoryParams {
            time_scale: 0.2,
            ..TrajectoryParams::default()
        };
        assert!(matches!(make_trajectory(3, &fast), Err(BenchError::Config(_))));
    }
}
