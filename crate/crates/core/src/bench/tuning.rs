//! Coordinate-descent gain tuning of the baselines. The outer PID and the
//! LQR minimize the mean error over the whole trajectory library, so a gain
//! set that only holds on some paths loses; the inner PID of the MPC-PID
//! stack (slow to evaluate) trains on one trajectory, calm and gusty.

use super::run::run_scenario;
use super::scenario::{InnerKind, OuterKind, Scenario, WindPreset, WindSetting};
use super::trajectory::LIBRARY;
use crate::baselines::{LqrConfig, PidConfig};

/// Training trajectory of the inner PID.
pub const TUNING_TRAJECTORY: u8 = 4;
pub const TUNING_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub params: Vec<f64>,
    pub cost: f64,
    pub evaluations: usize,
}

/// Minimizes `cost` over box-bounded parameters. Each iteration probes every
/// coordinate up and down by its step (multiplicatively, so gains keep their
/// sign); when a full sweep finds nothing better the steps shrink.
pub fn coordinate_descent<F>(
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    iterations: usize,
    mut cost: F,
) -> TuningResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = start.to_vec();
    let mut best = cost(&x);
    let mut evaluations = 1;
    let mut factor = vec![1.5; x.len()];
    for _ in 0..iterations {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut cand = x.clone();
                let f = if dir > 0.0 { factor[i] } else { 1.0 / factor[i] };
                cand[i] = if cand[i] == 0.0 {
                    if dir > 0.0 { (upper[i] * 1e-2).max(lower[i]) } else { 0.0 }
                } else {
                    cand[i] * f
                };
                cand[i] = cand[i].clamp(lower[i], upper[i]);
                if cand[i] == x[i] {
                    continue;
                }
                let c = cost(&cand);
                evaluations += 1;
                if c.is_finite() && c < best {
                    best = c;
                    x = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for f in &mut factor {
                *f = f.sqrt();
            }
            if factor.iter().all(|f| *f < 1.001) {
                break;
            }
        }
    }
    TuningResult {
        params: x,
        cost: best,
        evaluations,
    }
}

fn error_or_inf(sc: &Scenario) -> f64 {
    run_scenario(sc).map(|r| r.avg_error()).unwrap_or(f64::INFINITY)
}

fn training(base: &Scenario, outer: OuterKind) -> Scenario {
    Scenario {
        outer,
        inner: InnerKind::L1,
        ..base.clone()
    }
}

/// Mean error over the library; infinite as soon as one run fails.
fn library_error(sc: &Scenario) -> f64 {
    let mut total = 0.0;
    for info in LIBRARY.iter() {
        let e = error_or_inf(&Scenario {
            trajectory: info.id,
            ..sc.clone()
        });
        if !e.is_finite() {
            return f64::INFINITY;
        }
        total += e;
    }
    total / LIBRARY.len() as f64
}

/// Tunes uniform `(kp, ki, kd)` of the outer PID over the L1 inner loop.
pub fn tune_outer_pid(base: &Scenario, iterations: usize) -> (PidConfig, TuningResult) {
    let sc = training(base, OuterKind::Pid);
    let make = |p: &[f64]| PidConfig {
        kp: vec![p[0]; 3],
        ki: vec![p[1]; 3],
        kd: vec![p[2]; 3],
        ..sc.outer_pid.clone()
    };
    let start = [sc.outer_pid.kp[0], sc.outer_pid.ki[0], sc.outer_pid.kd[0]];
    let res = coordinate_descent(&start, &[0.0; 3], &[100.0, 100.0, 20.0], iterations, |p| {
        library_error(&Scenario {
            outer_pid: make(p),
            ..sc.clone()
        })
    });
    (make(&res.params), res)
}

/// Tunes uniform position, velocity and integral weights of the LQR
/// (input weight fixed at its base value).
pub fn tune_lqr(base: &Scenario, iterations: usize) -> (LqrConfig, TuningResult) {
    let sc = training(base, OuterKind::Lqr);
    let make = |p: &[f64]| LqrConfig {
        position_weight: vec![p[0]; 3],
        velocity_weight: vec![p[1]; 3],
        integral_weight: vec![p[2]; 3],
        ..sc.lqr.clone()
    };
    let start = [sc.lqr.position_weight[0], sc.lqr.velocity_weight[0], sc.lqr.integral_weight[0]];
    let res = coordinate_descent(&start, &[1e-4; 3], &[1e6; 3], iterations, |p| {
        library_error(&Scenario {
            lqr: make(p),
            ..sc.clone()
        })
    });
    (make(&res.params), res)
}

/// Tunes the inner position PID (shared horizontal gains, separate vertical
/// `kp`, `ki`) inside the MPC-PID stack, identification included. The cost
/// averages the training trajectory with and without the default gust: on
/// calm runs alone the tuner drifts to gains that limit-cycle once the
/// output saturates.
pub fn tune_inner_pid(base: &Scenario, iterations: usize) -> (PidConfig, TuningResult) {
    let sc = Scenario {
        outer: OuterKind::Mpc,
        inner: InnerKind::Pid,
        trajectory: TUNING_TRAJECTORY,
        ..base.clone()
    };
    let make = |p: &[f64]| PidConfig {
        kp: vec![p[0], p[0], p[3]],
        ki: vec![p[1], p[1], p[4]],
        kd: vec![p[2], p[2], 0.0],
        ..sc.inner_pid.clone()
    };
    let p0 = &sc.inner_pid;
    let start = [p0.kp[0], p0.ki[0], p0.kd[0], p0.kp[2], p0.ki[2]];
    let res = coordinate_descent(&start, &[0.0; 5], &[5.0, 5.0, 5.0, 10.0, 10.0], iterations, |p| {
        let trial = Scenario {
            inner_pid: make(p),
            ..sc.clone()
        };
        let calm = error_or_inf(&trial);
        let gust = error_or_inf(&trial.with_wind(WindSetting::Preset(WindPreset::Gust)));
        0.5 * (calm + gust)
    });
    (make(&res.params), res)
}
