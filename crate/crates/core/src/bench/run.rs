use std::io::{BufRead, Write};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scenario::{InnerKind, OuterKind, Scenario};
use super::trajectory::Trajectory;
use super::BenchError;
use crate::baselines::{
    identify_step_response, BaselineError, ClosedLoopRunner, IdentifiedModel, LqrTracker, Pid,
    PidConfig, SecondOrderModel,
};
use crate::l1ctl::{ideal_axis_model, L1Controller};
use crate::lti::discretize_zoh;
use crate::mpc::{MpcConfig, MpcProblem};
use crate::plant::{attitude_command, Plant, PlantParams, VehicleState, WindModel, DEFAULT_YAW_GAIN};

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.comp += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Average Euclidean position error and per-axis RMS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub avg_error: f64,
    pub axis_rms: [f64; 3],
}

/// `e = (1/N) sum_k |target(k) - output(k)|`.
pub fn compute_avg_error(
    targets: &[[f64; 3]],
    outputs: &[[f64; 3]],
) -> Result<ErrorStats, BenchError> {
    if targets.len() != outputs.len() {
        return Err(BenchError::Config(format!(
            "series lengths differ: {} targets, {} outputs",
            targets.len(),
            outputs.len()
        )));
    }
    if targets.is_empty() {
        return Err(BenchError::Config("cannot average an empty series".into()));
    }
    let n = targets.len() as f64;
    let norm = |t: &[f64; 3], y: &[f64; 3]| {
        let e = [t[0] - y[0], t[1] - y[1], t[2] - y[2]];
        (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
    };
    // Mean of deviations from the first sample, compensated, so that a
    // constant series averages to itself exactly.
    let pivot = norm(&targets[0], &outputs[0]);
    let mut dev = Neumaier::default();
    let mut sq = [Neumaier::default(), Neumaier::default(), Neumaier::default()];
    for (t, y) in targets.iter().zip(outputs) {
        dev.add(norm(t, y) - pivot);
        for i in 0..3 {
            sq[i].add((t[i] - y[i]).powi(2));
        }
    }
    Ok(ErrorStats {
        avg_error: pivot + dev.total() / n,
        axis_rms: sq.map(|s| (s.total() / n).sqrt()),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub projection_hits: u64,
    pub attitude_clamps: u64,
    pub qp_solves: u64,
    pub qp_max_iterations: usize,
    /// Largest `|second difference| / Ts^2` over every optimized reference
    /// sequence, including the two previously applied moves.
    pub max_reference_accel: f64,
    pub identified_model: Option<IdentifiedModel>,
}

/// Everything recorded at the controller rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub key: String,
    pub label: String,
    /// The scenario with its wind resolved to a concrete model.
    pub scenario: Scenario,
    pub times: Vec<f64>,
    pub targets: Vec<[f64; 3]>,
    pub r2: Vec<[f64; 3]>,
    pub y2: Vec<[f64; 3]>,
    pub y1: Vec<[f64; 3]>,
    pub yhat1: Vec<[f64; 3]>,
    pub sigma_hat: Vec<[f64; 3]>,
    pub u: Vec<[f64; 3]>,
    pub wind: Vec<[f64; 3]>,
    pub stats: ErrorStats,
    pub diagnostics: RunDiagnostics,
    pub runtime_s: f64,
}

impl ScenarioResult {
    pub fn avg_error(&self) -> f64 {
        self.stats.avg_error
    }

    fn empty(sc: &Scenario) -> Self {
        Self {
            key: sc.key(),
            label: sc.label(),
            scenario: sc.clone(),
            times: Vec::new(),
            targets: Vec::new(),
            r2: Vec::new(),
            y2: Vec::new(),
            y1: Vec::new(),
            yhat1: Vec::new(),
            sigma_hat: Vec::new(),
            u: Vec::new(),
            wind: Vec::new(),
            stats: ErrorStats {
                avg_error: f64::NAN,
                axis_rms: [f64::NAN; 3],
            },
            diagnostics: RunDiagnostics::default(),
            runtime_s: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A failed run with whatever was recorded before the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub step: usize,
    pub message: String,
    pub partial: Box<ScenarioResult>,
}

/// Inner position PID at hover, stepped on one axis; feeds identification.
pub struct PidHoverExperiment {
    pub params: PlantParams,
    pub pid: PidConfig,
    pub plant_step: f64,
}

impl ClosedLoopRunner for PidHoverExperiment {
    fn sample_period(&self) -> f64 {
        self.pid.sample_period
    }

    fn step_response(
        &mut self,
        axis: usize,
        step_size: f64,
        duration: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), BaselineError> {
        let ts = self.pid.sample_period;
        let sub = (ts / self.plant_step).round() as usize;
        let mut plant = Plant::new(self.params, VehicleState::default(), &WindModel::off(), self.plant_step)
            .map_err(|e| BaselineError::Experiment(e.to_string()))?;
        let mut pid = Pid::new(self.pid.clone())?;
        let n = (duration / ts).round() as usize;
        let (mut u, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for k in 0..n {
            let s = *plant.state();
            let mut r2 = [0.0; 3];
            if k >= 10 {
                r2[axis] = step_size;
            }
            let err: Vec<f64> = (0..3).map(|i| r2[i] - s.position[i]).collect();
            let out = pid.step(&err)?;
            let (cmd, _) = attitude_command([out[0], out[1], out[2]], s.attitude[2], DEFAULT_YAW_GAIN);
            u.push(r2[axis]);
            y.push(s.position[axis]);
            plant
                .advance(&cmd, sub)
                .map_err(|e| BaselineError::Experiment(e.to_string()))?;
        }
        Ok((u, y))
    }
}

/// Step-response identification of the PID-controlled vehicle, one model per axis.
pub fn identify_pid_loop(sc: &Scenario) -> Result<IdentifiedModel, BenchError> {
    let mut exp = PidHoverExperiment {
        params: sc.plant,
        pid: sc.inner_pid.clone(),
        plant_step: sc.plant_step,
    };
    Ok(identify_step_response(
        &mut exp,
        &[0, 1, 2],
        sc.identification.step_size,
        sc.identification.duration,
    )?)
}

enum MpcModel {
    Ideal,
    Identified(Vec<SecondOrderModel>),
}

enum Outer {
    Direct,
    Pid(Pid),
    Lqr(LqrTracker),
    Mpc {
        problems: Vec<MpcProblem>,
        model: MpcModel,
        prev: [[f64; 2]; 3],
        last_y2: [f64; 3],
    },
}

enum Inner {
    L1(L1Controller),
    Pid(Pid),
}

/// Per-axis MPC problems on the ideal L1 closed-loop model.
pub fn ideal_mpc_problems(sc: &Scenario) -> Result<Vec<MpcProblem>, BenchError> {
    (0..3)
        .map(|i| {
            let d = ideal_axis_model(sc.l1.ref_poles[i], sc.l1.outer_gains[i])?;
            if d.order() != 2 {
                return Err(BenchError::Config(
                    "MPC over L1 needs the outer position loop (nonzero outer gains)".into(),
                ));
            }
            Ok(MpcProblem::new(sc.mpc, discretize_zoh(&d, sc.sample_period)?)?)
        })
        .collect()
}

fn identified_problems(
    cfg: MpcConfig,
    models: &[SecondOrderModel],
) -> Result<Vec<MpcProblem>, BenchError> {
    models
        .iter()
        .map(|m| Ok(MpcProblem::new(cfg, m.to_system()?)?))
        .collect()
}

fn build_outer(sc: &Scenario, diag: &mut RunDiagnostics) -> Result<Outer, BenchError> {
    Ok(match sc.outer {
        OuterKind::Direct => Outer::Direct,
        OuterKind::Pid => Outer::Pid(Pid::new(sc.outer_pid.clone())?),
        OuterKind::Lqr => {
            let models = (0..3)
                .map(|i| ideal_axis_model(sc.l1.ref_poles[i], sc.l1.outer_gains[i]))
                .collect::<Result<Vec<_>, _>>()?;
            Outer::Lqr(LqrTracker::new(&sc.lqr, &models)?)
        }
        OuterKind::Mpc => {
            let (problems, model) = match sc.inner {
                InnerKind::L1 => (ideal_mpc_problems(sc)?, MpcModel::Ideal),
                InnerKind::Pid => {
                    let ident = identify_pid_loop(sc)?;
                    let problems = identified_problems(sc.mpc, &ident.axes)?;
                    let models = ident.axes.clone();
                    diag.identified_model = Some(ident);
                    (problems, MpcModel::Identified(models))
                }
            };
            Outer::Mpc {
                problems,
                model,
                prev: [[0.0; 2]; 3],
                last_y2: [0.0; 3],
            }
        }
    })
}

/// Runs one scenario end to end at the controller rate.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioResult, BenchError> {
    run_scenario_traced(sc).map_err(|f| BenchError::Runtime {
        key: f.partial.key.clone(),
        step: f.step,
        message: f.message,
    })
}

/// As [`run_scenario`], but a runtime failure keeps the partial record.
pub fn run_scenario_traced(sc: &Scenario) -> Result<ScenarioResult, RunFailure> {
    let started = Instant::now();
    let fail0 = |e: BenchError| RunFailure {
        step: 0,
        message: e.to_string(),
        partial: Box::new(ScenarioResult::empty(sc)),
    };
    sc.validate().map_err(fail0)?;
    let resolved = sc.resolved().map_err(fail0)?;
    let traj = sc.make_trajectory().map_err(fail0)?;
    let mut rec = ScenarioResult::empty(&resolved);
    let wind = resolved.wind_model(&traj);

    let mut diag = RunDiagnostics::default();
    let built = (|| -> Result<_, BenchError> {
        let outer = build_outer(sc, &mut diag)?;
        let inner = match sc.inner {
            InnerKind::L1 => Inner::L1(L1Controller::new(sc.l1.clone())?),
            InnerKind::Pid => Inner::Pid(Pid::new(sc.inner_pid.clone())?),
        };
        let plant = Plant::new(sc.plant, VehicleState::at(traj.positions[0]), &wind, sc.plant_step)?;
        Ok((outer, inner, plant))
    })();
    let (mut outer, mut inner, mut plant) = built.map_err(fail0)?;
    rec.diagnostics = diag;

    let substeps = (sc.sample_period / sc.plant_step).round() as usize;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let noise = Normal::new(0.0, sc.position_noise.max(0.0)).expect("nonnegative std");
    let ts2 = sc.sample_period * sc.sample_period;

    for k in 0..traj.len() {
        let s = *plant.state();
        let mut y2 = s.position;
        if sc.position_noise > 0.0 {
            for v in y2.iter_mut() {
                *v += noise.sample(&mut noise_rng);
            }
        }
        let y1 = s.velocity;
        let target = traj.positions[k];

        let step = (|| -> Result<([f64; 3], [f64; 3], [f64; 3], [f64; 3]), BenchError> {
            let r2 = outer_step(&mut outer, &traj, k, &y2, &y1, ts2, &mut rec.diagnostics)?;
            let (u, yhat, sigma) = match &mut inner {
                Inner::L1(c) => {
                    let tick = c.tick_extended(&r2, &y1, &y2)?;
                    (to3(&tick.u), to3(&tick.predictor), to3(&tick.sigma_hat))
                }
                Inner::Pid(p) => {
                    let err: Vec<f64> = (0..3).map(|i| r2[i] - y2[i]).collect();
                    (to3(&p.step(&err)?), [0.0; 3], [0.0; 3])
                }
            };
            Ok((r2, u, yhat, sigma))
        })();
        let (r2, u, yhat, sigma) = match step {
            Ok(v) => v,
            Err(e) => {
                return Err(RunFailure {
                    step: k,
                    message: e.to_string(),
                    partial: Box::new(finish(rec, started)),
                })
            }
        };
        let (cmd, clamped) = attitude_command(u, s.attitude[2], DEFAULT_YAW_GAIN);
        if clamped {
            rec.diagnostics.attitude_clamps += 1;
        }
        let force = match plant.advance(&cmd, substeps) {
            Ok(f) => f,
            Err(e) => {
                return Err(RunFailure {
                    step: k,
                    message: e.to_string(),
                    partial: Box::new(finish(rec, started)),
                })
            }
        };
        rec.times.push(traj.time(k));
        rec.targets.push(target);
        rec.r2.push(r2);
        rec.y2.push(y2);
        rec.y1.push(y1);
        rec.yhat1.push(yhat);
        rec.sigma_hat.push(sigma);
        rec.u.push(u);
        rec.wind.push(force);
    }
    if let Inner::L1(c) = &inner {
        rec.diagnostics.projection_hits = c.diagnostics().projection_hits;
    }
    let out = finish(rec, started);
    Ok(out)
}

fn finish(mut rec: ScenarioResult, started: Instant) -> ScenarioResult {
    if let Ok(stats) = compute_avg_error(&rec.targets, &rec.y2) {
        rec.stats = stats;
    }
    rec.runtime_s = started.elapsed().as_secs_f64();
    rec
}

fn to3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

fn outer_step(
    outer: &mut Outer,
    traj: &Trajectory,
    k: usize,
    y2: &[f64; 3],
    y1: &[f64; 3],
    ts2: f64,
    diag: &mut RunDiagnostics,
) -> Result<[f64; 3], BenchError> {
    let target = traj.positions[k];
    Ok(match outer {
        Outer::Direct => target,
        Outer::Pid(pid) => {
            let err: Vec<f64> = (0..3).map(|i| target[i] - y2[i]).collect();
            let corr = pid.step(&err)?;
            [target[0] + corr[0], target[1] + corr[1], target[2] + corr[2]]
        }
        Outer::Lqr(lqr) => to3(&lqr.step(&target, &traj.velocities[k], y2, y1)?),
        Outer::Mpc {
            problems,
            model,
            prev,
            last_y2,
        } => {
            if k == 0 {
                for i in 0..3 {
                    prev[i] = [y2[i], y2[i]];
                    last_y2[i] = y2[i];
                }
            }
            let horizon = problems[0].moves();
            let mut r2 = [0.0; 3];
            for i in 0..3 {
                let window: Vec<f64> = (1..=horizon).map(|j| traj.position(k + j)[i]).collect();
                let x0 = match model {
                    MpcModel::Ideal => vec![y2[i], y1[i]],
                    MpcModel::Identified(m) => m[i].state(y2[i], last_y2[i], prev[i][0]).to_vec(),
                };
                let step = problems[i].step(&x0, &window, prev[i])?;
                diag.qp_solves += 1;
                diag.qp_max_iterations = diag.qp_max_iterations.max(step.solution.iterations);
                let mut seq = vec![prev[i][1], prev[i][0]];
                seq.extend(step.sequence.iter());
                for w in seq.windows(3) {
                    let acc = (w[2] - 2.0 * w[1] + w[0]).abs() / ts2;
                    diag.max_reference_accel = diag.max_reference_accel.max(acc);
                }
                r2[i] = step.input;
                prev[i] = [step.input, prev[i][0]];
                last_y2[i] = y2[i];
            }
            r2
        }
    })
}

pub const CSV_COLUMNS: [&str; 25] = [
    "t", "r2_x", "r2_y", "r2_z", "y2_x", "y2_y", "y2_z", "y1_x", "y1_y", "y1_z", "yhat1_x",
    "yhat1_y", "yhat1_z", "sigmahat_x", "sigmahat_y", "sigmahat_z", "u_x", "u_y", "u_z",
    "wind_x", "wind_y", "wind_z", "target_x", "target_y", "target_z",
];

/// One row per sample; floats use the shortest representation that parses
/// back to the same value.
pub fn write_csv<W: Write>(res: &ScenarioResult, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    let mut line = String::with_capacity(512);
    for k in 0..res.len() {
        line.clear();
        line.push_str(&res.times[k].to_string());
        for series in [
            &res.r2,
            &res.y2,
            &res.y1,
            &res.yhat1,
            &res.sigma_hat,
            &res.u,
            &res.wind,
            &res.targets,
        ] {
            for v in series[k] {
                line.push(',');
                line.push_str(&v.to_string());
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn csv_string(res: &ScenarioResult) -> String {
    let mut buf = Vec::new();
    write_csv(res, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ASCII output")
}

/// Columns of a scenario CSV, keyed by header name.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(&self.columns[i])
    }

    pub fn triples(&self, prefix: &str) -> Option<Vec<[f64; 3]>> {
        let x = self.column(&format!("{prefix}_x"))?;
        let y = self.column(&format!("{prefix}_y"))?;
        let z = self.column(&format!("{prefix}_z"))?;
        Some((0..x.len()).map(|k| [x[k], y[k], z[k]]).collect())
    }
}

pub fn read_csv<R: BufRead>(r: R) -> Result<CsvTable, BenchError> {
    let mut lines = r.lines();
    let header: Vec<String> = match lines.next() {
        Some(h) => h?.split(',').map(str::to_string).collect(),
        None => return Err(BenchError::Config("empty CSV".into())),
    };
    let mut columns = vec![Vec::new(); header.len()];
    for (n, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(BenchError::Config(format!("CSV row {} has {} fields", n + 2, fields.len())));
        }
        for (c, f) in fields.iter().enumerate() {
            columns[c].push(
                f.parse::<f64>()
                    .map_err(|e| BenchError::Config(format!("CSV row {}: {e}", n + 2)))?,
            );
        }
    }
    Ok(CsvTable { header, columns })
}

/// Recomputes the average error from a scenario CSV.
pub fn avg_error_from_csv<R: BufRead>(r: R) -> Result<f64, BenchError> {
    let t = read_csv(r)?;
    let targets = t
        .triples("target")
        .ok_or_else(|| BenchError::Config("CSV lacks target columns".into()))?;
    let y2 = t
        .triples("y2")
        .ok_or_else(|| BenchError::Config("CSV lacks y2 columns".into()))?;
    Ok(compute_avg_error(&targets, &y2)?.avg_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_offset() {
        let t = vec![[0.3, 0.0, 0.0]; 17];
        let y = vec![[0.0; 3]; 17];
        let s = compute_avg_error(&t, &y).unwrap();
        assert_eq!(s.avg_error, 0.3);
        assert_eq!(s.axis_rms[0], 0.3);
    }

    #[test]
    fn zero_and_half() {
        let z = vec![[1.0, 2.0, 3.0]; 10];
        assert_eq!(compute_avg_error(&z, &z).unwrap().avg_error, 0.0);
        let t: Vec<[f64; 3]> = (0..10).map(|k| if k < 5 { [0.3, 0.0, 0.0] } else { [0.0; 3] }).collect();
        let e = compute_avg_error(&t, &vec![[0.0; 3]; 10]).unwrap().avg_error;
        assert!((e - 0.15).abs() < 1e-15);
    }

    #[test]
    fn empty_is_error() {
        assert!(compute_avg_error(&[], &[]).is_err());
        assert!(compute_avg_error(&[[0.0; 3]], &[]).is_err());
    }
}
