use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{run_scenario_traced, write_csv, ErrorStats, RunDiagnostics, ScenarioResult};
use super::scenario::{InnerKind, OuterKind, Scenario, WindPreset, WindSetting};
use super::BenchError;

/// Cartesian product of stacks, trajectories and wind settings applied to
/// the suite's base scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub stacks: Vec<(OuterKind, InnerKind)>,
    pub trajectories: Vec<u8>,
    pub winds: Vec<WindSetting>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            stacks: Vec::new(),
            trajectories: vec![1, 2, 3, 4, 5],
            winds: vec![WindSetting::Preset(WindPreset::Off)],
        }
    }
}

/// Checks evaluated over the suite's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assertion {
    /// On every trajectory, `better` beats each of `worse` by at least
    /// `margin` relative to the worse stack's error.
    Ranking {
        better: String,
        worse: Vec<String>,
        margin: f64,
        #[serde(default = "off_label")]
        wind: String,
    },
    /// Mean over trajectories of `e(gust) - e(off)` for `robust` is at most
    /// `ratio` times that of `reference`.
    WindRobustness {
        robust: String,
        reference: String,
        ratio: f64,
        #[serde(default = "gust_label")]
        wind: String,
    },
    /// Every MPC reference sequence respects its second-difference bound.
    ReferenceAccel {
        #[serde(default = "default_accel_tol")]
        tolerance: f64,
    },
    /// Every cell of `stack` stays below `max` average error.
    MaxError { stack: String, max: f64 },
}

fn off_label() -> String {
    "off".into()
}
fn gust_label() -> String {
    "gust".into()
}
fn default_accel_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    pub base: Scenario,
    pub grid: Grid,
    /// Explicit scenarios in addition to the grid.
    pub scenarios: Vec<Scenario>,
    pub assertions: Vec<Assertion>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            name: "suite".into(),
            base: Scenario::default(),
            grid: Grid {
                stacks: Vec::new(),
                ..Grid::default()
            },
            scenarios: Vec::new(),
            assertions: Vec::new(),
        }
    }
}

impl SuiteConfig {
    /// All scenarios of the suite, in key order.
    pub fn expand(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for &(outer, inner) in &self.grid.stacks {
            for &t in &self.grid.trajectories {
                for w in &self.grid.winds {
                    out.push(Scenario {
                        outer,
                        inner,
                        trajectory: t,
                        wind: w.clone(),
                        ..self.base.clone()
                    });
                }
            }
        }
        out.extend(self.scenarios.iter().cloned());
        out.sort_by_key(|s| s.key());
        out
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let scenarios = self.expand();
        let mut seen = std::collections::HashSet::new();
        for sc in &scenarios {
            sc.validate()
                .map_err(|e| BenchError::Config(format!("scenario {}: {e}", sc.key())))?;
            if !seen.insert(sc.key()) {
                return Err(BenchError::Config(format!(
                    "duplicate scenario key {} (give explicit scenarios a name)",
                    sc.key()
                )));
            }
        }
        for a in &self.assertions {
            match a {
                Assertion::Ranking { margin, .. } if !(0.0..1.0).contains(margin) => {
                    return Err(BenchError::Config("ranking margin must be in [0, 1)".into()))
                }
                Assertion::WindRobustness { ratio, .. } if !(*ratio > 0.0) => {
                    return Err(BenchError::Config("wind robustness ratio must be positive".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Overrides every scenario's seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub key: String,
    pub stack: String,
    pub trajectory: u8,
    pub wind: String,
    pub avg_error: Option<f64>,
    pub axis_rms: Option<[f64; 3]>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub assertion: Assertion,
    pub passed: bool,
    pub detail: String,
}

pub struct SuiteReport {
    pub name: String,
    pub results: Vec<ScenarioResult>,
    /// Failed cells: key and message; partial traces are kept in `partials`.
    pub failures: Vec<(String, String)>,
    pub partials: Vec<ScenarioResult>,
    pub summary: Vec<SummaryRow>,
    pub assertions: Vec<AssertionOutcome>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    /// Average error of a cell, if it ran.
    pub fn error_of(&self, stack: &str, trajectory: u8, wind: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.stack == stack && r.trajectory == trajectory && r.wind == wind)
            .and_then(|r| r.avg_error)
    }
}

/// Runs every scenario (in parallel), then evaluates the assertions.
/// Failed cells are reported and do not stop the suite.
pub fn run_suite(cfg: &SuiteConfig, opts: &SuiteOptions) -> Result<SuiteReport, BenchError> {
    cfg.validate()?;
    let mut scenarios = cfg.expand();
    if let Some(seed) = opts.seed {
        for s in &mut scenarios {
            s.seed = seed;
        }
    }
    let work = || -> Vec<_> { scenarios.par_iter().map(run_scenario_traced).collect() };
    let outcomes = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut partials = Vec::new();
    let mut summary = Vec::new();
    for (sc, outcome) in scenarios.iter().zip(outcomes) {
        match outcome {
            Ok(r) => {
                summary.push(SummaryRow {
                    key: r.key.clone(),
                    stack: r.label.clone(),
                    trajectory: sc.trajectory,
                    wind: sc.wind_label(),
                    avg_error: Some(r.stats.avg_error),
                    axis_rms: Some(r.stats.axis_rms),
                    status: "ok".into(),
                });
                results.push(r);
            }
            Err(f) => {
                summary.push(SummaryRow {
                    key: sc.key(),
                    stack: sc.label(),
                    trajectory: sc.trajectory,
                    wind: sc.wind_label(),
                    avg_error: None,
                    axis_rms: None,
                    status: format!("failed at step {}: {}", f.step, f.message),
                });
                failures.push((sc.key(), f.message));
                partials.push(*f.partial);
            }
        }
    }
    let assertions = cfg
        .assertions
        .iter()
        .map(|a| evaluate(a, &summary, &results))
        .collect();
    Ok(SuiteReport {
        name: cfg.name.clone(),
        results,
        failures,
        partials,
        summary,
        assertions,
    })
}

fn cell_map(summary: &[SummaryRow]) -> BTreeMap<(String, u8, String), Option<f64>> {
    summary
        .iter()
        .map(|r| ((r.stack.clone(), r.trajectory, r.wind.clone()), r.avg_error))
        .collect()
}

fn evaluate(a: &Assertion, summary: &[SummaryRow], results: &[ScenarioResult]) -> AssertionOutcome {
    let cells = cell_map(summary);
    let trajectories: Vec<u8> = {
        let mut t: Vec<u8> = summary.iter().map(|r| r.trajectory).collect();
        t.sort();
        t.dedup();
        t
    };
    let outcome = |passed: bool, detail: String| AssertionOutcome {
        assertion: a.clone(),
        passed,
        detail,
    };
    match a {
        Assertion::Ranking {
            better,
            worse,
            margin,
            wind,
        } => {
            let mut lines = Vec::new();
            let mut ok = true;
            let mut compared = 0;
            for &t in &trajectories {
                let Some(eb) = cells.get(&(better.clone(), t, wind.clone())) else {
                    continue;
                };
                for w in worse {
                    let Some(ew) = cells.get(&(w.clone(), t, wind.clone())) else {
                        continue;
                    };
                    compared += 1;
                    match (eb, ew) {
                        (Some(eb), Some(ew)) => {
                            let rel = (ew - eb) / ew;
                            let pass = rel >= *margin;
                            ok &= pass;
                            lines.push(format!(
                                "t{t}: {better} {eb:.4} vs {w} {ew:.4} ({:+.1}%){}",
                                100.0 * rel,
                                if pass { "" } else { " FAIL" }
                            ));
                        }
                        _ => {
                            ok = false;
                            lines.push(format!("t{t}: {better} or {w} did not run"));
                        }
                    }
                }
            }
            if compared == 0 {
                return outcome(false, "no comparable cells".into());
            }
            outcome(ok, lines.join("; "))
        }
        Assertion::WindRobustness {
            robust,
            reference,
            ratio,
            wind,
        } => {
            let delta = |stack: &str| -> Option<f64> {
                let mut sum = 0.0;
                let mut n = 0;
                for &t in &trajectories {
                    let on = cells.get(&(stack.to_string(), t, wind.clone()))?;
                    let off = cells.get(&(stack.to_string(), t, "off".to_string()))?;
                    sum += (*on)? - (*off)?;
                    n += 1;
                }
                (n > 0).then(|| sum / n as f64)
            };
            match (delta(robust), delta(reference)) {
                (Some(dr), Some(dref)) => outcome(
                    dr <= ratio * dref,
                    format!("mean increase {robust} {dr:.4} vs {reference} {dref:.4} (limit {:.4})", ratio * dref),
                ),
                _ => outcome(false, "missing cells for wind comparison".into()),
            }
        }
        Assertion::ReferenceAccel { tolerance } => {
            let mut worst = 0.0f64;
            let mut ok = true;
            let mut checked = 0;
            for r in results.iter().filter(|r| r.scenario.outer == OuterKind::Mpc) {
                let bound = r.scenario.mpc.r_max;
                if bound.is_infinite() {
                    continue;
                }
                checked += 1;
                let ts2 = r.scenario.sample_period.powi(2);
                let mut peak = r.diagnostics.max_reference_accel;
                for w in r.r2.windows(3) {
                    for i in 0..3 {
                        peak = peak.max((w[2][i] - 2.0 * w[1][i] + w[0][i]).abs() / ts2);
                    }
                }
                worst = worst.max(peak - bound);
                ok &= peak <= bound + tolerance;
            }
            outcome(
                ok,
                format!("{checked} MPC runs checked; worst excess over r_max {worst:.3e}"),
            )
        }
        Assertion::MaxError { stack, max } => {
            let mut ok = true;
            let mut worst: f64 = 0.0;
            let mut n = 0;
            for ((s, _, _), e) in &cells {
                if s == stack {
                    n += 1;
                    match e {
                        Some(e) => {
                            worst = worst.max(*e);
                            ok &= *e <= *max;
                        }
                        None => ok = false,
                    }
                }
            }
            outcome(ok && n > 0, format!("{n} cells, worst {worst:.4} (limit {max})"))
        }
    }
}

#[derive(Serialize)]
struct ScenarioHeader<'a> {
    key: &'a str,
    stack: &'a str,
    scenario: &'a Scenario,
    stats: &'a ErrorStats,
    diagnostics: &'a RunDiagnostics,
    samples: usize,
}

/// Writes `<out>/scenarios/<key>.csv` and `.json`, `<out>/summary.csv` and
/// `<out>/assertions.json`.
pub fn write_suite_outputs(report: &SuiteReport, out: &Path) -> Result<(), BenchError> {
    let dir = out.join("scenarios");
    fs::create_dir_all(&dir)?;
    for r in report.results.iter().chain(&report.partials) {
        let f = fs::File::create(dir.join(format!("{}.csv", r.key)))?;
        write_csv(r, BufWriter::new(f))?;
        let header = ScenarioHeader {
            key: &r.key,
            stack: &r.label,
            scenario: &r.scenario,
            stats: &r.stats,
            diagnostics: &r.diagnostics,
            samples: r.len(),
        };
        fs::write(
            dir.join(format!("{}.json", r.key)),
            serde_json::to_string_pretty(&header)?,
        )?;
    }
    let mut csv = String::from("key,stack,trajectory,wind,avg_error,rms_x,rms_y,rms_z,status\n");
    for row in &report.summary {
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let rms = row.axis_rms.map(|r| r.map(Some)).unwrap_or([None; 3]);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.key,
            row.stack,
            row.trajectory,
            row.wind,
            num(row.avg_error),
            num(rms[0]),
            num(rms[1]),
            num(rms[2]),
            row.status.replace(',', ";")
        ));
    }
    fs::write(out.join("summary.csv"), csv)?;
    #[derive(Serialize)]
    struct Report<'a> {
        suite: &'a str,
        passed: bool,
        assertions: &'a [AssertionOutcome],
        failures: &'a [(String, String)],
    }
    fs::write(
        out.join("assertions.json"),
        serde_json::to_string_pretty(&Report {
            suite: &report.name,
            passed: report.all_passed(),
            assertions: &report.assertions,
            failures: &report.failures,
        })?,
    )?;
    Ok(())
}
