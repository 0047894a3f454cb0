use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use l1mpc::bench::{
    self, run_norm_check, run_scenario_traced, run_suite, tuning, write_csv, write_suite_outputs,
    BenchError, NormCheckConfig, Scenario, SuiteConfig, SuiteOptions, TrajectoryParams,
};

#[derive(Parser)]
#[command(name = "l1mpc", version, about = "L1 adaptive MPC simulation bench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite or a single scenario.
    Run {
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        suite: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Output directory (required for suites; single scenarios print CSV to stdout without it).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the trajectory library.
    ListTrajectories,
    /// Check the L1-norm stability condition for an L1 design.
    CheckNormCondition {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Coordinate-descent tuning of the baseline gains (outer PID, LQR, MPC-PID inner PID).
    Tune {
        /// Base scenario whose plant and controller settings are used.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long, default_value_t = tuning::TUNING_ITERATIONS)]
        iterations: usize,
        /// Tune only these controllers (default: all).
        #[arg(long, value_enum, value_delimiter = ',')]
        only: Vec<Tunable>,
    },
}

#[derive(Clone, Copy, PartialEq, clap::ValueEnum)]
enum Tunable {
    OuterPid,
    Lqr,
    InnerPid,
}

const EXIT_ASSERTION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

enum Failure {
    Config(String),
    Runtime(String),
    Assertion(String),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn io_err(e: io::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            suite: Some(suite),
            out,
            jobs,
            seed,
            ..
        } => run_suite_cmd(&suite, out, jobs, seed),
        Command::Run {
            scenario: Some(sc),
            out,
            seed,
            ..
        } => run_scenario_cmd(&sc, out, seed),
        Command::Run { .. } => Err(Failure::Config("pass --suite or --scenario".into())),
        Command::ListTrajectories => list_trajectories(),
        Command::CheckNormCondition { config } => check_norm(config),
        Command::Tune {
            base,
            iterations,
            only,
        } => tune(base, iterations, &only),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(m)) => {
            eprintln!("assertion failed: {m}");
            ExitCode::from(EXIT_ASSERTION)
        }
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("runtime error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn run_suite_cmd(
    path: &Path,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let out = out.ok_or_else(|| Failure::Config("--out is required with --suite".into()))?;
    let cfg: SuiteConfig = read_json(path)?;
    let report = run_suite(&cfg, &SuiteOptions { jobs, seed })?;
    write_suite_outputs(&report, &out)?;
    for row in &report.summary {
        match row.avg_error {
            Some(e) => println!("{:<40} {e:.5}", row.key),
            None => println!("{:<40} {}", row.key, row.status),
        }
    }
    for a in &report.assertions {
        println!("[{}] {}", if a.passed { "PASS" } else { "FAIL" }, a.detail);
    }
    if !report.failures.is_empty() {
        let keys: Vec<_> = report.failures.iter().map(|(k, _)| k.as_str()).collect();
        return Err(Failure::Runtime(format!("failed scenarios: {}", keys.join(", "))));
    }
    if !report.all_passed() {
        let n = report.assertions.iter().filter(|a| !a.passed).count();
        return Err(Failure::Assertion(format!(
            "{n} of {} suite assertions failed",
            report.assertions.len()
        )));
    }
    Ok(())
}

fn run_scenario_cmd(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Failure> {
    let mut sc: Scenario = read_json(path)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    sc.validate()?;
    let (res, failure) = match run_scenario_traced(&sc) {
        Ok(r) => (r, None),
        Err(f) => (*f.partial, Some(format!("step {}: {}", f.step, f.message))),
    };
    match &out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err)?;
            let file = fs::File::create(dir.join(format!("{}.csv", res.key))).map_err(io_err)?;
            write_csv(&res, io::BufWriter::new(file)).map_err(io_err)?;
            let header = serde_json::json!({
                "key": res.key,
                "stack": res.label,
                "scenario": res.scenario,
                "stats": res.stats,
                "diagnostics": res.diagnostics,
                "samples": res.len(),
            });
            fs::write(
                dir.join(format!("{}.json", res.key)),
                serde_json::to_string_pretty(&header).map_err(|e| Failure::Runtime(e.to_string()))?,
            )
            .map_err(io_err)?;
        }
        None => {
            let stdout = io::stdout();
            write_csv(&res, stdout.lock()).map_err(io_err)?;
        }
    }
    if let Some(m) = failure {
        return Err(Failure::Runtime(m));
    }
    eprintln!("{}: e = {:.5} m over {} samples", res.key, res.avg_error(), res.len());
    Ok(())
}

fn list_trajectories() -> Result<(), Failure> {
    let params = TrajectoryParams::default();
    let mut out = io::stdout().lock();
    for info in bench::LIBRARY.iter() {
        let t = bench::make_trajectory(info.id, &params)?;
        writeln!(
            out,
            "{}  {:<12} {:>6.2} s  max speed {:.2} m/s  {}",
            info.id,
            info.name,
            t.duration(),
            t.max_speed(),
            info.description
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn check_norm(config: Option<PathBuf>) -> Result<(), Failure> {
    let cfg: NormCheckConfig = match config {
        Some(p) => read_json(&p)?,
        None => NormCheckConfig::default(),
    };
    let outcome = run_norm_check(&cfg)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&outcome).map_err(|e| Failure::Runtime(e.to_string()))?
    );
    if outcome.satisfied {
        Ok(())
    } else {
        Err(Failure::Assertion("L1-norm condition not satisfied".into()))
    }
}

fn tune(base: Option<PathBuf>, iterations: usize, only: &[Tunable]) -> Result<(), Failure> {
    let base: Scenario = match base {
        Some(p) => read_json(&p)?,
        None => Scenario::default(),
    };
    base.validate()?;
    let wanted = |t: Tunable| only.is_empty() || only.contains(&t);
    let entry = |config: serde_json::Value, res: &tuning::TuningResult| {
        serde_json::json!({ "config": config, "error": res.cost, "evaluations": res.evaluations })
    };
    let mut report = serde_json::json!({
        "iterations": iterations,
        "inner_pid_trajectory": tuning::TUNING_TRAJECTORY,
    });
    if wanted(Tunable::OuterPid) {
        let (pid, res) = tuning::tune_outer_pid(&base, iterations);
        report["outer_pid"] = entry(serde_json::json!(pid), &res);
    }
    if wanted(Tunable::Lqr) {
        let (lqr, res) = tuning::tune_lqr(&base, iterations);
        report["lqr"] = entry(serde_json::json!(lqr), &res);
    }
    if wanted(Tunable::InnerPid) {
        let (inner, res) = tuning::tune_inner_pid(&base, iterations);
        report["inner_pid"] = entry(serde_json::json!(inner), &res);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?
    );
    Ok(())
}
