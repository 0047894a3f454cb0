use std::path::Path;
use std::process::{Command, Output};

use l1mpc::bench::{
    Assertion, Grid, InnerKind, OuterKind, Scenario, SuiteConfig, WindSetting,
};
use l1mpc::plant::WindModel;

fn l1mpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l1mpc")).args(args).output().unwrap()
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, v: &T) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn small_suite(max: f64) -> SuiteConfig {
    SuiteConfig {
        name: "cli".into(),
        grid: Grid {
            stacks: vec![(OuterKind::Pid, InnerKind::L1)],
            trajectories: vec![1],
            ..Grid::default()
        },
        assertions: vec![Assertion::MaxError {
            stack: "PID-L1".into(),
            max,
        }],
        ..SuiteConfig::default()
    }
}

#[test]
fn lists_the_five_trajectories() {
    let out = l1mpc(&["list-trajectories"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 5);
}

#[test]
fn default_design_meets_the_norm_condition() {
    let out = l1mpc(&["check-norm-condition"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["satisfied"], serde_json::Value::Bool(true));
}

#[test]
fn suite_outcomes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out_s = out_dir.to_str().unwrap();

    let pass = write_json(dir.path(), "pass.json", &small_suite(1.0));
    let out = l1mpc(&["run", "--suite", &pass, "--out", out_s]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary.csv").exists());
    assert!(out_dir.join("assertions.json").exists());

    let fail = write_json(dir.path(), "fail.json", &small_suite(1e-9));
    assert_eq!(l1mpc(&["run", "--suite", &fail, "--out", out_s]).status.code(), Some(1));

    // missing --out, unreadable file, malformed JSON, unknown field
    assert_eq!(l1mpc(&["run", "--suite", &pass]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(
        l1mpc(&["run", "--suite", missing.to_str().unwrap(), "--out", out_s]).status.code(),
        Some(2)
    );
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(l1mpc(&["run", "--suite", bad.to_str().unwrap(), "--out", out_s]).status.code(), Some(2));
    std::fs::write(&bad, r#"{"name":"x","bogus":1}"#).unwrap();
    assert_eq!(l1mpc(&["run", "--suite", bad.to_str().unwrap(), "--out", out_s]).status.code(), Some(2));
}

#[test]
fn scenario_outcomes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let ok = write_json(dir.path(), "ok.json", &Scenario::stack(OuterKind::Mpc, InnerKind::L1, 1));
    let out = l1mpc(&["run", "--scenario", &ok]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8_lossy(&out.stdout);
    assert!(csv.starts_with("t,"));

    let bad_traj = write_json(dir.path(), "bad.json", &Scenario::stack(OuterKind::Mpc, InnerKind::L1, 9));
    assert_eq!(l1mpc(&["run", "--scenario", &bad_traj]).status.code(), Some(2));

    // a finite but absurd wind drives the state to infinity mid-run
    let storm = Scenario::stack(OuterKind::Pid, InnerKind::L1, 1)
        .with_wind(WindSetting::Model(WindModel::constant(1e307, [1.0, 0.0, 0.0])));
    let storm = write_json(dir.path(), "storm.json", &storm);
    let out_dir = dir.path().join("partial");
    let out = l1mpc(&["run", "--scenario", &storm, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // the partial record is still written
    assert_eq!(std::fs::read_dir(&out_dir).unwrap().count(), 2);
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../suites");
    for (name, cells) in [("ranking.json", 15), ("wind.json", 20)] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        let cfg: SuiteConfig = serde_json::from_str(&text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.expand().len(), cells, "{name}");
    }
    let text = std::fs::read_to_string(root.join("straight_line_gust.json")).unwrap();
    let sc: Scenario = serde_json::from_str(&text).unwrap();
    sc.validate().unwrap();
}
