use std::io::BufReader;

use l1mpc::bench::{
    avg_error_from_csv, csv_string, make_trajectory, read_csv, run_scenario, run_suite,
    write_suite_outputs, Assertion, Grid, InnerKind, OuterKind, Scenario, SuiteConfig,
    SuiteOptions, TrajectoryParams, WindPreset, WindSetting, HOVER_SECONDS,
};
use l1mpc::plant::{Region, WindModel};

const STACKS: [(OuterKind, InnerKind); 4] = [
    (OuterKind::Pid, InnerKind::L1),
    (OuterKind::Lqr, InnerKind::L1),
    (OuterKind::Mpc, InnerKind::Pid),
    (OuterKind::Mpc, InnerKind::L1),
];

/// Every stack on every trajectory without wind: the hover segment is held
/// within 2 cm and the metric recomputed from the CSV matches bit for bit.
#[test]
fn hover_prefix_and_csv_recomputation() {
    for (outer, inner) in STACKS {
        for t in 1..=5 {
            let res = run_scenario(&Scenario::stack(outer, inner, t)).unwrap();
            let hover = (HOVER_SECONDS / res.scenario.sample_period).round() as usize;
            for k in 0..hover {
                let e: f64 = (0..3)
                    .map(|i| (res.targets[k][i] - res.y2[k][i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(e <= 0.02, "{} sample {k}: {e}", res.key);
            }
            let csv = csv_string(&res);
            let e = avg_error_from_csv(BufReader::new(csv.as_bytes())).unwrap();
            assert_eq!(e.to_bits(), res.avg_error().to_bits(), "{}", res.key);
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let noisy = Scenario {
        seed: 9,
        position_noise: 0.003,
        wind: WindSetting::Model(WindModel::turbulent(1.0, [0.0, 1.0, 0.0], 0.5, 3)),
        ..Scenario::stack(OuterKind::Mpc, InnerKind::Pid, 3)
    };
    for sc in [noisy, Scenario::stack(OuterKind::Mpc, InnerKind::L1, 2).with_wind(WindSetting::Preset(WindPreset::Gust))] {
        let a = csv_string(&run_scenario(&sc).unwrap());
        let b = csv_string(&run_scenario(&sc).unwrap());
        assert!(a == b, "{}", sc.key());
    }
}

#[test]
fn empty_wind_window_equals_no_wind() {
    for (outer, inner) in [(OuterKind::Mpc, InnerKind::L1), (OuterKind::Pid, InnerKind::L1)] {
        let off = Scenario::stack(outer, inner, 1);
        let traj = off.make_trajectory().unwrap();
        let gust = l1mpc::bench::default_gust(&traj).with_window(4.0, 4.0);
        let closed = off.clone().with_wind(WindSetting::Model(gust));
        assert_eq!(
            csv_string(&run_scenario(&off).unwrap()),
            csv_string(&run_scenario(&closed).unwrap())
        );
    }
}

#[test]
fn wind_is_logged_only_inside_window_and_region() {
    let sc = Scenario::stack(OuterKind::Mpc, InnerKind::L1, 2);
    let traj = sc.make_trajectory().unwrap();
    let k = traj.midpoint();
    let region = Region::around(traj.positions[k], 1.0, true);
    let (t_on, t_off) = (traj.time(k) - 1.0, traj.time(k) + 0.5);
    let wind = WindModel::gust(1.5, [1.0, 0.0, 0.0], region).with_window(t_on, t_off);
    let res = run_scenario(&sc.with_wind(WindSetting::Model(wind))).unwrap();
    let ts = res.scenario.sample_period;
    // the logged force acts over [t, t + Ts); allow for the motion within it
    let margin = 2.0 * ts;
    let inside = |p: &[f64; 3], pad: f64| {
        (0..3).all(|i| p[i] >= region.min[i] - pad && p[i] <= region.max[i] + pad)
    };
    let mut active = 0;
    for k in 0..res.len() {
        let t = res.times[k];
        let p = &res.y2[k];
        let on = res.wind[k] != [0.0; 3];
        if on {
            active += 1;
            assert!(t >= t_on - ts - 1e-9 && t < t_off + 1e-9, "force at t={t}");
            assert!(inside(p, margin), "force outside the region at t={t}");
        } else if t >= t_on && t + ts <= t_off {
            assert!(!inside(p, -margin), "no force inside window and region at t={t}");
        }
    }
    assert!(active > 0);
}

#[test]
fn tracking_beats_hovering_in_place() {
    let res = run_scenario(&Scenario::stack(OuterKind::Mpc, InnerKind::L1, 1)).unwrap();
    let traj = make_trajectory(1, &TrajectoryParams::default()).unwrap();
    let start = traj.positions[0];
    let hover_only = traj
        .positions
        .iter()
        .map(|p| (0..3).map(|i| (p[i] - start[i]).powi(2)).sum::<f64>().sqrt())
        .sum::<f64>()
        / traj.len() as f64;
    assert!(res.avg_error().is_finite());
    assert!(res.avg_error() < hover_only, "{} vs {hover_only}", res.avg_error());
}

#[test]
fn grid_layouts() {
    let ranking = SuiteConfig {
        grid: Grid {
            stacks: vec![
                (OuterKind::Pid, InnerKind::L1),
                (OuterKind::Lqr, InnerKind::L1),
                (OuterKind::Mpc, InnerKind::L1),
            ],
            ..Grid::default()
        },
        ..SuiteConfig::default()
    };
    assert_eq!(ranking.expand().len(), 15);
    let wind = SuiteConfig {
        grid: Grid {
            stacks: vec![(OuterKind::Mpc, InnerKind::Pid), (OuterKind::Mpc, InnerKind::L1)],
            winds: vec![WindSetting::Preset(WindPreset::Off), WindSetting::Preset(WindPreset::Gust)],
            ..Grid::default()
        },
        ..SuiteConfig::default()
    };
    assert_eq!(wind.expand().len(), 20);
    wind.validate().unwrap();
}

#[test]
fn empty_suite_writes_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(&SuiteConfig::default(), &SuiteOptions::default()).unwrap();
    assert!(report.summary.is_empty() && report.all_passed());
    write_suite_outputs(&report, dir.path()).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn small_suite_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SuiteConfig {
        name: "small".into(),
        grid: Grid {
            stacks: vec![(OuterKind::Pid, InnerKind::L1), (OuterKind::Mpc, InnerKind::L1)],
            trajectories: vec![1, 2],
            ..Grid::default()
        },
        assertions: vec![
            Assertion::ReferenceAccel { tolerance: 1e-9 },
            Assertion::MaxError {
                stack: "MPC-L1".into(),
                max: 0.05,
            },
            Assertion::MaxError {
                stack: "PID-L1".into(),
                max: 1e-9,
            },
        ],
        ..SuiteConfig::default()
    };
    let report = run_suite(&cfg, &SuiteOptions { jobs: Some(1), seed: Some(4) }).unwrap();
    assert_eq!(report.summary.len(), 4);
    assert!(report.failures.is_empty());
    let passed: Vec<bool> = report.assertions.iter().map(|a| a.passed).collect();
    assert_eq!(passed, vec![true, true, false]);
    assert!(!report.all_passed());

    write_suite_outputs(&report, dir.path()).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    for row in &report.summary {
        let path = dir.path().join("scenarios").join(format!("{}.csv", row.key));
        let table = read_csv(BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
        assert!(table.column("t").is_some());
        let e = avg_error_from_csv(BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
        assert_eq!(Some(e), row.avg_error);
        assert!(dir.path().join("scenarios").join(format!("{}.json", row.key)).exists());
    }
    let report_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("assertions.json")).unwrap()).unwrap();
    assert_eq!(report_json["passed"], serde_json::Value::Bool(false));
    assert_eq!(report_json["assertions"].as_array().map(|a| a.len()), Some(3));
}
