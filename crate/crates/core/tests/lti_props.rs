mod common;

use common::{random_matrix, random_stable, rng};
use l1mpc::lti::{
    discretize_zoh, feedback, l1_norm, parallel, series, L1NormOptions, LtiRunner, LtiSystem,
    TransferFunction,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn zoh_preserves_stability_and_maps_eigenvalues() {
    let mut r = rng(1);
    for _ in 0..1000 {
        let sys = random_stable(&mut r, 4, 1, 1);
        let step = 10f64.powf(r.random_range(-3.0..0.5));
        let d = discretize_zoh(&sys, step).unwrap();
        assert!(d.spectral_radius() < 1.0, "radius {}", d.spectral_radius());
        // z = exp(s step): every continuous eigenvalue has a discrete partner
        let dz = d.eigenvalues();
        for s in sys.eigenvalues() {
            let z = (s * step).exp();
            let near = dz.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(near < 1e-6, "eigenvalue {s} step {step}: {near}");
        }
    }
}

/// `k * prod p_i / (s + p_i)`: a cascade of positive lags has a nonnegative
/// impulse response, so its L1 norm equals its DC gain.
fn positive_cascade(poles: &[f64], k: f64) -> LtiSystem {
    let mut tf = TransferFunction::constant(k);
    for &p in poles {
        tf = tf.mul(&TransferFunction::new(vec![p], vec![1.0, p]).unwrap());
    }
    tf.to_system().unwrap()
}

#[test]
fn norm_bounds_dc_gain_with_equality_for_nonnegative_responses() {
    let mut r = rng(2);
    for _ in 0..100 {
        let sys = random_stable(&mut r, 4, 1, 1);
        let n = l1_norm(&sys, L1NormOptions::default()).unwrap();
        let dc = sys.dc_gain()[(0, 0)].abs();
        assert!(n.value >= dc * (1.0 - 1e-6) - 1e-9, "{} < {dc}", n.value);

        let poles: Vec<f64> = (0..r.random_range(1..=4))
            .map(|_| r.random_range(0.2..20.0))
            .collect();
        let k = r.random_range(0.1..5.0);
        let casc = positive_cascade(&poles, k);
        let n = l1_norm(&casc, L1NormOptions::default()).unwrap();
        assert!((n.value - k).abs() <= 1e-4 * k, "{} vs {k} for {poles:?}", n.value);
    }
}

#[test]
fn norm_is_homogeneous() {
    let mut r = rng(3);
    for _ in 0..100 {
        let sys = random_stable(&mut r, 4, 1, 1);
        let k = r.random_range(-5.0..5.0);
        let a = l1_norm(&sys, L1NormOptions::default()).unwrap().value;
        let b = l1_norm(&sys.scaled(k), L1NormOptions::default()).unwrap().value;
        assert!((b - k.abs() * a).abs() <= 1e-6 * (k.abs() * a).max(1e-12), "{b} vs {}", k.abs() * a);
    }
}

#[test]
fn bandpass_norm_is_two_over_e() {
    let g = TransferFunction::new(vec![1.0, 0.0], vec![1.0, 2.0, 1.0]).unwrap();
    let n = l1_norm(&g.to_system().unwrap(), L1NormOptions::default()).unwrap();
    assert!((n.value - 2.0 / std::f64::consts::E).abs() < 1e-4);
    // fine-grid oracle on the closed-form impulse response (1 - t) e^-t
    let h = 1e-4;
    let oracle: f64 = (0..400_000)
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            ((1.0 - t) * (-t).exp()).abs() * h
        })
        .sum();
    assert!((n.value - oracle).abs() < 1e-4);
}

fn rel_close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn composition_matches_pointwise_algebra(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_stable(&mut r, 3, 1, 1);
        let b = random_stable(&mut r, 3, 1, 1);
        let s = series(&a, &b).unwrap();
        let p = parallel(&a, &b).unwrap();
        let f = feedback(&a, &b).unwrap();
        for i in 0..20 {
            let w = 10f64.powf(-2.0 + 4.0 * i as f64 / 19.0);
            let (ga, gb) = (a.frequency_response(w)[(0, 0)], b.frequency_response(w)[(0, 0)]);
            prop_assert!(rel_close(s.frequency_response(w)[(0, 0)], ga * gb, 1e-8));
            prop_assert!(rel_close(p.frequency_response(w)[(0, 0)], ga + gb, 1e-8));
            prop_assert!(rel_close(f.frequency_response(w)[(0, 0)], ga / (1.0 + ga * gb), 1e-8));
        }
    }

    #[test]
    fn runner_equals_convolution(seed in any::<u64>(), len in 1usize..=50) {
        let mut r = rng(seed);
        let (m, p) = (r.random_range(1..=2), r.random_range(1..=2));
        let n = r.random_range(1..=4);
        let sys = LtiSystem::new(
            random_matrix(&mut r, n, n, 0.6),
            random_matrix(&mut r, n, m, 1.0),
            random_matrix(&mut r, p, n, 1.0),
            random_matrix(&mut r, p, m, 1.0),
            l1mpc::lti::Domain::Discrete { step: 0.1 },
        )
        .unwrap();
        let u: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..m).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        // h[0] = C B + D, h[i] = C A^i B
        let mut markov = vec![sys.c() * sys.b() + sys.d()];
        let mut ab = sys.b().clone();
        for _ in 1..len {
            ab = sys.a() * ab;
            markov.push(sys.c() * &ab);
        }
        let mut runner = LtiRunner::new(sys.clone()).unwrap();
        for k in 0..len {
            let y = runner.step(&u[k]).unwrap();
            let mut want = DMatrix::<f64>::zeros(p, 1);
            for j in 0..=k {
                want += &markov[k - j] * DMatrix::from_column_slice(m, 1, &u[j]);
            }
            for i in 0..p {
                prop_assert!((y[i] - want[(i, 0)]).abs() <= 1e-10 * want[(i, 0)].abs().max(1.0));
            }
        }
    }
}
