use gdsde::oracles::*;
use proptest::prelude::*;

/// Plain 30-term power series for J1, independent of the library's double-double code.
fn j1_power_series(u: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = u / 2.0;
    for j in 0..30 {
        sum += term;
        let jf = j as f64;
        term *= -(u * u / 4.0) / ((jf + 1.0) * (jf + 2.0));
    }
    sum
}

// High-precision reference values (50-digit arithmetic).
const J1_2: f64 = 0.576_724_807_756_873_4;
const Y1_2: f64 = -0.107_032_431_540_937_55;
const J1_20: f64 = 0.066_833_124_175_850_05;
const Y1_20: f64 = -0.165_511_614_362_521_3;
const J1_HALF: f64 = 0.242_268_457_674_873_9;
const Y1_HALF: f64 = -1.471_472_392_670_243;
const Y1_10: f64 = 0.249_015_424_206_953_9;

#[test]
fn j1_small_and_zero() {
    assert_eq!(bessel_j1(0.0), 0.0);
    assert!((bessel_j1(1e-6) - 5e-7).abs() < 1e-13);
}

#[test]
fn j1_matches_series_oracle_and_reference() {
    assert!((bessel_j1(2.0) - j1_power_series(2.0)).abs() < 1e-12);
    assert!((bessel_j1(2.0) - J1_2).abs() < 1e-15);
    assert!((bessel_j1(0.5) - J1_HALF).abs() < 1e-15);
    assert!((bessel_j1(20.0) - J1_20).abs() < 1e-14);
}

#[test]
fn y1_reference_values() {
    assert!((bessel_y1(2.0).unwrap() - Y1_2).abs() < 1e-10);
    assert!((bessel_y1(0.5).unwrap() - Y1_HALF).abs() < 1e-14);
    assert!((bessel_y1(10.0).unwrap() - Y1_10).abs() < 1e-13);
    assert!((bessel_y1(20.0).unwrap() - Y1_20).abs() < 1e-13);
}

#[test]
fn y1_rejects_zero_and_has_log_limit() {
    assert!(matches!(bessel_y1(0.0), Err(gdsde::Error::Singularity(_))));
    let u = 1e-6;
    assert!((u * bessel_y1(u).unwrap() + 2.0 / std::f64::consts::PI).abs() < 1e-6);
}

#[test]
fn wronskian_identity() {
    // fourth-order central differences
    let d = |f: &dyn Fn(f64) -> f64, u: f64| {
        let h = 1e-3;
        (f(u - 2.0 * h) - 8.0 * f(u - h) + 8.0 * f(u + h) - f(u + 2.0 * h)) / (12.0 * h)
    };
    let y1 = |u: f64| bessel_y1(u).unwrap();
    for &u in &[0.5, 2.0, 10.0] {
        let dj = d(&bessel_j1, u);
        let dy = d(&y1, u);
        let w = bessel_j1(u) * dy - dj * bessel_y1(u).unwrap();
        assert!((w - 2.0 / (std::f64::consts::PI * u)).abs() < 1e-10, "u={u}: {w}");
    }
}

#[test]
fn crossover_is_continuous() {
    let below = bessel_j1(SERIES_LIMIT);
    let above = bessel_j1(SERIES_LIMIT * (1.0 + f64::EPSILON));
    assert!((below - above).abs() <= 1e-10);
    let yb = bessel_y1(SERIES_LIMIT).unwrap();
    let ya = bessel_y1(SERIES_LIMIT * (1.0 + f64::EPSILON)).unwrap();
    assert!((yb - ya).abs() <= 1e-10);
}

#[test]
fn exp_decay_values() {
    assert_eq!(exp_decay_path(&[0.0, 1.0], &[1.0, 2.0], 0.0).unwrap(), vec![1.0, 2.0]);
    let x = exp_decay_path(&[0.0, 1.0], &[1.0, 2.0], 1.0).unwrap();
    let e = (-1.0f64).exp();
    assert!((x[0] - e).abs() < 1e-15 && (x[1] - 1.0 - e).abs() < 1e-15);
    let x = exp_decay_path(&[0.0, 1.0], &[1.0, 2.0], 50.0).unwrap();
    assert!(x[0].abs() < 1e-20 && (x[1] - 1.0).abs() < 1e-15);
}

#[test]
fn exp_decay_solves_gradient_flow() {
    let h = 1e-5;
    for &t in &[0.3, 1.0, 4.0] {
        let a = exp_decay_path(&[0.0], &[1.0], t + h).unwrap()[0];
        let b = exp_decay_path(&[0.0], &[1.0], t - h).unwrap()[0];
        let x = exp_decay_path(&[0.0], &[1.0], t).unwrap()[0];
        assert!(((a - b) / (2.0 * h) + x).abs() < 1e-6);
    }
}

#[test]
fn bessel_path_values() {
    assert_eq!(bessel_path(&[0.0], &[1.0], 0.0).unwrap(), vec![1.0]);
    assert!((bessel_path(&[0.0], &[1.0], 2.0).unwrap()[0] - J1_2).abs() < 1e-15);
}

#[test]
fn bessel_path_envelope_decays_like_t_pow_three_halves() {
    // peak |X - theta| over one period around t, compared with t^{-3/2}
    let env = |t: f64| (0..400).map(|i| bessel_path(&[0.0], &[1.0], t + i as f64 * 0.02).unwrap()[0].abs()).fold(0.0, f64::max);
    let ratio = env(20.0) / env(80.0);
    let want = (80.0f64 / 20.0).powf(1.5);
    assert!((ratio / want - 1.0).abs() < 0.3, "ratio {ratio} vs {want}");
}

#[test]
fn bessel_path_solves_accelerated_flow() {
    let h = 1e-4;
    let x = |t: f64| bessel_path(&[0.0], &[1.0], t).unwrap()[0];
    let mut t = 0.5;
    while t <= 10.0 {
        let xd = (x(t + h) - x(t - h)) / (2.0 * h);
        let xdd = (x(t + h) - 2.0 * x(t) + x(t - h)) / (h * h);
        assert!((xdd + 3.0 / t * xd + x(t)).abs() < 1e-4, "t={t}");
        t += 0.25;
    }
}

#[test]
fn ou_variance_values() {
    let v = ou_variance(&[1.0], &[1.0], 1.0).unwrap()[0];
    assert!((v - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-15);
    assert!((v - 0.432_332_358_381_693_6).abs() < 1e-15);
    assert_eq!(ou_variance(&[2.0], &[3.0], 0.0).unwrap()[0], 0.0);
    let inf = ou_variance(&[2.0, 1.0], &[2.0, 1.0], 1e3).unwrap();
    assert!((inf[0] - 1.0).abs() < 1e-15 && (inf[1] - 0.5).abs() < 1e-15);
}

#[test]
fn ou_variance_solves_moment_flow() {
    let (h, s, e) = (1.7, 0.6, 1e-4);
    for &t in &[0.1, 0.5, 2.0] {
        let g = |t| ou_variance(&[h], &[s], t).unwrap()[0];
        let d = (g(t + e) - g(t - e)) / (2.0 * e);
        assert!((d - (-2.0 * h * g(t) + s * s)).abs() < 1e-8);
    }
}

#[test]
fn tensor_flow_closed_form() {
    assert_eq!(tensor_flow_x1sq(1.0, 3.0).unwrap(), 1.0);
    assert!((tensor_flow_x1sq(0.9, 0.0).unwrap() - 0.9).abs() < 1e-15);
    let mut prev = 0.9;
    for i in 1..100 {
        let v = tensor_flow_x1sq(0.9, i as f64 * 0.05).unwrap();
        assert!(v > prev && v <= 1.0);
        prev = v;
    }
    assert!((tensor_flow_x1sq(0.6, 50.0).unwrap() - 1.0).abs() < 1e-12);
    assert!(matches!(tensor_flow_x1sq(0.5, 1.0), Err(gdsde::Error::ParameterDomain(_))));
}

#[test]
fn tensor_flow_exact_variant_solves_the_flow() {
    // y = X1^2 obeys y' = 8 y (2y - 1)(1 - y) on the unit circle
    let e = 1e-5;
    for &t in &[0.05, 0.25, 1.0] {
        let y = tensor_flow_x1sq_exact(0.9, t).unwrap();
        let d = (tensor_flow_x1sq_exact(0.9, t + e).unwrap() - tensor_flow_x1sq_exact(0.9, t - e).unwrap()) / (2.0 * e);
        assert!((d - 8.0 * y * (2.0 * y - 1.0) * (1.0 - y)).abs() < 1e-7);
    }
}

#[test]
fn accel_limit_variance_values() {
    assert_eq!(accel_limit_variance(0.0, 2.0).unwrap().value[0], 0.0);
    assert_eq!(accel_limit_variance(1.0, 0.0).unwrap().value[0], 0.0);
    assert!(accel_limit_variance(1.0, 1e-3).unwrap().value[0] <= 1e-8);
    // small-t expansion: 2 t^3 / 105
    let t = 0.05;
    let v = accel_limit_variance(1.0, t).unwrap().value[0];
    assert!((v / (2.0 * t * t * t / 105.0) - 1.0).abs() < 1e-2);
    // values of the second-moment ODE integrated to high accuracy
    for &(t, want) in &[(0.5, 0.002_336_12), (1.0, 0.017_661_3), (2.0, 0.113_541_6), (5.0, 0.576_568_5)] {
        let r = accel_limit_variance(1.0, t).unwrap();
        assert!((r.value[0] / want - 1.0).abs() < 1e-4, "t={t}: {}", r.value[0]);
        assert!(r.est_error < 1e-8);
    }
    let scaled = accel_limit_variance(0.5, 2.0).unwrap().value[0];
    assert!((scaled / 0.25 - 0.113_541_6).abs() < 1e-5);
}

#[test]
fn accel_limit_variance_grows_with_bounded_rate() {
    let mut prev = 0.0;
    let mut running_max: f64 = 0.0;
    for i in 1..=50 {
        let t = i as f64;
        let v = accel_limit_variance(1.0, t).unwrap().value[0];
        assert!(v <= t, "t={t}: {v}");
        running_max = running_max.max(v);
        assert!(running_max >= prev);
        prev = running_max;
    }
}

#[test]
fn named_evaluation() {
    let r = evaluate_named("bessel_j1", &[2.0]).unwrap();
    assert_eq!(r.method, OracleMethod::Series);
    assert!((r.value[0] - J1_2).abs() < 1e-15);
    assert_eq!(evaluate_named("bessel_j1", &[25.0]).unwrap().method, OracleMethod::Asymptotic);
    assert!(evaluate_named("nope", &[1.0]).is_err());
    assert!(evaluate_named("exp_decay_path", &[0.0, 1.0]).is_err());
    assert_eq!(evaluate_named("exp_decay_path", &[0.0, 1.0, 0.0]).unwrap().value, vec![1.0]);
}

proptest! {
    #[test]
    fn j1_agrees_with_plain_series_for_small_u(u in 0.0f64..8.0) {
        prop_assert!((bessel_j1(u) - j1_power_series(u)).abs() < 1e-13);
    }

    #[test]
    fn j1_is_bounded(u in 0.0f64..200.0) {
        prop_assert!(bessel_j1(u).abs() <= 0.6);
    }

    #[test]
    fn wronskian_holds_everywhere(u in 0.3f64..60.0) {
        let h = 1e-5 * u.max(1.0);
        let dj = (bessel_j1(u + h) - bessel_j1(u - h)) / (2.0 * h);
        let dy = (bessel_y1(u + h).unwrap() - bessel_y1(u - h).unwrap()) / (2.0 * h);
        let w = bessel_j1(u) * dy - dj * bessel_y1(u).unwrap();
        prop_assert!((w * std::f64::consts::PI * u / 2.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ou_variance_is_monotone_in_t(h in 0.1f64..5.0, s in 0.0f64..3.0, t in 0.0f64..10.0, dt in 0.0f64..1.0) {
        let a = ou_variance(&[h], &[s], t).unwrap()[0];
        let b = ou_variance(&[h], &[s], t + dt).unwrap()[0];
        prop_assert!(b >= a && b <= s * s / (2.0 * h) * (1.0 + 1e-12));
    }
}
