use gdsde::models::*;
use gdsde::seeding::stream;
use gdsde::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn fig_alpha() -> [[f64; 2]; 2] {
    [[0.02, 0.0], [0.0, 0.005]]
}

fn all_models() -> Vec<ObjectiveModel> {
    vec![
        make_quadratic_mean(&[0.0, 1.0], 1.0).unwrap(),
        make_quadratic_mean(&[-0.5, 2.0], 0.5).unwrap(),
        make_linreg_random(fig_alpha(), 0.1, &[0.0, 0.0]).unwrap(),
        make_linreg_random([[1.0, 0.3], [0.3, 0.5]], 0.5, &[0.2, -0.1]).unwrap(),
        make_linreg_fixed(&[0.0, 0.0], 0.1, 64).unwrap(),
        make_scalar_quadratic(0.3, 1.0).unwrap(),
    ]
}

fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn quadratic_mean_examples() {
    let m = make_quadratic_mean(&[0.0, 1.0], 1.0).unwrap();
    assert_eq!(eval_grad(&m, &[2.0, 3.0]).unwrap(), vec![2.0, 2.0]);
    assert_eq!(eval_hessian(&m, &[5.0, -1.0]).unwrap(), DMatrix::identity(2, 2));
    let m = make_quadratic_mean(&[0.0, 1.0], 0.5).unwrap();
    assert_eq!(eval_noise_cov(&m, &[3.0, 3.0]).unwrap(), DMatrix::from_diagonal(&nalgebra::dvector![0.25, 1.0]));
    assert!((eval_value(&m, &[0.0, 1.0]).unwrap() - (0.25 + 1.0) / 2.0).abs() < 1e-15);
}

#[test]
fn quadratic_mean_rejects_bad_parameters() {
    assert!(matches!(make_quadratic_mean(&[0.0, 1.0], 0.0), Err(Error::ParameterDomain(_))));
    assert!(matches!(make_quadratic_mean(&[0.0, -1.0], 1.0), Err(Error::ParameterDomain(_))));
    assert!(matches!(make_quadratic_mean(&[0.0], 1.0), Err(Error::Shape { .. })));
}

#[test]
fn linreg_random_examples() {
    let m = make_linreg_random(fig_alpha(), 0.1, &[0.0, 0.0]).unwrap();
    // g(0) = tau^2 / 2
    assert!((eval_value(&m, &[0.0, 0.0]).unwrap() - 0.005).abs() < 1e-15);
    let s = eval_noise_cov(&m, &[0.0, 0.0]).unwrap();
    assert!((s[(0, 0)] - 2e-4).abs() < 1e-16 && (s[(1, 1)] - 5e-5).abs() < 1e-16 && s[(0, 1)] == 0.0);
    assert!((eval_noise_cov(&m, &[1.0, 1.0]).unwrap()[(0, 1)] - 1e-4).abs() < 1e-16);
    let g = eval_grad(&m, &[1.0, 2.0]).unwrap();
    assert!((g[0] - 0.02).abs() < 1e-16 && (g[1] - 0.01).abs() < 1e-16);
}

#[test]
fn linreg_random_noise_cov_general_form() {
    // diagonal entries: alpha_ii (beta' alpha beta + tau^2) + (alpha beta)_i^2
    let m = make_linreg_random(fig_alpha(), 0.1, &[0.0, 0.0]).unwrap();
    let s = eval_noise_cov(&m, &[1.0, 1.0]).unwrap();
    let q = 0.02 + 0.005;
    assert!((s[(0, 0)] - (0.02 * (q + 0.01) + 0.02 * 0.02)).abs() < 1e-16);
    assert!((s[(1, 1)] - (0.005 * (q + 0.01) + 0.005 * 0.005)).abs() < 1e-16);
}

#[test]
fn linreg_random_rejects_indefinite_alpha() {
    assert!(matches!(make_linreg_random([[1.0, 2.0], [2.0, 1.0]], 0.1, &[0.0, 0.0]), Err(Error::ParameterDomain(_))));
}

#[test]
fn linreg_fixed_examples() {
    let m = make_linreg_fixed(&[0.0, 0.0], 0.1, 100).unwrap();
    assert_eq!(eval_grad(&m, &[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
    let s = eval_noise_cov(&m, &[0.3, 0.3]).unwrap();
    assert!((s[(0, 0)] - 0.01).abs() < 1e-16 && (s[(1, 1)] - 0.01).abs() < 1e-16);
    assert!((eval_value(&m, &[0.0, 0.0]).unwrap() - 0.005).abs() < 1e-16);
    assert!(matches!(make_linreg_fixed(&[0.0, 0.0], 0.1, 1), Err(Error::ParameterDomain(_))));
}

#[test]
fn tensor_moments_and_linearization() {
    let psi = WDist::UniformSym.moments();
    assert!((psi[4] - 1.8).abs() < 1e-15);
    assert!((psi[6] - 27.0 / 7.0).abs() < 1e-14);
    assert!((psi[8] - 9.0).abs() < 1e-14);
    // analytic oracle E X^{2k} = a^{2k}/(2k+1), a = sqrt 3, by midpoint quadrature
    let a = 3f64.sqrt();
    for k in 1..=4 {
        let n = 200_000;
        let q: f64 = (0..n).map(|i| (-a + (i as f64 + 0.5) * 2.0 * a / n as f64).powi(2 * k)).sum::<f64>() / n as f64;
        assert!((q - psi[2 * k as usize]).abs() < 1e-6 * psi[2 * k as usize]);
    }
    let m = make_tensor4_d2(WDist::UniformSym).unwrap();
    assert_eq!(eval_hessian(&m, &[1.0, 0.0]).unwrap(), DMatrix::from_diagonal(&nalgebra::dvector![-8.0, 4.0]));
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let h = eval_hessian(&m, &[r, -r]).unwrap();
    assert!((h - DMatrix::identity(2, 2) * -4.0).norm() < 1e-14);
    assert_eq!(make_tensor4_d2(WDist::Gaussian).unwrap_err().to_string(), "unidentifiable tensor structure for psi4=3");
}

#[test]
fn tensor_noise_cov_at_saddle() {
    for dist in [WDist::UniformSym, WDist::Rademacher] {
        let m = make_tensor4_d2(dist).unwrap();
        let psi = dist.moments();
        let s = eval_noise_cov(&m, &[1.0, 0.0]).unwrap() / 16.0;
        assert!((s[(0, 0)] - (psi[8] - psi[4] * psi[4])).abs() < 1e-12);
        assert!((s[(1, 1)] - psi[6]).abs() < 1e-12);
        assert!(s[(0, 1)].abs() < 1e-12);
    }
}

#[test]
fn tensor_noise_cov_matches_monte_carlo() {
    let m = make_tensor4_d2(WDist::UniformSym).unwrap();
    let x = [0.6, 0.8];
    let mut rng = stream(11);
    let n = 400_000;
    let mut w = [0.0; 2];
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        m.sample_datum(&mut rng, &mut w);
        let ip = x[0] * w[0] + x[1] * w[1];
        rows.push(vec![4.0 * ip.powi(3) * w[0], 4.0 * ip.powi(3) * w[1]]);
    }
    let (_, cov) = gdsde::analysis::mean_cov(&rows).unwrap();
    let want = eval_noise_cov(&m, &x).unwrap();
    assert!(gdsde::analysis::relative_frobenius(&cov, &want) < 0.05);
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = stream(5);
    for m in all_models() {
        for _ in 0..10 {
            let x: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = eval_grad(&m, &x).unwrap();
            let fd = central_diff(|y| m.value(y), &x, 1e-5);
            let err = norm(&g.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err <= 1e-5 * (1.0 + norm(&g)), "{}: {err}", m.name());
        }
    }
}

#[test]
fn tensor_gradient_matches_finite_differences_on_the_circle() {
    let m = make_tensor4_d2(WDist::UniformSym).unwrap();
    for i in 0..10 {
        let a = 0.3 + i as f64 * 0.6;
        let x = [a.cos(), a.sin()];
        let g = m.grad(&x);
        let fd = central_diff(|y| m.value(y), &x, 1e-5);
        let err = norm(&[g[0] - fd[0], g[1] - fd[1]]);
        assert!(err <= 1e-5 * (1.0 + norm(&g)), "angle {a}: {err}");
    }
}

#[test]
fn hessians_match_finite_differences() {
    let mut rng = stream(6);
    for m in all_models() {
        let x: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let h = m.hessian(&x);
        for j in 0..m.dim() {
            let col = central_diff(|y| m.grad(y)[j], &x, 1e-5);
            for i in 0..m.dim() {
                assert!((h[(j, i)] - col[i]).abs() <= 1e-4 * (1.0 + h.norm()), "{}", m.name());
            }
        }
        assert!((&h - h.transpose()).norm() == 0.0);
    }
}

#[test]
fn minimizers_are_stationary() {
    for m in all_models() {
        let t = m.minimizer().unwrap();
        assert!(norm(&m.grad(&t)) <= 1e-12, "{}", m.name());
    }
}

fn datum_grad_moments(m: &ObjectiveModel, x: &[f64], n: usize, seed: u64) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
    let mut rng = stream(seed);
    let mut d = vec![0.0; m.datum_len()];
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            m.sample_datum(&mut rng, &mut d);
            eval_datum_grad(m, x, &d).unwrap()
        })
        .collect();
    let (mean, cov) = gdsde::analysis::mean_cov(&rows).unwrap();
    let se = (0..m.dim()).map(|i| (cov[(i, i)] / n as f64).sqrt()).collect();
    (mean, cov, se)
}

#[test]
fn datum_gradients_are_unbiased_with_exact_covariance() {
    let cases: Vec<(ObjectiveModel, Vec<f64>)> = vec![
        (make_quadratic_mean(&[0.0, 1.0], 1.0).unwrap(), vec![0.5, -0.3]),
        (make_linreg_random(fig_alpha(), 0.1, &[0.0, 0.0]).unwrap(), vec![1.0, 1.0]),
        (make_linreg_random([[1.0, 0.3], [0.3, 0.5]], 0.5, &[0.2, -0.1]).unwrap(), vec![-0.4, 0.7]),
        (make_linreg_fixed(&[0.0, 0.0], 0.1, 64).unwrap(), vec![0.0, 0.0]),
        (make_scalar_quadratic(0.3, 2.0).unwrap(), vec![1.0]),
    ];
    for (i, (m, x)) in cases.iter().enumerate() {
        let (mean, cov, se) = datum_grad_moments(m, x, 100_000, 100 + i as u64);
        let g = m.grad(x);
        for k in 0..m.dim() {
            assert!((mean[k] - g[k]).abs() <= 4.0 * se[k] + 1e-15, "{} coord {k}", m.name());
        }
        let want = m.noise_cov(x);
        assert!(gdsde::analysis::relative_frobenius(&cov, &want) <= 0.05, "{}", m.name());
    }
}

#[test]
fn tensor_datum_gradient_is_unbiased_on_the_circle() {
    let m = make_tensor4_d2(WDist::UniformSym).unwrap();
    let x = [0.6, 0.8];
    let (mean, _, se) = datum_grad_moments(&m, &x, 100_000, 7);
    let g = m.grad(&x);
    for k in 0..2 {
        assert!((mean[k] - g[k]).abs() <= 4.0 * se[k]);
    }
}

#[test]
fn post_step_projects_tensor_iterates() {
    let m = make_tensor4_d2(WDist::Rademacher).unwrap();
    let mut x = vec![3.0, 4.0];
    m.post_step(&mut x);
    assert_eq!(x, vec![0.6, 0.8]);
    let q = make_quadratic_mean(&[0.0, 1.0], 1.0).unwrap();
    let mut y = vec![3.0, 4.0];
    q.post_step(&mut y);
    assert_eq!(y, vec![3.0, 4.0]);
}

#[test]
fn dimension_mismatch_is_a_shape_error() {
    let m = make_quadratic_mean(&[0.0, 1.0], 1.0).unwrap();
    assert!(matches!(eval_grad(&m, &[1.0]), Err(Error::Shape { expected: 2, got: 1 })));
    assert!(matches!(eval_noise_cov(&m, &[1.0, 2.0, 3.0]), Err(Error::Shape { .. })));
}

proptest! {
    #[test]
    fn noise_covariances_are_symmetric_psd(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut models = all_models();
        models.push(make_tensor4_d2(WDist::UniformSym).unwrap());
        models.push(make_tensor4_d2(WDist::Rademacher).unwrap());
        for m in models {
            let x: Vec<f64> = [a, b][..m.dim()].to_vec();
            let s = m.noise_cov(&x);
            prop_assert!((&s - s.transpose()).norm() <= 1e-12 * (1.0 + s.norm()));
            let min = nalgebra::SymmetricEigen::new(s.clone()).eigenvalues.min();
            prop_assert!(min >= -1e-9 * (1.0 + s.norm()), "{} min eig {}", m.name(), min);
            let r = m.noise_sqrt(&x);
            prop_assert!((&r * &r - &s).norm() <= 1e-9 * (1.0 + s.norm()));
        }
    }
}
