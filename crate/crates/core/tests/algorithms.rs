#![allow(clippy::needless_range_loop)]

use gdsde::algorithms::*;
use gdsde::data::*;
use gdsde::models::*;
use gdsde::seeding::stream;
use gdsde::Error;
use proptest::prelude::*;

fn quad() -> ObjectiveModel {
    make_quadratic_mean(&[0.0, 1.0], 1.0).unwrap()
}

#[test]
fn plain_gd_contracts_geometrically() {
    let m = quad();
    let src = GradientSource::exact(&m);
    let t = run_plain_gd(&src, &[1.0, 2.0], 0.1, 10, Schedule::Constant, 0).unwrap();
    let f = 0.9f64.powi(10);
    assert!((t.last()[0] - f).abs() < 1e-14);
    assert!((t.last()[1] - (1.0 + f)).abs() < 1e-14);
    assert_eq!(t.times[10], 10.0 * 0.1);
    assert_eq!(t.to_table().header, vec!["k", "t", "x1", "x2"]);
}

#[test]
fn nesterov_matches_velocity_form() {
    let m = make_linreg_random([[1.0, 0.3], [0.3, 0.5]], 0.5, &[0.2, -0.1]).unwrap();
    let src = GradientSource::exact(&m);
    let t = run_nesterov(&src, &[1.0, -1.0], 0.01, 300, 0).unwrap();
    let v = nesterov_velocity_form(&m, &[1.0, -1.0], 0.01, 300).unwrap();
    for k in 0..=300 {
        for i in 0..2 {
            assert!((t.iterate(k)[i] - v[k][i]).abs() < 1e-12, "k={k}");
        }
    }
    assert_eq!(t.times[100], 100.0 * 0.1);
}

#[test]
fn step_process_is_right_continuous() {
    let m = quad();
    let t = run_plain_gd(&GradientSource::exact(&m), &[1.0, 1.0], 0.25, 8, Schedule::Constant, 0).unwrap();
    assert_eq!(step_process(&t, 0.0).unwrap(), t.iterate(0));
    assert_eq!(step_process(&t, 0.24).unwrap(), t.iterate(0));
    assert_eq!(step_process(&t, 0.25).unwrap(), t.iterate(1));
    assert_eq!(step_process(&t, 2.0).unwrap(), t.iterate(8));
    assert!(matches!(step_process(&t, 2.1), Err(Error::Range(_))));
    let p = run_plain_gd(&GradientSource::exact(&m), &[1.0, 1.0], 0.25, 8, Schedule::Polynomial { eta: 0.5, alpha: 0.5 }, 0).unwrap();
    let t2 = p.times[2];
    assert_eq!(step_process(&p, t2).unwrap(), p.iterate(2));
}

#[test]
fn invalid_step_sizes_are_rejected() {
    let m = quad();
    let src = GradientSource::exact(&m);
    assert!(matches!(run_plain_gd(&src, &[0.0, 0.0], 0.0, 5, Schedule::Constant, 0), Err(Error::ParameterDomain(_))));
    assert!(matches!(run_plain_gd(&src, &[0.0], 0.1, 5, Schedule::Constant, 0), Err(Error::Shape { .. })));
    let bad = Schedule::Polynomial { eta: 0.1, alpha: 1.5 };
    assert!(run_plain_gd(&src, &[0.0, 0.0], 0.1, 5, bad, 0).is_err());
}

#[test]
fn divergence_is_reported() {
    let m = quad();
    let r = run_plain_gd(&GradientSource::exact(&m), &[1.0, 1.0], 3.0, 200, Schedule::Constant, 0);
    assert!(matches!(r, Err(Error::Divergence { .. })));
}

#[test]
fn full_data_converges_to_sample_mean() {
    let m = quad();
    let d = generate_dataset(&m, 500, 3).unwrap();
    let src = GradientSource::full_data(&m, &d).unwrap();
    let t = run_plain_gd(&src, &[0.1, 0.1], 0.1, 500, Schedule::Constant, 0).unwrap();
    let mean = d.mean();
    for i in 0..2 {
        assert!((t.last()[i] - mean[i]).abs() < 1e-12);
    }
}

#[test]
fn full_data_fast_path_matches_record_sum() {
    let m = make_linreg_random([[0.02, 0.0], [0.0, 0.005]], 0.1, &[0.0, 0.0]).unwrap();
    let d = generate_dataset(&m, 300, 8).unwrap();
    let x = [0.3, -0.2];
    let slow = empirical_grad(&m, &d, &x).unwrap();
    let mut fast = vec![0.0; 2];
    AffineField::from_dataset(&m, &d).unwrap().eval_into(&x, &mut fast);
    for i in 0..2 {
        assert!((slow[i] - fast[i]).abs() < 1e-14);
    }
}

#[test]
fn full_batch_without_replacement_equals_full_data() {
    let m = quad();
    let d = generate_dataset(&m, 50, 1).unwrap();
    let full = run_plain_gd(&GradientSource::full_data(&m, &d).unwrap(), &[0.0, 0.0], 0.1, 20, Schedule::Constant, 0).unwrap();
    let mb = GradientSource::minibatch(&m, Some(&d), 50, SamplingMode::WithoutReplacement).unwrap();
    let sgd = run_plain_gd(&mb, &[0.0, 0.0], 0.1, 20, Schedule::Constant, 7).unwrap();
    for i in 0..2 {
        assert!((full.last()[i] - sgd.last()[i]).abs() < 1e-12);
    }
    assert!(matches!(GradientSource::minibatch(&m, Some(&d), 51, SamplingMode::WithoutReplacement), Err(Error::Sampling(_))));
    assert!(matches!(GradientSource::minibatch(&m, None, 5, SamplingMode::Bootstrap), Err(Error::Configuration(_))));
}

#[test]
fn minibatch_runs_are_reproducible() {
    let m = quad();
    let src = GradientSource::minibatch(&m, None, 10, SamplingMode::Population).unwrap();
    let a = run_plain_gd(&src, &[0.0, 0.0], 0.01, 100, Schedule::Constant, 5).unwrap();
    let b = run_plain_gd(&src, &[0.0, 0.0], 0.01, 100, Schedule::Constant, 5).unwrap();
    let c = run_plain_gd(&src, &[0.0, 0.0], 0.01, 100, Schedule::Constant, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.last(), c.last());
}

#[test]
fn tensor_iterates_stay_on_the_sphere() {
    let m = make_tensor4_d2(WDist::UniformSym).unwrap();
    let src = GradientSource::minibatch(&m, None, 10, SamplingMode::Population).unwrap();
    let t = run_plain_gd(&src, &[0.8, 0.6], 0.01, 200, Schedule::Constant, 2).unwrap();
    for k in 0..=200 {
        let x = t.iterate(k);
        assert!((x[0].hypot(x[1]) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sampling_modes_behave() {
    let m = quad();
    let d = generate_dataset(&m, 20, 4).unwrap();
    let mut rng = stream(1);
    let b = draw_minibatch(&m, Some(&d), 20, SamplingMode::WithoutReplacement, &mut rng).unwrap();
    let mut idx = b.source_indices.clone().unwrap();
    idx.sort();
    assert_eq!(idx, (0..20).collect::<Vec<_>>());
    let b = draw_minibatch(&m, None, 7, SamplingMode::Population, &mut rng).unwrap();
    assert_eq!(b.records.len(), 14);
    assert!(b.source_indices.is_none());
    assert!("bootstrap".parse::<SamplingMode>().is_ok());
    assert!("nope".parse::<SamplingMode>().is_err());
}

#[test]
fn datasets_are_seed_determined() {
    let m = make_linreg_random([[1.0, 0.3], [0.3, 0.5]], 0.5, &[0.2, -0.1]).unwrap();
    assert_eq!(generate_dataset(&m, 10, 3).unwrap(), generate_dataset(&m, 10, 3).unwrap());
    assert_ne!(generate_dataset(&m, 10, 3).unwrap(), generate_dataset(&m, 10, 4).unwrap());
    assert!(generate_dataset(&m, 0, 3).is_err());
    let t = generate_dataset(&m, 4, 3).unwrap().to_table();
    assert_eq!(t.rows.len(), 4);
}

proptest! {
    #[test]
    fn index_sampler_draws_are_valid(n in 1usize..60, m in 1usize..60, seed in any::<u64>()) {
        let mut s = IndexSampler::new(n);
        let mut rng = stream(seed);
        let boot = s.draw(m, SamplingMode::Bootstrap, &mut rng).unwrap();
        prop_assert_eq!(boot.len(), m);
        prop_assert!(boot.iter().all(|&i| i < n));
        if m <= n {
            let mut w = s.draw(m, SamplingMode::WithoutReplacement, &mut rng).unwrap();
            w.sort();
            w.dedup();
            prop_assert_eq!(w.len(), m);
        } else {
            prop_assert!(s.draw(m, SamplingMode::WithoutReplacement, &mut rng).is_err());
        }
    }

    #[test]
    fn minibatch_mean_of_population_gradient(seed in any::<u64>()) {
        let m = quad();
        let mut rng = stream(seed);
        let b = draw_minibatch(&m, None, 4000, SamplingMode::Population, &mut rng).unwrap();
        let g = minibatch_grad(&m, &b, &[0.0, 0.0]).unwrap();
        prop_assert!((g[0] - 0.0).abs() < 5.0 * (1.0f64 / 4000.0).sqrt());
        prop_assert!((g[1] + 1.0).abs() < 5.0 * (1.0f64 / 4000.0).sqrt());
    }
}
