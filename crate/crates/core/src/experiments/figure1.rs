//! Random-design regression: estimator scatter, SGD paths and accelerated paths.

use super::{part_seed, ExperimentSpec, Outcome, PlotHint};
use crate::algorithms::{plain_gd_visit, run_nesterov, GradientSource, Schedule};
use crate::analysis::{mean_cov, relative_frobenius, run_ensemble, TestResult};
use crate::data::{generate_dataset, AffineField, SamplingMode};
use crate::error::Result;
use crate::models::make_linreg_random;
use crate::seeding::derive_seed;
use crate::solvers::{solve_nesterov_ode, Grid, Path};
use crate::table::Table;
use nalgebra::DMatrix;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(super) fn run(spec: &ExperimentSpec, seed: u64) -> Result<Outcome> {
    let (a11, a22, tau) = (spec.f("alpha11"), spec.f("alpha22"), spec.f("tau"));
    let theta = [0.0, 0.0];
    let model = make_linreg_random([[a11, 0.0], [0.0, a22]], tau, &theta)?;
    let n = spec.int("n");
    let m = spec.int("m");
    let delta = spec.f("delta");
    let x0 = [spec.f("x0_1"), spec.f("x0_2")];
    let tol = spec.f("endpoint_tol");
    let thin = spec.int("thin");
    let mut out = Outcome::default();

    // (a) least-squares estimators over independent datasets
    let reps = spec.int("replicates").max(spec.int("scatter"));
    let ens = run_ensemble(
        |_, s| {
            let data = generate_dataset(&model, n, s)?;
            AffineField::from_dataset(&model, &data)?.root()
        },
        reps,
        part_seed(seed, "estimators"),
    )?;
    let root_n = (n as f64).sqrt();
    let scaled: Vec<Vec<f64>> = ens.replicates[..spec.int("replicates")].iter().map(|r| r.iter().map(|v| root_n * v).collect()).collect();
    let (_, cov) = mean_cov(&scaled)?;
    let target = DMatrix::from_diagonal(&nalgebra::dvector![tau * tau / a11, tau * tau / a22]);
    out.check(TestResult::new(
        "estimator_covariance",
        relative_frobenius(&cov, &target),
        spec.f("cov_tol"),
        scaled.len(),
        format!(
            "relative Frobenius error of Cov sqrt(n)(theta_hat - theta) = [[{:.4}, {:.4}], [{:.4}, {:.4}]] against tau^2 alpha^-1",
            cov[(0, 0)],
            cov[(0, 1)],
            cov[(1, 0)],
            cov[(1, 1)]
        ),
    ));
    let scatter = &ens.replicates[..spec.int("scatter")];
    let (mean, scov) = mean_cov(scatter)?;
    let k = scatter.len() as f64;
    let z = (0..2).map(|i| mean[i].abs() / (scov[(i, i)] / k).sqrt()).fold(0.0, f64::max);
    out.check(TestResult::new(
        "scatter_mean",
        z,
        spec.f("se_band"),
        scatter.len(),
        format!("max |mean| / SE of the scatter, mean = ({:.3e}, {:.3e})", mean[0], mean[1]),
    ));
    let mut sc = Table::with_columns(&["theta1", "theta2"]);
    scatter.iter().for_each(|r| sc.push(r.clone()));

    // (b) SGD sample paths on one dataset, plus full-data and exact plain GD
    let data = generate_dataset(&model, n, part_seed(seed, "figure_dataset"))?;
    let theta_hat = AffineField::from_dataset(&model, &data)?.root()?;
    let steps = spec.int("gd_steps");
    let mut paths = Table::with_columns(&["path", "k", "t", "x1", "x2"]);
    let record = |table: &mut Table, id: f64, k: usize, x: &[f64]| {
        if k.is_multiple_of(thin) || k == steps {
            table.push(vec![id, k as f64, k as f64 * delta, x[0], x[1]]);
        }
    };
    let sgd_seed = part_seed(seed, "sgd");
    let sgd_src = GradientSource::minibatch(&model, Some(&data), m, SamplingMode::Bootstrap)?;
    let mut sgd_ends = Vec::new();
    for path in 1..=spec.int("sgd_paths") {
        record(&mut paths, path as f64, 0, &x0);
        let end = plain_gd_visit(&sgd_src, &x0, delta, steps, Schedule::Constant, derive_seed(sgd_seed, path as u64), |k, x, _| {
            record(&mut paths, path as f64, k, x)
        })?;
        sgd_ends.push(end);
    }
    let full = GradientSource::full_data(&model, &data)?;
    record(&mut paths, 0.0, 0, &x0);
    let full_end = plain_gd_visit(&full, &x0, delta, steps, Schedule::Constant, 0, |k, x, _| record(&mut paths, 0.0, k, x))?;
    let exact = GradientSource::exact(&model);
    record(&mut paths, -1.0, 0, &x0);
    let exact_end = plain_gd_visit(&exact, &x0, delta, steps, Schedule::Constant, 0, |k, x, _| record(&mut paths, -1.0, k, x))?;
    out.check(TestResult::new(
        "plain_full_data_endpoint",
        dist(&full_end, &theta_hat),
        tol,
        steps,
        "|x^n_K - theta_hat_n| for full-data plain GD",
    ));
    out.check(TestResult::new("plain_exact_endpoint", dist(&exact_end, &theta), tol, steps, "|x_K - theta| for exact plain GD"));

    // (c) accelerated full-data iterates with their ODE, plus the population pair
    let ksteps = spec.int("nesterov_steps");
    let s = delta.sqrt();
    let sub = spec.int("ode_substeps");
    let grid = Grid::new(s / sub as f64, ksteps as f64 * s)?.with_stride(sub);
    let mut acc = Table::with_columns(&["series", "k", "t", "x1", "x2", "ode_x1", "ode_x2"]);
    let mut est = Table::with_columns(&["series", "theta_hat1", "theta_hat2"]);
    est.push(vec![0.0, theta[0], theta[1]]);
    let push_pair = |table: &mut Table, id: f64, iters: &crate::algorithms::Trajectory, ode: &Path| {
        for k in (0..=ksteps).filter(|k| k % thin == 0 || *k == ksteps) {
            let x = iters.iterate(k);
            let y = ode.state(k);
            table.push(vec![id, k as f64, iters.times[k], x[0], x[1], y[0], y[1]]);
        }
    };
    let field = |x: &[f64], o: &mut [f64]| model.grad_into(x, o);
    let pop_iter = run_nesterov(&exact, &x0, delta, ksteps, 0)?;
    let pop_ode = solve_nesterov_ode(&field, &x0, &grid, None)?;
    push_pair(&mut acc, 0.0, &pop_iter, &pop_ode);
    out.check(TestResult::new(
        "accelerated_exact_endpoint",
        dist(pop_iter.last(), &theta),
        tol,
        ksteps,
        "|x_K - theta| for exact-gradient accelerated GD",
    ));
    let mut worst_acc: f64 = 0.0;
    let mut worst_ode: f64 = 0.0;
    let panel_seed = part_seed(seed, "accelerated_datasets");
    for d in 1..=spec.int("datasets") {
        let data_d = if d == 1 { data.clone() } else { generate_dataset(&model, n, derive_seed(panel_seed, d as u64))? };
        let aff = AffineField::from_dataset(&model, &data_d)?;
        let hat = aff.root()?;
        let src = GradientSource::full_data(&model, &data_d)?;
        let iters = run_nesterov(&src, &x0, delta, ksteps, 0)?;
        let f = |x: &[f64], o: &mut [f64]| aff.eval_into(x, o);
        let ode = solve_nesterov_ode(&f, &x0, &grid, None)?;
        worst_acc = worst_acc.max(dist(iters.last(), &hat));
        worst_ode = worst_ode.max(dist(ode.last(), &hat));
        push_pair(&mut acc, d as f64, &iters, &ode);
        est.push(vec![d as f64, hat[0], hat[1]]);
    }
    out.check(TestResult::new(
        "accelerated_full_data_endpoint",
        worst_acc,
        tol,
        ksteps,
        "max over datasets of |x^n_K - theta_hat_n| for full-data accelerated GD",
    ));
    out.check(TestResult::new(
        "accelerated_ode_endpoint",
        worst_ode,
        tol,
        ksteps,
        "max over datasets of |X^n(T) - theta_hat_n| for the accelerated ODE",
    ));
    let sgd_spread = sgd_ends.iter().map(|e| dist(e, &theta_hat)).fold(0.0, f64::max);
    out.check(TestResult::new(
        "sgd_endpoint_spread",
        sgd_spread,
        // stationary spread is of order (delta/m)^{1/2}; 10 standard deviations of the slowest coordinate
        10.0 * (delta / m as f64).sqrt() * tau,
        sgd_ends.len(),
        "max |x^m_K - theta_hat_n| over SGD paths",
    ));
    out.artifact("figure1_scatter.csv", sc, PlotHint::points("theta1", &["theta2"]));
    out.artifact("figure1_sgd_paths.csv", paths, PlotHint::lines("x1", &["x2"]));
    out.artifact("figure1_accelerated_paths.csv", acc, PlotHint::lines("x1", &["x2", "ode_x2"]));
    out.artifact("figure1_estimators.csv", est, None);
    Ok(out)
}
