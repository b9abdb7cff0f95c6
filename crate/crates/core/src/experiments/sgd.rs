//! Mini-batch SGD fluctuations and the coupling of the two diffusion approximations.

use super::{part_seed, ExperimentSpec, Outcome, PlotHint};
use crate::algorithms::{plain_gd_visit, GradientSource, Schedule};
use crate::analysis::{ks_test_normal, rate_slope, run_ensemble, sample_variance, TestResult};
use crate::data::{generate_dataset, SamplingMode};
use crate::error::Result;
use crate::models::{make_linreg_random, make_quadratic_mean};
use crate::oracles::{exp_decay_path, ou_variance};
use crate::solvers::{
    solve_gd_ode, solve_gd_sde, solve_gd_sde_with, BrownianIncrements, Coefficients, Grid, NoiseSpec, SigmaMode, SigmaSource,
};
use crate::table::Table;

const TIMES: [f64; 3] = [0.5, 1.0, 2.0];

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub(super) fn run(spec: &ExperimentSpec, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let fl = fluctuation_law(spec, seed, &mut out)?;
    degenerate(spec, seed, &mut out)?;
    let cp = coupling(spec, seed, &mut out)?;
    out.artifact("sgd_fluctuations.csv", fl, PlotHint::points("t", &["var_sgd_v1", "var_sde_v1", "target_v1"]));
    out.artifact("coupling.csv", cp, PlotHint::loglog("delta_over_m", &["median_sup_diff"]));
    Ok(out)
}

/// Discrete SGD and its SDE against the OU variance at fixed times.
fn fluctuation_law(spec: &ExperimentSpec, seed: u64, out: &mut Outcome) -> Result<Table> {
    let (tau, th2, off) = (spec.f("tau"), spec.f("theta2"), spec.f("offset"));
    let theta = [0.0, th2];
    let model = make_quadratic_mean(&theta, tau)?;
    let (m, delta) = (spec.int("m"), spec.f("delta"));
    let reps = spec.int("replicates");
    let x0 = [theta[0] + off, theta[1] + off];
    let sigma = [tau, th2];
    let scale = (m as f64 / delta).sqrt();
    let ks: Vec<usize> = TIMES.iter().map(|t| (t / delta).round() as usize).collect();
    let steps = *ks.last().expect("non-empty");
    let limits: Vec<Vec<f64>> = TIMES.iter().map(|&t| exp_decay_path(&theta, &x0, t)).collect::<Result<_>>()?;

    let src = GradientSource::minibatch(&model, None, m, SamplingMode::Population)?;
    let sgd = run_ensemble(
        |_, s| {
            let mut v = vec![0.0; 2 * TIMES.len()];
            let mut slot = 0;
            plain_gd_visit(&src, &x0, delta, steps, Schedule::Constant, s, |k, x, _| {
                if slot < ks.len() && k == ks[slot] {
                    for i in 0..2 {
                        v[2 * slot + i] = scale * (x[i] - limits[slot][i]);
                    }
                    slot += 1;
                }
            })?;
            Ok(v)
        },
        reps,
        part_seed(seed, "sgd"),
    )?;

    let grid = Grid::new(delta, TIMES[2])?;
    let sde = run_ensemble(
        |_, s| {
            let p = solve_gd_sde(&model, &x0, &grid, &NoiseSpec::gd(delta, m, SigmaMode::StateDependent, s), None)?;
            let mut v = Vec::with_capacity(2 * TIMES.len());
            for (t, lim) in TIMES.iter().zip(&limits) {
                v.extend(p.state_at(*t)?.iter().zip(lim).map(|(a, b)| scale * (a - b)));
            }
            Ok(v)
        },
        reps,
        part_seed(seed, "sde"),
    )?;

    let level = spec.f("ks_level");
    let tol = spec.f("var_tol");
    let mut table = Table::with_columns(&["t", "var_sgd_v1", "var_sgd_v2", "var_sde_v1", "var_sde_v2", "target_v1", "target_v2"]);
    for (ti, &t) in TIMES.iter().enumerate() {
        let target = ou_variance(&[1.0, 1.0], &sigma, t)?;
        let mut row = vec![t];
        let mut sde_row = Vec::new();
        for i in 0..2 {
            let col = sgd.column(2 * ti + i);
            let var = sample_variance(&col);
            row.push(var);
            out.check(TestResult::relative(
                format!("sgd_variance_t{t}_v{}", i + 1),
                var,
                target[i],
                tol,
                reps,
                "Var (m/delta)^{1/2}(x - X)",
            ));
            let mut r = ks_test_normal(&col, 0.0, target[i].sqrt(), level)?;
            r.name = format!("sgd_ks_t{t}_v{}", i + 1);
            out.check(r);
            let var_sde = sample_variance(&sde.column(2 * ti + i));
            sde_row.push(var_sde);
            out.check(TestResult::relative(
                format!("sde_variance_t{t}_v{}", i + 1),
                var_sde,
                target[i],
                tol,
                reps,
                "Var (m/delta)^{1/2}(X^m_delta - X) for the SDE",
            ));
        }
        row.extend(sde_row);
        row.extend(target);
        table.push(row);
    }
    Ok(table)
}

/// With `m = n` and sampling without replacement SGD is full-data GD.
fn degenerate(spec: &ExperimentSpec, seed: u64, out: &mut Outcome) -> Result<()> {
    let (tau, th2, off) = (spec.f("tau"), spec.f("theta2"), spec.f("offset"));
    let theta = [0.0, th2];
    let model = make_quadratic_mean(&theta, tau)?;
    let n = spec.int("degenerate_n");
    let delta = spec.f("delta");
    let x0 = [theta[0] + off, theta[1] + off];
    let steps = (1.0 / delta).round() as usize;
    let scale = (n as f64 / delta).sqrt();
    let ens = run_ensemble(
        |_, s| {
            let data = generate_dataset(&model, n, s)?;
            let full = plain_gd_visit(&GradientSource::full_data(&model, &data)?, &x0, delta, steps, Schedule::Constant, 0, |_, _, _| {})?;
            let src = GradientSource::minibatch(&model, Some(&data), n, SamplingMode::WithoutReplacement)?;
            let sgd = plain_gd_visit(&src, &x0, delta, steps, Schedule::Constant, s, |_, _, _| {})?;
            Ok(vec![scale * (sgd[0] - full[0]), scale * (sgd[1] - full[1])])
        },
        spec.int("degenerate_replicates"),
        part_seed(seed, "degenerate"),
    )?;
    let target = ou_variance(&[1.0, 1.0], &[tau, th2], 1.0)?;
    let ratio = (0..2).map(|i| sample_variance(&ens.column(i)) / target[i]).fold(0.0, f64::max);
    out.check(TestResult::new(
        "full_batch_collapse",
        ratio,
        spec.f("degenerate_ratio"),
        ens.len(),
        "variance of the normalized SGD-minus-full-data gap relative to the OU variance, m = n",
    ));
    Ok(())
}

/// Frozen-sigma and state-sigma SDEs driven by the same Brownian path.
fn coupling(spec: &ExperimentSpec, seed: u64, out: &mut Outcome) -> Result<Table> {
    let model = make_linreg_random([[1.0, 0.3], [0.3, 0.5]], 0.5, &[0.0, 0.0])?;
    let x0 = [1.0, -1.0];
    let h = spec.f("coupling_h");
    let delta = spec.f("coupling_delta");
    let grid = Grid::new(h, spec.f("coupling_t"))?;
    let field = |x: &[f64], o: &mut [f64]| model.grad_into(x, o);
    let reference = solve_gd_ode(&field, &x0, &grid)?;
    let coef = Coefficients::along(&model, &reference, &grid)?;
    let ms = [spec.int("coupling_m1"), spec.int("coupling_m2"), spec.int("coupling_m3")];
    let base = part_seed(seed, "coupling");
    let ens = run_ensemble(
        |_, s| {
            let inc = BrownianIncrements::generate(s, 2, h, grid.steps);
            ms.iter()
                .map(|&m| {
                    let scale = (delta / m as f64).sqrt();
                    let a = solve_gd_sde_with(&model, &x0, &grid, scale, SigmaSource::Frozen(&coef), &mut inc.cursor())?;
                    let b = solve_gd_sde_with(&model, &x0, &grid, scale, SigmaSource::State, &mut inc.cursor())?;
                    Ok((0..a.len())
                        .map(|j| a.state(j).iter().zip(b.state(j)).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max))
                        .fold(0.0, f64::max))
                })
                .collect()
        },
        spec.int("coupling_replicates"),
        base,
    )?;
    let mut table = Table::with_columns(&["m", "delta_over_m", "median_sup_diff"]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &m) in ms.iter().enumerate() {
        let med = median(ens.column(i));
        let r = delta / m as f64;
        xs.push(r);
        ys.push(med);
        table.push(vec![m as f64, r, med]);
    }
    let slope = rate_slope(&xs, &ys)?;
    out.check(TestResult::within(
        "coupling_slope",
        slope,
        1.0,
        spec.f("slope_tol"),
        ens.len(),
        "log-log slope of median sup|X - X_check| against delta/m",
    ));
    Ok(table)
}
