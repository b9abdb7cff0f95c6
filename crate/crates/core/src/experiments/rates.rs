//! Euler accuracy and discrete-to-continuum error rates.

use super::{part_seed, ExperimentSpec, Outcome, PlotHint};
use crate::algorithms::{plain_gd_visit, run_nesterov, run_plain_gd, GradientSource, Schedule};
use crate::analysis::{rate_slope, run_ensemble, TestResult};
use crate::data::generate_dataset;
use crate::error::Result;
use crate::models::make_quadratic_mean;
use crate::oracles::{bessel_path, exp_decay_path};
use crate::solvers::{solve_gd_ode, solve_nesterov_ode, Grid, Path};
use crate::table::Table;

const X0: [f64; 2] = [2.0, -1.0];

fn sup_err(path: &Path, exact: impl Fn(f64) -> Result<Vec<f64>>) -> Result<f64> {
    let mut e: f64 = 0.0;
    for j in 0..path.len() {
        let x = exact(path.times[j])?;
        e = path.state(j).iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(e, f64::max);
    }
    Ok(e)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub(super) fn run(spec: &ExperimentSpec, seed: u64) -> Result<Outcome> {
    let theta = [0.0, spec.f("theta2")];
    let model = make_quadratic_mean(&theta, spec.f("tau"))?;
    let horizon = spec.f("horizon");
    let mut out = Outcome::default();

    // Euler solutions against the exponential and Bessel closed forms
    let field = |x: &[f64], o: &mut [f64]| model.grad_into(x, o);
    let h = spec.f("ode_h");
    let exp_path = |t: f64| exp_decay_path(&theta, &X0, t);
    let bes_path = |t: f64| bessel_path(&theta, &X0, t);
    let mut oracle = Table::with_columns(&["h", "plain_err", "accel_err"]);
    let mut errs = Vec::new();
    for hh in [h, h / 2.0] {
        let grid = Grid::new(hh, horizon)?;
        let ep = sup_err(&solve_gd_ode(&field, &X0, &grid)?, exp_path)?;
        let ea = sup_err(&solve_nesterov_ode(&field, &X0, &grid, None)?, bes_path)?;
        oracle.push(vec![hh, ep, ea]);
        errs.push((ep, ea));
    }
    let tol = spec.f("ode_tol");
    out.check(TestResult::new("plain_ode_error", errs[0].0, tol, 1, "max |Euler - exponential closed form| on [0, T]"));
    out.check(TestResult::new("accel_ode_error", errs[0].1, tol, 1, "max |Euler - Bessel closed form| on [0, T]"));
    let (lo, hi) = (spec.f("halving_lo"), spec.f("halving_hi"));
    let band = |name: &str, r: f64, what: &str| {
        let mid = 0.5 * (lo + hi);
        TestResult::new(name, (r - mid).abs(), 0.5 * (hi - lo), 2, format!("{what}: error ratio {r:.4} when h halves, band [{lo}, {hi}]"))
    };
    out.check(band("plain_ode_halving", errs[1].0 / errs[0].0, "plain"));
    out.check(band("accel_ode_halving", errs[1].1 / errs[0].1, "accelerated"));

    // iterates against the continuous limits on [0, T]
    let exact = GradientSource::exact(&model);
    let deltas = [spec.f("delta1"), spec.f("delta2"), spec.f("delta3")];
    let mut rates = Table::with_columns(&["delta", "plain_sup_err", "accel_sup_err"]);
    let (mut ep, mut ea) = (Vec::new(), Vec::new());
    for &d in &deltas {
        let kp = (horizon / d).floor() as usize;
        let tp = run_plain_gd(&exact, &X0, d, kp, Schedule::Constant, 0)?;
        let mut e1: f64 = 0.0;
        for k in 0..=kp {
            e1 = e1.max(max_abs_diff(tp.iterate(k), &exp_path(tp.times[k])?));
        }
        let ka = (horizon / d.sqrt()).floor() as usize;
        let ta = run_nesterov(&exact, &X0, d, ka, 0)?;
        let mut e2: f64 = 0.0;
        for k in 0..=ka {
            e2 = e2.max(max_abs_diff(ta.iterate(k), &bes_path(ta.times[k])?));
        }
        rates.push(vec![d, e1, e2]);
        ep.push(e1);
        ea.push(e2);
    }
    let st = spec.f("slope_tol");
    out.check(TestResult::within(
        "plain_delta_slope",
        rate_slope(&deltas, &ep)?,
        1.0,
        st,
        3,
        "log-log slope of sup error against delta, plain",
    ));
    out.check(TestResult::within(
        "accel_delta_slope",
        rate_slope(&deltas, &ea)?,
        0.5,
        st,
        3,
        "log-log slope of sup error against delta, accelerated",
    ));

    // full-data against exact-gradient iterates as n grows
    let d = spec.f("n_delta");
    let k = (horizon / d).floor() as usize;
    let reference = run_plain_gd(&exact, &X0, d, k, Schedule::Constant, 0)?;
    let ns = [spec.int("n1"), spec.int("n2"), spec.int("n3")];
    let reps = spec.int("replicates");
    let mut scaling = Table::with_columns(&["n", "mean_sup_diff"]);
    let mut means = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let ens = run_ensemble(
            |_, s| {
                let data = generate_dataset(&model, n, s)?;
                let src = GradientSource::full_data(&model, &data)?;
                let mut sup: f64 = 0.0;
                plain_gd_visit(&src, &X0, d, k, Schedule::Constant, 0, |j, x, _| {
                    sup = sup.max(max_abs_diff(x, reference.iterate(j)));
                })?;
                Ok(vec![sup])
            },
            reps,
            part_seed(seed, &format!("n{i}")),
        )?;
        let mean = ens.column(0).iter().sum::<f64>() / reps as f64;
        scaling.push(vec![n as f64, mean]);
        means.push(mean);
    }
    let nsf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    out.check(TestResult::within("n_scaling_slope", rate_slope(&nsf, &means)?, -0.5, st, reps, "log-log slope of sup|x^n - x| against n"));

    out.artifact("oracle_errors.csv", oracle, PlotHint::loglog("h", &["plain_err", "accel_err"]));
    out.artifact("delta_rates.csv", rates, PlotHint::loglog("delta", &["plain_sup_err", "accel_sup_err"]));
    out.artifact("n_scaling.csv", scaling, PlotHint::loglog("n", &["mean_sup_diff"]));
    Ok(out)
}
