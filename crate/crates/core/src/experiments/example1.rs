//! Mean estimation: sqrt(n) fluctuations of the data-driven ODEs.

use super::{part_seed, ExperimentSpec, Outcome, PlotHint};
use crate::analysis::{ks_test_normal, run_ensemble, sample_variance, TestResult};
use crate::data::{generate_dataset, AffineField};
use crate::error::Result;
use crate::models::{make_quadratic_mean, ObjectiveModel};
use crate::oracles::two_j1_over_t;
use crate::solvers::{solve_gd_ode, solve_nesterov_ode, solve_pi_ode, Grid, Order, Path};
use crate::table::Table;

#[derive(Clone, Copy, PartialEq)]
enum Dynamics {
    Plain,
    Accelerated,
}

impl Dynamics {
    /// Deterministic factor `Pi(t)/(-sigma)` of the fluctuation.
    fn factor(self, t: f64) -> f64 {
        match self {
            Dynamics::Plain => -(-t).exp_m1(),
            Dynamics::Accelerated => 1.0 - two_j1_over_t(t),
        }
    }

    fn solve(self, field: &(dyn Fn(&[f64], &mut [f64]) + Sync), x0: &[f64], grid: &Grid) -> Result<Path> {
        match self {
            Dynamics::Plain => solve_gd_ode(field, x0, grid),
            Dynamics::Accelerated => solve_nesterov_ode(field, x0, grid, None),
        }
    }
}

struct Setup {
    model: ObjectiveModel,
    sigma: [f64; 2],
    x0: [f64; 2],
    grid: Grid,
    n: usize,
    reps: usize,
}

fn setup(spec: &ExperimentSpec, times: &[f64]) -> Result<Setup> {
    let tau = spec.f("tau");
    let theta = [spec.f("theta1"), spec.f("theta2")];
    let h = spec.f("h");
    let t_end = times.iter().copied().fold(0.0, f64::max);
    // record on a 0.05 lattice so every checked time is a stored point
    let stride = ((0.05 / h).round() as usize).max(1);
    Ok(Setup {
        model: make_quadratic_mean(&theta, tau)?,
        sigma: [tau, theta[1]],
        x0: [spec.f("x0_1"), spec.f("x0_2")],
        grid: Grid::new(h, t_end)?.with_stride(stride),
        n: spec.int("n"),
        reps: spec.int("replicates"),
    })
}

/// Per replicate: `V^n(t)` for each time, then `X^n(t_last) - U_bar`.
fn fluctuations(s: &Setup, dynamics: Dynamics, times: &[f64], seed: u64) -> Result<Vec<Vec<f64>>> {
    let model = &s.model;
    let field = |x: &[f64], out: &mut [f64]| model.grad_into(x, out);
    let limit = dynamics.solve(&field, &s.x0, &s.grid)?;
    let limits: Vec<Vec<f64>> = times.iter().map(|&t| limit.state_at(t).map(<[f64]>::to_vec)).collect::<Result<_>>()?;
    let root_n = (s.n as f64).sqrt();
    let ens = run_ensemble(
        |_, rs| {
            let data = generate_dataset(model, s.n, rs)?;
            let aff = AffineField::from_dataset(model, &data)?;
            let f = |x: &[f64], out: &mut [f64]| aff.eval_into(x, out);
            let xn = dynamics.solve(&f, &s.x0, &s.grid)?;
            let mut out = Vec::with_capacity(2 * times.len() + 4);
            out.extend(xn.state(0).iter().zip(limit.state(0)).map(|(a, b)| root_n * (a - b)));
            for (t, xt) in times.iter().zip(&limits) {
                out.extend(xn.state_at(*t)?.iter().zip(xt).map(|(a, b)| root_n * (a - b)));
            }
            let ubar = aff.root()?;
            out.extend(xn.last().iter().zip(&ubar).map(|(a, b)| a - b));
            Ok(out)
        },
        s.reps,
        seed,
    )?;
    Ok(ens.replicates)
}

fn column(rows: &[Vec<f64>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i]).collect()
}

fn ks_and_table(
    out: &mut Outcome,
    s: &Setup,
    dynamics: Dynamics,
    rows: &[Vec<f64>],
    times: &[f64],
    ks_times: &[f64],
    level: f64,
) -> Result<Table> {
    let mut table = Table::with_columns(&["t", "var_v1", "var_v2", "target_v1", "target_v2", "ks_v1", "ks_v2", "ks_crit"]);
    for (ti, &t) in times.iter().enumerate() {
        let mut row = vec![t];
        let mut ks = Vec::new();
        let mut targets = Vec::new();
        for i in 0..2 {
            let v = column(rows, 2 + 2 * ti + i);
            row.push(sample_variance(&v));
            let sd = dynamics.factor(t) * s.sigma[i];
            targets.push(sd * sd);
            let mut r = ks_test_normal(&v, 0.0, sd, level)?;
            if ks_times.contains(&t) {
                r.name = format!("ks_t{t}_v{}", i + 1);
                ks.push(r.clone());
                out.check(r);
            } else {
                ks.push(r);
            }
        }
        row.extend(targets);
        row.push(ks[0].statistic);
        row.push(ks[1].statistic);
        row.push(ks[0].threshold);
        table.push(row);
    }
    Ok(table)
}

pub(super) fn plain(spec: &ExperimentSpec, seed: u64) -> Result<Outcome> {
    let t_inf = spec.f("t_inf");
    let times = [0.5, 1.0, 2.0, t_inf];
    let s = setup(spec, &times)?;
    let rows = fluctuations(&s, Dynamics::Plain, &times, part_seed(seed, "datasets"))?;
    let mut out = Outcome::default();

    let v0 = rows.iter().flat_map(|r| r[..2].iter()).fold(0.0f64, |a, b| a.max(b.abs()));
    out.check(TestResult::new("v_at_zero", v0, 0.0, rows.len(), "max |V^n(0)| with x^n_0 = x_0"));

    let table = ks_and_table(&mut out, &s, Dynamics::Plain, &rows, &times, &[0.5, 1.0, 2.0], spec.f("ks_level"))?;

    let k = 2 + 2 * (times.len() - 1);
    for i in 0..2 {
        let var = sample_variance(&column(&rows, k + i));
        let target = (Dynamics::Plain.factor(t_inf) * s.sigma[i]).powi(2);
        out.check(TestResult::relative(
            format!("variance_t_inf_v{}", i + 1),
            var,
            target,
            spec.f("var_tol"),
            rows.len(),
            "variance of V^n at the infinity proxy",
        ));
    }
    let gap = rows.iter().flat_map(|r| r[k + 2..k + 4].iter()).fold(0.0f64, |a, b| a.max(b.abs()));
    out.check(TestResult::new("limit_is_sample_mean", gap, spec.f("limit_tol"), rows.len(), "max |X^n(t_inf) - U_bar_n| over replicates"));

    // Pi path from the matrix ODE against the closed form -(1 - e^{-t}) sigma
    let field = |x: &[f64], o: &mut [f64]| s.model.grad_into(x, o);
    let dense = solve_gd_ode(&field, &s.x0, &Grid::new(s.grid.h, s.grid.t_end())?)?;
    let pi = solve_pi_ode(&s.model, &dense, &s.grid, Order::First, None)?;
    let mut pi_table = Table::with_columns(&["t", "pi11", "pi22", "closed11", "closed22"]);
    let mut worst: f64 = 0.0;
    for j in 0..pi.len() {
        let t = pi.times[j];
        let m = pi.matrix(j);
        let c = [-Dynamics::Plain.factor(t) * s.sigma[0], -Dynamics::Plain.factor(t) * s.sigma[1]];
        if t >= 0.5 {
            worst = worst.max(((m[(0, 0)] - c[0]) / c[0]).abs()).max(((m[(1, 1)] - c[1]) / c[1]).abs());
        }
        pi_table.push(vec![t, m[(0, 0)], m[(1, 1)], c[0], c[1]]);
    }
    out.check(TestResult::new("pi_path_closed_form", worst, spec.f("pi_tol"), pi.len(), "relative error of Pi(t), t >= 0.5"));

    out.artifact("fluctuations.csv", table, PlotHint::points("t", &["var_v1", "target_v1", "var_v2", "target_v2"]));
    out.artifact("pi_path.csv", pi_table, PlotHint::lines("t", &["pi11", "closed11", "pi22", "closed22"]));
    Ok(out)
}

pub(super) fn accelerated(spec: &ExperimentSpec, seed: u64) -> Result<Outcome> {
    let t_inf = spec.f("t_inf");
    let small = spec.f("small_t");
    let times = [small, 0.5, 1.0, 2.0, t_inf];
    let s = setup(spec, &times)?;
    let rows = fluctuations(&s, Dynamics::Accelerated, &times, part_seed(seed, "datasets"))?;
    let mut out = Outcome::default();

    let v0 = rows.iter().flat_map(|r| r[..2].iter()).fold(0.0f64, |a, b| a.max(b.abs()));
    out.check(TestResult::new("v_at_zero", v0, 0.0, rows.len(), "max |V^n(0)| with x^n_0 = x_0"));

    let table = ks_and_table(&mut out, &s, Dynamics::Accelerated, &rows, &times, &[0.5, 1.0, 2.0], spec.f("ks_level"))?;

    let f_small = Dynamics::Accelerated.factor(small).powi(2);
    out.check(TestResult::new("small_t_factor", f_small, spec.f("small_t_tol"), 1, "oracle variance factor [1 - 2 J1(t)/t]^2 at small t"));
    let var_small = sample_variance(&column(&rows, 2)) / (s.sigma[0] * s.sigma[0]);
    out.check(TestResult::new("small_t_variance", var_small, spec.f("small_t_tol"), rows.len(), "Var V^n_1(t) / tau^2 at small t"));

    let k = 2 + 2 * (times.len() - 1);
    for i in 0..2 {
        let var = sample_variance(&column(&rows, k + i));
        let target = (Dynamics::Accelerated.factor(t_inf) * s.sigma[i]).powi(2);
        out.check(TestResult::relative(
            format!("variance_t_inf_v{}", i + 1),
            var,
            target,
            spec.f("var_tol"),
            rows.len(),
            "variance of V^n at the infinity proxy",
        ));
    }

    let mut env = Table::with_columns(&["t", "exp_decay", "bessel_decay", "plain_factor", "accel_factor", "bessel_envelope"]);
    let mut t = 0.0;
    while t <= t_inf + 1e-9 {
        // |2 J1(t)/t| is bounded by the envelope 2 sqrt(2/(pi t)) / t for large t
        let envelope = if t > 0.0 { 2.0 * (2.0 / (std::f64::consts::PI * t)).sqrt() / t } else { 1.0 };
        env.push(vec![t, (-t).exp(), two_j1_over_t(t), Dynamics::Plain.factor(t), Dynamics::Accelerated.factor(t), envelope.min(1.0)]);
        t += 0.25;
    }
    out.artifact("fluctuations.csv", table, PlotHint::points("t", &["var_v1", "target_v1", "var_v2", "target_v2"]));
    out.artifact("decay_envelopes.csv", env, PlotHint::lines("t", &["exp_decay", "bessel_decay", "bessel_envelope"]));
    Ok(out)
}
