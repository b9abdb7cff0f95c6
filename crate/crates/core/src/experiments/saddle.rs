//! Fourth-order tensor model on the unit circle.
//!
//! `w* = (1, 0)` has linearization `diag(-8, 4)` and noise `16 diag(psi8 - psi4^2, psi6)`;
//! the fluctuation there obeys `dV = diag(8, -4) V dt - sigma dB`. At `u* = (1, -1)/sqrt 2`
//! the fluctuation is taken as `dV = -4 V dt - sigma(u*) dB`.

use super::{part_seed, ExperimentSpec, Outcome, PlotHint};
use crate::analysis::{linear_fit, mean_cov, relative_frobenius, run_ensemble, sample_variance, TestResult};
use crate::error::Result;
use crate::models::{make_tensor4_d2, ObjectiveModel, WDist};
use crate::oracles::{tensor_flow_x1sq, tensor_flow_x1sq_exact};
use crate::solvers::{lyapunov_stationary, solve_gd_ode, solve_limit_sde, Grid, Increments, Order, StreamIncrements};
use crate::table::Table;
use nalgebra::DMatrix;

/// Euler-Maruyama for `dV = A V dt + S dB`, `V(0) = 0`; `visit(j, V_j)` returns false to stop.
fn linear_sde(a: &DMatrix<f64>, s: &DMatrix<f64>, h: f64, steps: usize, seed: u64, mut visit: impl FnMut(usize, &[f64]) -> bool) {
    let p = a.nrows();
    let mut v = vec![0.0; p];
    let mut next = vec![0.0; p];
    let mut db = vec![0.0; p];
    let mut inc = StreamIncrements::new(seed, h);
    for j in 1..=steps {
        inc.next_into(&mut db);
        for i in 0..p {
            let drift: f64 = (0..p).map(|k| a[(i, k)] * v[k]).sum();
            let noise: f64 = (0..p).map(|k| s[(i, k)] * db[k]).sum();
            next[i] = v[i] + h * drift + noise;
        }
        v.copy_from_slice(&next);
        if !visit(j, &v) {
            return;
        }
    }
}

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
    let model = make_tensor4_d2(WDist::UniformSym)?;
    let mut out = Outcome::default();
    let flow = gradient_flow(spec, &model, &mut out)?;
    minimizer_case(spec, &model, seed, &mut out)?;
    let var = saddle_growth(spec, &model, seed, &mut out)?;
    let (escape, selection) = escape(spec, &model, seed, &mut out)?;
    out.artifact("flow.csv", flow, PlotHint::lines("t", &["x1sq", "closed_form", "closed_form_exact"]));
    out.artifact("saddle_variance.csv", var, PlotHint::lines("t", &["log_var_v1", "log_oracle_v1"]));
    out.artifact("escape.csv", escape, None);
    out.artifact("selection.csv", selection, PlotHint::points("m", &["escape_fraction"]));
    Ok(out)
}

fn gradient_flow(spec: &ExperimentSpec, model: &ObjectiveModel, out: &mut Outcome) -> Result<Table> {
    let y0 = spec.f("x1sq0");
    let h = spec.f("flow_h");
    let stride = ((0.01 / h).round() as usize).max(1);
    let grid = Grid::new(h, spec.f("flow_t"))?.with_stride(stride);
    let field = |x: &[f64], o: &mut [f64]| model.grad_into(x, o);
    let path = solve_gd_ode(&field, &[y0.sqrt(), (1.0 - y0).sqrt()], &grid)?;
    let mut table = Table::with_columns(&["t", "x1sq", "closed_form", "closed_form_exact"]);
    let (mut err, mut err_exact) = (0.0f64, 0.0f64);
    for j in 0..path.len() {
        let t = path.times[j];
        let x = path.state(j);
        let y = x[0] * x[0] / (x[0] * x[0] + x[1] * x[1]);
        let c = tensor_flow_x1sq(y0, t)?;
        let e = tensor_flow_x1sq_exact(y0, t)?;
        err = err.max((y - c).abs());
        err_exact = err_exact.max((y - e).abs());
        table.push(vec![t, y, c, e]);
    }
    let tol = spec.f("flow_tol");
    out.check(TestResult::new("flow_closed_form", err, tol, path.len(), "max |X1^2(t) - 0.5 - 0.5 [1 + c e^{-4t}]^{-1/2}|"));
    out.check(TestResult::new("flow_closed_form_rate8", err_exact, tol, path.len(), "max |X1^2(t) - 0.5 - 0.5 [1 + c e^{-8t}]^{-1/2}|"));
    Ok(table)
}

fn minimizer_case(spec: &ExperimentSpec, model: &ObjectiveModel, seed: u64, out: &mut Outcome) -> Result<()> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let u = [r, -r];
    let sigma = model.noise_sqrt(&u);
    let rate = 4.0;
    let a = DMatrix::identity(2, 2) * -rate;
    let h = spec.f("h");
    let horizon = spec.f("reversion_t");
    let steps = (horizon / h).round() as usize;
    let burn = steps / 2;
    let thin = ((0.25 / h).round() as usize).max(1);
    let ens = run_ensemble(
        |_, s| {
            // sums for the regression dV = -k V h + noise, then thinned post-burn-in states
            let (mut num, mut den) = (0.0, 0.0);
            let mut prev = [0.0; 2];
            let mut kept = Vec::new();
            linear_sde(&a, &sigma, h, steps, s, |j, v| {
                for i in 0..2 {
                    num += (v[i] - prev[i]) * prev[i];
                    den += prev[i] * prev[i];
                }
                prev.copy_from_slice(v);
                if j > burn && j % thin == 0 {
                    kept.extend_from_slice(v);
                }
                true
            });
            let mut o = vec![num, den];
            o.extend(kept);
            Ok(o)
        },
        spec.int("reversion_paths"),
        part_seed(seed, "minimizer"),
    )?;
    let num: f64 = ens.replicates.iter().map(|r| r[0]).sum();
    let den: f64 = ens.replicates.iter().map(|r| r[1]).sum();
    let fitted = -num / (h * den);
    out.check(TestResult::relative(
        "minimizer_reversion_rate",
        fitted,
        rate,
        spec.f("reversion_tol"),
        ens.len(),
        "least-squares mean-reversion rate",
    ));
    let rows: Vec<Vec<f64>> = ens.replicates.iter().flat_map(|r| r[2..].chunks_exact(2).map(<[f64]>::to_vec).collect::<Vec<_>>()).collect();
    let (_, cov) = mean_cov(&rows)?;
    let target = lyapunov_stationary(&(DMatrix::identity(2, 2) * rate), &(&sigma * sigma.transpose()))?;
    out.check(TestResult::new(
        "minimizer_lyapunov",
        relative_frobenius(&cov, &target),
        spec.f("lyapunov_tol"),
        rows.len(),
        "covariance of V against the Lyapunov solution with H = 4I",
    ));
    Ok(())
}

fn saddle_growth(spec: &ExperimentSpec, model: &ObjectiveModel, seed: u64, out: &mut Outcome) -> Result<Table> {
    let w = [1.0, 0.0];
    let h = spec.f("h");
    let stride = ((0.05 / h).round() as usize).max(1);
    let grid = Grid::new(h, spec.f("growth_t"))?.with_stride(stride);
    let field = |x: &[f64], o: &mut [f64]| model.grad_into(x, o);
    let reference = solve_gd_ode(&field, &w, &Grid::new(h, spec.f("growth_t"))?)?;
    let times: Vec<f64> = (0..=grid.steps / stride).map(|j| grid.time(j * stride)).collect();
    let ens = run_ensemble(
        |_, s| {
            let p = solve_limit_sde(model, &reference, &grid, Order::First, None, s)?;
            Ok((0..p.len()).map(|j| p.state(j)[0]).collect())
        },
        spec.int("replicates"),
        part_seed(seed, "saddle_growth"),
    )?;
    let s11 = model.noise_cov(&w)[(0, 0)];
    let mut table = Table::with_columns(&["t", "var_v1", "oracle_v1", "log_var_v1", "log_oracle_v1"]);
    let (mut ts, mut ls) = (Vec::new(), Vec::new());
    for (j, &t) in times.iter().enumerate().skip(1) {
        let var = sample_variance(&ens.column(j));
        let oracle = s11 * (16.0 * t).exp_m1() / 16.0;
        table.push(vec![t, var, oracle, var.ln(), oracle.ln()]);
        if t >= 0.5 - 1e-9 {
            ts.push(t);
            ls.push(var.ln());
        }
    }
    let (slope, _) = linear_fit(&ts, &ls)?;
    out.check(TestResult::relative(
        "saddle_growth_rate",
        slope,
        16.0,
        spec.f("growth_tol"),
        ens.len(),
        "fitted exponential growth rate of Var V1(t)",
    ));
    Ok(table)
}

fn escape(spec: &ExperimentSpec, model: &ObjectiveModel, seed: u64, out: &mut Outcome) -> Result<(Table, Table)> {
    let w = [1.0, 0.0];
    let a = -model.hessian(&w);
    let sigma = model.noise_sqrt(&w);
    let h = spec.f("h");
    let delta = spec.f("delta");
    let rho = spec.f("rho");
    let horizon = spec.f("escape_t");
    let steps = (horizon / h).round() as usize;
    let ms = [spec.int("m1"), spec.int("m2"), spec.int("m3")];
    let reps = spec.int("replicates");
    let mut per_rep = Table::with_columns(&["m", "escape_time", "direction"]);
    let mut selection =
        Table::with_columns(&["m", "escape_fraction", "median_escape_time", "toward_plus_e1", "toward_minus_e1", "tangential"]);
    let (mut fractions, mut medians) = (Vec::new(), Vec::new());
    for (i, &m) in ms.iter().enumerate() {
        let scale = (delta / m as f64).sqrt();
        let ens = run_ensemble(
            |_, s| {
                // time (infinite if none) and exit direction: +1/-1 along e1, 0 tangential
                let mut hit = (f64::INFINITY, f64::NAN);
                linear_sde(&a, &sigma, h, steps, s, |j, v| {
                    let r = scale * v[0].hypot(v[1]);
                    if r > rho {
                        let dir = if v[0].abs() >= v[1].abs() { v[0].signum() } else { 0.0 };
                        hit = (j as f64 * h, dir);
                        return false;
                    }
                    true
                });
                Ok(vec![hit.0, hit.1])
            },
            reps,
            part_seed(seed, &format!("escape{i}")),
        )?;
        let times = ens.column(0);
        let dirs = ens.column(1);
        let escaped = times.iter().filter(|t| t.is_finite()).count();
        let frac = escaped as f64 / reps as f64;
        let med = median(times.clone());
        let share = |d: f64| dirs.iter().filter(|&&x| x == d).count() as f64 / reps as f64;
        selection.push(vec![m as f64, frac, med, share(1.0), share(-1.0), share(0.0)]);
        for (t, d) in times.iter().zip(&dirs) {
            per_rep.push(vec![m as f64, *t, *d]);
        }
        fractions.push(frac);
        medians.push(med);
    }
    let worst_drop = fractions.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    out.check(TestResult::new(
        "escape_fraction_decreasing",
        worst_drop,
        -1.0 / reps as f64,
        reps,
        format!("largest change of the escape fraction within T as m grows (must be negative), fractions {fractions:?}"),
    ));
    let worst_rise = medians.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    out.check(TestResult::new(
        "escape_median_increasing",
        worst_rise,
        -h,
        reps,
        format!("largest decrease of the median escape time as m grows (must be negative), medians {medians:?}"),
    ));
    Ok((per_rep, selection))
}
