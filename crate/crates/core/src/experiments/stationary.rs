//! Long-run behaviour of the SGD diffusion.

use super::{part_seed, ExperimentSpec, Outcome, PlotHint};
use crate::analysis::{gibbs_density_check, ks_test_normal, mean_cov, rate_slope, relative_frobenius, run_ensemble, TestResult};
use crate::error::{Error, Result};
use crate::models::{make_linreg_random, make_quadratic_mean, make_scalar_quadratic, ObjectiveModel};
use crate::solvers::{lyapunov_stationary, solve_gd_sde, Grid, NoiseSpec, SigmaMode};
use crate::table::Table;
use nalgebra::DMatrix;

struct Run {
    delta: f64,
    m: usize,
    grid: Grid,
    /// Recorded indices pooled after burn-in.
    keep: Vec<usize>,
}

impl Run {
    fn new(spec: &ExperimentSpec, m: usize) -> Result<Run> {
        let horizon = spec.f("horizon");
        let h = spec.f("h");
        let thin = spec.f("thin");
        let stride = (thin / h).round() as usize;
        if stride == 0 || ((stride as f64) * h - thin).abs() > 1e-9 * thin {
            return Err(Error::ParameterDomain(format!("thin={thin} must be a multiple of h={h}")));
        }
        let grid = Grid::new(h, horizon)?.with_stride(stride);
        let burn = horizon / 2.0;
        let keep = (0..=grid.steps / stride).filter(|&j| j as f64 * thin >= burn - 1e-9).collect();
        Ok(Run { delta: spec.f("delta"), m, grid, keep })
    }

    /// Pooled post-burn-in samples of `X - center`, started at `center`.
    fn samples(&self, model: &ObjectiveModel, center: &[f64], reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let ens = run_ensemble(
            |_, s| {
                let noise = NoiseSpec::gd(self.delta, self.m, SigmaMode::StateDependent, s);
                let p = solve_gd_sde(model, center, &self.grid, &noise, None)?;
                Ok(self.keep.iter().flat_map(|&j| p.state(j).iter().zip(center).map(|(a, b)| a - b)).collect())
            },
            reps,
            seed,
        )?;
        let d = center.len();
        Ok(ens.replicates.iter().flat_map(|r| r.chunks_exact(d).map(<[f64]>::to_vec).collect::<Vec<_>>()).collect())
    }
}

fn cov_row(table: &mut Table, case: f64, est: &DMatrix<f64>, target: &DMatrix<f64>) {
    table.push(vec![case, est[(0, 0)], est[(0, 1)], est[(1, 1)], target[(0, 0)], target[(0, 1)], target[(1, 1)]]);
}

pub(super) fn run(spec: &ExperimentSpec, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let m = spec.int("m");
    let run = Run::new(spec, m)?;
    let scale = (m as f64 / run.delta).sqrt();
    let reps = spec.int("replicates");
    let tol = spec.f("cov_tol");
    let mut covs = Table::with_columns(&["case", "g11", "g12", "g22", "target11", "target12", "target22"]);

    // quadratic mean: target diag(tau^2, theta2^2)/2
    let (tau, th2) = (spec.f("tau"), spec.f("theta2"));
    let theta = [0.0, th2];
    let quad = make_quadratic_mean(&theta, tau)?;
    let rows: Vec<Vec<f64>> = run
        .samples(&quad, &theta, reps, part_seed(seed, "quadratic"))?
        .into_iter()
        .map(|r| r.iter().map(|v| scale * v).collect())
        .collect();
    let (_, gq) = mean_cov(&rows)?;
    let hq = quad.hessian(&theta);
    let sq = quad.noise_cov(&theta);
    let lyap = lyapunov_stationary(&hq, &sq)?;
    let closed = DMatrix::from_diagonal(&nalgebra::dvector![tau * tau / 2.0, th2 * th2 / 2.0]);
    out.check(TestResult::new(
        "quadratic_vs_lyapunov",
        relative_frobenius(&gq, &lyap),
        tol,
        rows.len(),
        "normalized stationary covariance against the Lyapunov solution",
    ));
    out.check(TestResult::new(
        "quadratic_vs_closed_form",
        relative_frobenius(&gq, &closed),
        tol,
        rows.len(),
        "normalized stationary covariance against diag(tau^2, theta2^2)/2",
    ));
    let resid = (&gq * &hq + &hq * &gq - &sq).norm() / sq.norm();
    out.check(TestResult::new(
        "quadratic_lyapunov_residual",
        resid,
        tol,
        rows.len(),
        "|G H + H G - sigma sigma'| / |sigma sigma'| for the estimate",
    ));
    cov_row(&mut covs, 1.0, &gq, &closed);

    // random-design regression with a non-diagonal Hessian
    let lin_theta = [0.2, -0.1];
    let lin = make_linreg_random([[1.0, 0.3], [0.3, 0.5]], 0.5, &lin_theta)?;
    let rows: Vec<Vec<f64>> = run
        .samples(&lin, &lin_theta, reps, part_seed(seed, "linreg"))?
        .into_iter()
        .map(|r| r.iter().map(|v| scale * v).collect())
        .collect();
    let (_, gl) = mean_cov(&rows)?;
    let target = lyapunov_stationary(&lin.hessian(&lin_theta), &lin.noise_cov(&lin_theta))?;
    out.check(TestResult::new(
        "linreg_vs_lyapunov",
        relative_frobenius(&gl, &target),
        tol,
        rows.len(),
        "normalized stationary covariance against the Lyapunov solution",
    ));
    cov_row(&mut covs, 2.0, &gl, &target);

    // one-dimensional Gibbs law
    let scalar = make_scalar_quadratic(0.3, 1.0)?;
    let gibbs_n = spec.int("gibbs_samples");
    let per = run.keep.len();
    let g_reps = gibbs_n.div_ceil(per).max(2);
    let mut xs: Vec<f64> = run.samples(&scalar, &[0.3], g_reps, part_seed(seed, "gibbs"))?.into_iter().map(|r| r[0] + 0.3).collect();
    xs.truncate(gibbs_n);
    let level = spec.f("ks_level");
    let mut chi = gibbs_density_check(&scalar, run.delta, m, &xs, level)?;
    chi.name = "gibbs_chi_square".into();
    out.check(chi);
    let sd = (run.delta / (2.0 * m as f64)).sqrt();
    let mut ks = ks_test_normal(&xs, 0.3, sd, level)?;
    ks.name = "gibbs_ks".into();
    out.check(ks);
    let mut gs = Table::with_columns(&["x"]);
    xs.iter().for_each(|x| gs.push(vec![*x]));

    // spread of the un-normalized iterate against delta/m
    let mut spread = Table::with_columns(&["m", "delta_over_m", "trace_cov"]);
    let mut ratios = Vec::new();
    let mut traces = Vec::new();
    for (i, factor) in [1usize, 2, 4].into_iter().enumerate() {
        let r = Run::new(spec, m * factor)?;
        let rows = r.samples(&quad, &theta, reps / 2, part_seed(seed, &format!("spread{i}")))?;
        let (_, c) = mean_cov(&rows)?;
        ratios.push(r.delta / r.m as f64);
        traces.push(c.trace());
        spread.push(vec![r.m as f64, r.delta / r.m as f64, c.trace()]);
    }
    let slope = rate_slope(&ratios, &traces)?;
    out.check(TestResult::within(
        "spread_slope",
        slope,
        1.0,
        spec.f("slope_tol"),
        reps / 2,
        "log-log slope of stationary variance against delta/m",
    ));

    out.artifact("stationary_cov.csv", covs, None);
    out.artifact("gibbs_samples.csv", gs, None);
    out.artifact("spread.csv", spread, PlotHint::loglog("delta_over_m", &["trace_cov"]));
    Ok(out)
}
