use super::{
    axpy_mat, check_state, damping, resolve_eta, Coefficients, Grid, Increments, NoiseSpec, Path, SigmaMode, SolverMeta, StreamIncrements,
};
use crate::error::{Error, Result};
use crate::models::ObjectiveModel;

/// How `sigma` is evaluated inside a stochastic solver.
#[derive(Debug, Clone, Copy)]
pub enum SigmaSource<'a> {
    /// Tabulated along a deterministic reference path.
    Frozen(&'a Coefficients),
    /// Evaluated at the current state.
    State,
}

fn sigma_at<'a>(model: &ObjectiveModel, src: SigmaSource<'a>, j: usize, x: &[f64], buf: &'a mut Vec<f64>) -> &'a [f64] {
    match src {
        SigmaSource::Frozen(c) => c.sigma(j),
        SigmaSource::State => {
            buf.clear();
            buf.extend(model.noise_sqrt(x).transpose().iter());
            buf
        }
    }
}

fn frozen_table(model: &ObjectiveModel, grid: &Grid, noise: &NoiseSpec, reference: Option<&Path>) -> Result<Option<Coefficients>> {
    noise.validate()?;
    match noise.sigma_mode {
        SigmaMode::StateDependent => Ok(None),
        SigmaMode::FrozenOnX => {
            let r = reference.ok_or_else(|| Error::Configuration("frozen sigma needs a reference path".into()))?;
            Coefficients::along(model, r, grid).map(Some)
        }
    }
}

/// Euler-Maruyama for `dX = -grad g(X) dt - scale sigma(.) dB`.
pub fn solve_gd_sde(model: &ObjectiveModel, x0: &[f64], grid: &Grid, noise: &NoiseSpec, reference: Option<&Path>) -> Result<Path> {
    let table = frozen_table(model, grid, noise, reference)?;
    let src = table.as_ref().map_or(SigmaSource::State, SigmaSource::Frozen);
    let mut inc = StreamIncrements::new(noise.brownian_seed, grid.h);
    solve_gd_sde_with(model, x0, grid, noise.scale, src, &mut inc)
}

pub fn solve_gd_sde_with(
    model: &ObjectiveModel,
    x0: &[f64],
    grid: &Grid,
    scale: f64,
    sigma: SigmaSource,
    inc: &mut dyn Increments,
) -> Result<Path> {
    crate::error::check_dim(model.dim(), x0.len())?;
    let p = x0.len();
    let meta = SolverMeta { solver: "gd_sde".into(), h: grid.h, stride: grid.stride, eta_sing: None, noise_scale: scale };
    let mut path = Path::with_capacity(p, grid, false, meta);
    let mut x = x0.to_vec();
    let mut g = vec![0.0; p];
    let mut db = vec![0.0; p];
    let mut noise = vec![0.0; p];
    let mut buf = Vec::with_capacity(p * p);
    path.record(0.0, &x, None);
    for j in 0..grid.steps {
        let f = grid.diminishing_alpha.map_or(1.0, |a| (grid.time(j) + 1.0).powf(-a));
        model.grad_into(&x, &mut g);
        inc.next_into(&mut db);
        noise.iter_mut().for_each(|v| *v = 0.0);
        axpy_mat(1.0, sigma_at(model, sigma, j, &x, &mut buf), &db, &mut noise);
        if f == 1.0 {
            x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= grid.h * gi);
        } else {
            x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= grid.h * f * gi);
        }
        let s = scale * f;
        x.iter_mut().zip(&noise).for_each(|(xi, ni)| *xi -= s * ni);
        check_state(&x, j + 1)?;
        if grid.records(j + 1) {
            path.record(grid.time(j + 1), &x, None);
        }
    }
    Ok(path)
}

/// Euler-Maruyama for `dX = Z dt`, `dZ = -(3/max(t,eta) Z + grad g(X)) dt - scale sigma(.) dB`.
pub fn solve_nesterov_sde(
    model: &ObjectiveModel,
    x0: &[f64],
    grid: &Grid,
    eta_sing: Option<f64>,
    noise: &NoiseSpec,
    reference: Option<&Path>,
) -> Result<Path> {
    let table = frozen_table(model, grid, noise, reference)?;
    let src = table.as_ref().map_or(SigmaSource::State, SigmaSource::Frozen);
    let mut inc = StreamIncrements::new(noise.brownian_seed, grid.h);
    solve_nesterov_sde_with(model, x0, grid, eta_sing, noise.scale, src, &mut inc)
}

pub fn solve_nesterov_sde_with(
    model: &ObjectiveModel,
    x0: &[f64],
    grid: &Grid,
    eta_sing: Option<f64>,
    scale: f64,
    sigma: SigmaSource,
    inc: &mut dyn Increments,
) -> Result<Path> {
    crate::error::check_dim(model.dim(), x0.len())?;
    let eta = resolve_eta(eta_sing, grid.h)?;
    let p = x0.len();
    let meta = SolverMeta { solver: "nesterov_sde".into(), h: grid.h, stride: grid.stride, eta_sing: Some(eta), noise_scale: scale };
    let mut path = Path::with_capacity(p, grid, true, meta);
    let mut x = x0.to_vec();
    let mut z = vec![0.0; p];
    let mut g = vec![0.0; p];
    let mut db = vec![0.0; p];
    let mut noise = vec![0.0; p];
    let mut buf = Vec::with_capacity(p * p);
    path.record(0.0, &x, Some(&z));
    for j in 0..grid.steps {
        let c = damping(grid.time(j), eta);
        model.grad_into(&x, &mut g);
        inc.next_into(&mut db);
        noise.iter_mut().for_each(|v| *v = 0.0);
        axpy_mat(1.0, sigma_at(model, sigma, j, &x, &mut buf), &db, &mut noise);
        for i in 0..p {
            x[i] += grid.h * z[i];
            z[i] -= grid.h * (c * z[i] + g[i]);
            z[i] -= scale * noise[i];
        }
        check_state(&x, j + 1)?;
        if grid.records(j + 1) {
            path.record(grid.time(j + 1), &x, Some(&z));
        }
    }
    Ok(path)
}
