use super::{check_state, damping, resolve_eta, Field, Grid, Path, SolverMeta};
use crate::error::Result;

/// Explicit Euler for `X' = -f(X)`.
pub fn solve_gd_ode(field: Field, x0: &[f64], grid: &Grid) -> Result<Path> {
    let meta = SolverMeta { solver: "gd_ode".into(), h: grid.h, stride: grid.stride, eta_sing: None, noise_scale: 0.0 };
    let mut path = Path::with_capacity(x0.len(), grid, false, meta);
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    path.record(0.0, &x, None);
    for j in 0..grid.steps {
        field(&x, &mut g);
        x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= grid.h * gi);
        check_state(&x, j + 1)?;
        if grid.records(j + 1) {
            path.record(grid.time(j + 1), &x, None);
        }
    }
    Ok(path)
}

/// Euler on `X' = Z`, `Z' = -3/max(t, eta) Z - f(X)` with `X(0) = x0`, `Z(0) = 0`.
pub fn solve_nesterov_ode(field: Field, x0: &[f64], grid: &Grid, eta_sing: Option<f64>) -> Result<Path> {
    let eta = resolve_eta(eta_sing, grid.h)?;
    let meta = SolverMeta { solver: "nesterov_ode".into(), h: grid.h, stride: grid.stride, eta_sing: Some(eta), noise_scale: 0.0 };
    let p = x0.len();
    let mut path = Path::with_capacity(p, grid, true, meta);
    let mut x = x0.to_vec();
    let mut z = vec![0.0; p];
    let mut g = vec![0.0; p];
    path.record(0.0, &x, Some(&z));
    for j in 0..grid.steps {
        let c = damping(grid.time(j), eta);
        field(&x, &mut g);
        for i in 0..p {
            x[i] += grid.h * z[i];
            z[i] -= grid.h * (c * z[i] + g[i]);
        }
        check_state(&x, j + 1)?;
        if grid.records(j + 1) {
            path.record(grid.time(j + 1), &x, Some(&z));
        }
    }
    Ok(path)
}
