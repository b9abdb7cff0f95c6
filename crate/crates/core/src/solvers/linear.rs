use super::{
    axpy_mat, check_state, damping, resolve_eta, Coefficients, Grid, Increments, MatrixPath, Order, Path, SolverMeta, StreamIncrements,
};
use crate::algorithms::{Family, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::models::ObjectiveModel;
use serde::{Deserialize, Serialize};

/// Euler for `Pi' = -H(X) Pi - sigma(X)` (first order) or
/// `Pi'' + 3/max(t,eta) Pi' + H(X) Pi + sigma(X) = 0` (second order), `Pi(0) = Pi'(0) = 0`.
pub fn solve_pi_ode(model: &ObjectiveModel, reference: &Path, grid: &Grid, order: Order, eta_sing: Option<f64>) -> Result<MatrixPath> {
    let coef = Coefficients::along(model, reference, grid)?;
    let eta = resolve_eta(eta_sing, grid.h)?;
    let p = model.dim();
    let pp = p * p;
    let mut pi = vec![0.0; pp];
    let mut w = vec![0.0; pp];
    let mut hp = vec![0.0; pp];
    let mut times = vec![0.0];
    let mut mats = pi.clone();
    for j in 0..grid.steps {
        let hm = coef.hessian(j);
        let s = coef.sigma(j);
        for r in 0..p {
            for c in 0..p {
                hp[r * p + c] = (0..p).map(|k| hm[r * p + k] * pi[k * p + c]).sum();
            }
        }
        match order {
            Order::First => {
                for i in 0..pp {
                    pi[i] -= grid.h * (hp[i] + s[i]);
                }
            }
            Order::Second => {
                let d = damping(grid.time(j), eta);
                for i in 0..pp {
                    pi[i] += grid.h * w[i];
                    w[i] -= grid.h * (d * w[i] + hp[i] + s[i]);
                }
            }
        }
        check_state(&pi, j + 1)?;
        if grid.records(j + 1) {
            times.push(grid.time(j + 1));
            mats.extend_from_slice(&pi);
        }
    }
    Ok(MatrixPath { p, times, mats })
}

/// Euler-Maruyama for the linear fluctuation SDE driven by a seeded stream.
pub fn solve_limit_sde(
    model: &ObjectiveModel,
    reference: &Path,
    grid: &Grid,
    order: Order,
    eta_sing: Option<f64>,
    brownian_seed: u64,
) -> Result<Path> {
    let coef = Coefficients::along(model, reference, grid)?;
    let mut inc = StreamIncrements::new(brownian_seed, grid.h);
    solve_limit_sde_with(&coef, model.dim(), grid, order, eta_sing, &mut inc)
}

/// `dV = -H V dt - sigma dB` (first order) or the damped second-order analog in `(V, V')`.
pub fn solve_limit_sde_with(
    coef: &Coefficients,
    p: usize,
    grid: &Grid,
    order: Order,
    eta_sing: Option<f64>,
    inc: &mut dyn Increments,
) -> Result<Path> {
    let eta = resolve_eta(eta_sing, grid.h)?;
    let meta = SolverMeta {
        solver: format!("limit_sde_{}", if order == Order::First { "first" } else { "second" }),
        h: grid.h,
        stride: grid.stride,
        eta_sing: (order == Order::Second).then_some(eta),
        noise_scale: 1.0,
    };
    let second = order == Order::Second;
    let mut path = Path::with_capacity(p, grid, second, meta);
    let mut v = vec![0.0; p];
    let mut w = vec![0.0; p];
    let mut db = vec![0.0; p];
    let mut drift = vec![0.0; p];
    let mut noise = vec![0.0; p];
    path.record(0.0, &v, second.then_some(&w[..]));
    for j in 0..grid.steps {
        inc.next_into(&mut db);
        drift.iter_mut().for_each(|x| *x = 0.0);
        noise.iter_mut().for_each(|x| *x = 0.0);
        axpy_mat(1.0, coef.hessian(j), &v, &mut drift);
        axpy_mat(1.0, coef.sigma(j), &db, &mut noise);
        if second {
            let d = damping(grid.time(j), eta);
            for i in 0..p {
                v[i] += grid.h * w[i];
                w[i] -= grid.h * (d * w[i] + drift[i]) + noise[i];
            }
        } else {
            for i in 0..p {
                v[i] -= grid.h * drift[i] + noise[i];
            }
        }
        check_state(&v, j + 1)?;
        if grid.records(j + 1) {
            path.record(grid.time(j + 1), &v, second.then_some(&w[..]));
        }
    }
    Ok(path)
}

/// Centering of the partial-sum process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// `grad g` at the point where the mini-batch gradient was evaluated (a martingale).
    Iterate,
    /// `grad g(X(t_k))` on the deterministic limit path.
    Limit,
}

/// Normalized cumulative sum of mini-batch gradient errors on the grid `t_k = k Delta`.
/// Scale `(m delta)^{1/2}` for plain and `(m^2 delta)^{1/4}` for accelerated trajectories.
pub fn partial_sum_process(
    model: &ObjectiveModel,
    traj: &Trajectory,
    reference: Option<&Path>,
    m: usize,
    centering: Centering,
) -> Result<Path> {
    check_dim(model.dim(), traj.dim)?;
    if m == 0 {
        return Err(Error::ParameterDomain("batch size must be positive".into()));
    }
    let scale = match traj.family {
        Family::Plain => (m as f64 * traj.delta).sqrt(),
        Family::Nesterov => (m as f64 * m as f64 * traj.delta).powf(0.25),
    };
    let p = traj.dim;
    let grid = Grid { h: traj.step_scale, steps: traj.steps(), stride: 1, diminishing_alpha: None };
    let meta = SolverMeta { solver: "partial_sum".into(), h: traj.step_scale, stride: 1, eta_sing: None, noise_scale: scale };
    let mut out = Path::with_capacity(p, &grid, false, meta);
    let mut acc = vec![0.0; p];
    let mut g = vec![0.0; p];
    out.record(0.0, &acc, None);
    for k in 1..=traj.steps() {
        let t = traj.times[k];
        match centering {
            Centering::Iterate => model.grad_into(traj.eval_point(k), &mut g),
            Centering::Limit => {
                let r = reference.ok_or_else(|| Error::Configuration("limit centering needs a reference path".into()))?;
                let j = r.index_of(t).ok_or_else(|| Error::Configuration(format!("reference path has no grid point at t={t}")))?;
                model.grad_into(r.state(j), &mut g);
            }
        }
        for i in 0..p {
            acc[i] += traj.grad_used(k)[i] - g[i];
        }
        let h: Vec<f64> = acc.iter().map(|a| scale * a).collect();
        out.record(t, &h, None);
    }
    Ok(out)
}
