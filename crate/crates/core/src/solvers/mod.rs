//! Explicit Euler and Euler-Maruyama solvers for the deterministic limits,
//! the mini-batch SDEs and the linear fluctuation equations.
//!
//! Every solver advances on a uniform grid `t_j = j h`, `j = 0..N`, and records
//! every `stride`-th state. Second-order systems are solved in first-order form
//! with the singular damping `3/t` replaced by `3/max(t, eta)`.

mod linear;
mod lyapunov;
mod ode;
mod sde;

pub use linear::{partial_sum_process, solve_limit_sde, solve_limit_sde_with, solve_pi_ode, Centering};
pub use lyapunov::lyapunov_stationary;
pub use ode::{solve_gd_ode, solve_nesterov_ode};
pub use sde::{solve_gd_sde, solve_gd_sde_with, solve_nesterov_sde, solve_nesterov_sde_with, SigmaSource};

use crate::error::{Error, Result};
use crate::models::ObjectiveModel;
use crate::seeding::{stream, StreamRng};
use crate::table::Table;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A vector field `x -> f(x)` written into `out`.
pub type Field<'a> = &'a (dyn Fn(&[f64], &mut [f64]) + Sync);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    First,
    Second,
}

/// Uniform time grid with a recording stride.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub h: f64,
    pub steps: usize,
    pub stride: usize,
    /// Multiplies drift and noise by `(t+1)^{-alpha}` in the first-order SDE.
    pub diminishing_alpha: Option<f64>,
}

impl Grid {
    pub fn new(h: f64, t_end: f64) -> Result<Grid> {
        if !(h > 0.0) || !h.is_finite() || !(t_end >= h) || !t_end.is_finite() {
            return Err(Error::ParameterDomain(format!("need 0 < h <= T, got h={h}, T={t_end}")));
        }
        let n = (t_end / h).round();
        if (n * h - t_end).abs() > 1e-9 * t_end {
            return Err(Error::ParameterDomain(format!("T={t_end} is not a multiple of h={h}")));
        }
        Ok(Grid { h, steps: n as usize, stride: 1, diminishing_alpha: None })
    }

    pub fn with_stride(mut self, stride: usize) -> Grid {
        self.stride = stride.max(1);
        self
    }

    pub fn with_diminishing(mut self, alpha: f64) -> Grid {
        self.diminishing_alpha = Some(alpha);
        self
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps)
    }

    fn recorded(&self) -> usize {
        self.steps / self.stride + 1
    }

    fn records(&self, j: usize) -> bool {
        j.is_multiple_of(self.stride)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverMeta {
    pub solver: String,
    pub h: f64,
    pub stride: usize,
    pub eta_sing: Option<f64>,
    pub noise_scale: f64,
}

/// Numerical solution sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub dim: usize,
    pub times: Vec<f64>,
    states: Vec<f64>,
    velocities: Option<Vec<f64>>,
    pub meta: SolverMeta,
}

impl Path {
    fn with_capacity(dim: usize, grid: &Grid, second_order: bool, meta: SolverMeta) -> Path {
        let n = grid.recorded();
        Path {
            dim,
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n * dim),
            velocities: if second_order { Some(Vec::with_capacity(n * dim)) } else { None },
            meta,
        }
    }

    fn record(&mut self, t: f64, x: &[f64], v: Option<&[f64]>) {
        self.times.push(t);
        self.states.extend_from_slice(x);
        if let (Some(buf), Some(v)) = (self.velocities.as_mut(), v) {
            buf.extend_from_slice(v);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Spacing of recorded points.
    pub fn dt(&self) -> f64 {
        self.meta.h * self.meta.stride as f64
    }

    pub fn state(&self, j: usize) -> &[f64] {
        &self.states[j * self.dim..(j + 1) * self.dim]
    }

    pub fn velocity(&self, j: usize) -> Option<&[f64]> {
        self.velocities.as_ref().map(|v| &v[j * self.dim..(j + 1) * self.dim])
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Index of the recorded point nearest to `t`, if it lies within `dt/1e6` of `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let j = (t / self.dt()).round();
        if j < 0.0 || j as usize >= self.len() {
            return None;
        }
        let j = j as usize;
        ((self.times[j] - t).abs() <= 1e-6 * self.dt()).then_some(j)
    }

    pub fn state_at(&self, t: f64) -> Result<&[f64]> {
        self.index_of(t).map(|j| self.state(j)).ok_or_else(|| Error::Range(format!("t={t} is not a grid point of the path")))
    }

    pub fn to_table(&self) -> Table {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=self.dim).map(|i| format!("x{i}")));
        if self.velocities.is_some() {
            cols.extend((1..=self.dim).map(|i| format!("v{i}")));
        }
        let mut t = Table::new(cols);
        for j in 0..self.len() {
            let mut row = vec![self.times[j]];
            row.extend_from_slice(self.state(j));
            if let Some(v) = self.velocity(j) {
                row.extend_from_slice(v);
            }
            t.push(row);
        }
        t
    }
}

/// Matrix-valued path (row-major `p x p` per time).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPath {
    pub p: usize,
    pub times: Vec<f64>,
    mats: Vec<f64>,
}

impl MatrixPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn matrix(&self, j: usize) -> DMatrix<f64> {
        let pp = self.p * self.p;
        DMatrix::from_row_slice(self.p, self.p, &self.mats[j * pp..(j + 1) * pp])
    }

    pub fn last(&self) -> DMatrix<f64> {
        self.matrix(self.len() - 1)
    }

    pub fn to_table(&self) -> Table {
        let mut cols = vec!["t".to_string()];
        for i in 1..=self.p {
            for j in 1..=self.p {
                cols.push(format!("m{i}{j}"));
            }
        }
        let mut t = Table::new(cols);
        let pp = self.p * self.p;
        for (j, time) in self.times.iter().enumerate() {
            let mut row = vec![*time];
            row.extend_from_slice(&self.mats[j * pp..(j + 1) * pp]);
            t.push(row);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// `sigma` evaluated on a deterministic reference path.
    FrozenOnX,
    StateDependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub scale: f64,
    pub sigma_mode: SigmaMode,
    pub brownian_seed: u64,
}

impl NoiseSpec {
    /// Noise for the plain SDE, scale `sqrt(delta/m)`.
    pub fn gd(delta: f64, m: usize, sigma_mode: SigmaMode, brownian_seed: u64) -> NoiseSpec {
        NoiseSpec { scale: (delta / m as f64).sqrt(), sigma_mode, brownian_seed }
    }

    /// Noise for the accelerated SDE, scale `(delta/m^2)^{1/4}`.
    pub fn nesterov(delta: f64, m: usize, sigma_mode: SigmaMode, brownian_seed: u64) -> NoiseSpec {
        NoiseSpec { scale: (delta / (m as f64 * m as f64)).powf(0.25), sigma_mode, brownian_seed }
    }

    fn validate(&self) -> Result<()> {
        if self.scale >= 0.0 && self.scale.is_finite() {
            Ok(())
        } else {
            Err(Error::ParameterDomain(format!("noise scale must be nonnegative, got {}", self.scale)))
        }
    }
}

/// Source of Brownian increments `dB_j ~ N(0, h I)`.
pub trait Increments {
    fn next_into(&mut self, out: &mut [f64]);
}

/// Increments drawn on the fly from a seeded stream.
pub struct StreamIncrements {
    rng: StreamRng,
    sqrt_h: f64,
}

impl StreamIncrements {
    pub fn new(seed: u64, h: f64) -> Self {
        StreamIncrements { rng: stream(seed), sqrt_h: h.sqrt() }
    }
}

impl Increments for StreamIncrements {
    fn next_into(&mut self, out: &mut [f64]) {
        for o in out.iter_mut() {
            let z: f64 = self.rng.sample(StandardNormal);
            *o = self.sqrt_h * z;
        }
    }
}

/// Pre-generated increments, reusable across coupled solves.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrements {
    pub h: f64,
    pub dim: usize,
    data: Vec<f64>,
}

impl BrownianIncrements {
    /// Same values, in the same order, as [`StreamIncrements`] with this seed.
    pub fn generate(seed: u64, dim: usize, h: f64, steps: usize) -> Self {
        let mut s = StreamIncrements::new(seed, h);
        let mut data = vec![0.0; dim * steps];
        for chunk in data.chunks_exact_mut(dim) {
            s.next_into(chunk);
        }
        BrownianIncrements { h, dim, data }
    }

    pub fn steps(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn increment(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    /// Sums blocks of `factor` adjacent increments (the same path on a grid `factor` times coarser).
    pub fn coarsen(&self, factor: usize) -> Result<BrownianIncrements> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return Err(Error::Configuration(format!("cannot coarsen {} steps by {factor}", self.steps())));
        }
        let mut data = vec![0.0; self.data.len() / factor];
        for (j, out) in data.chunks_exact_mut(self.dim).enumerate() {
            for s in 0..factor {
                for (o, v) in out.iter_mut().zip(self.increment(j * factor + s)) {
                    *o += v;
                }
            }
        }
        Ok(BrownianIncrements { h: self.h * factor as f64, dim: self.dim, data })
    }

    pub fn cursor(&self) -> IncrementCursor<'_> {
        IncrementCursor { src: self, j: 0 }
    }
}

pub struct IncrementCursor<'a> {
    src: &'a BrownianIncrements,
    j: usize,
}

impl Increments for IncrementCursor<'_> {
    fn next_into(&mut self, out: &mut [f64]) {
        out.copy_from_slice(self.src.increment(self.j));
        self.j += 1;
    }
}

/// Hessian and noise root evaluated along a reference path at every solver step.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    p: usize,
    hess: Vec<f64>,
    sigma: Vec<f64>,
    constant: bool,
}

impl Coefficients {
    /// Tabulates `H(X(t_j))` and `sigma(X(t_j))` for `j = 0..=grid.steps`.
    pub fn along(model: &ObjectiveModel, reference: &Path, grid: &Grid) -> Result<Coefficients> {
        let p = model.dim();
        if reference.dim != p {
            return Err(Error::Configuration("reference path dimension differs from the model".into()));
        }
        let ratio = grid.h / reference.dt();
        let r = ratio.round();
        if r < 1.0 || (ratio - r).abs() > 1e-9 * ratio {
            return Err(Error::Configuration(format!(
                "solver step {} is not a multiple of the reference spacing {}",
                grid.h,
                reference.dt()
            )));
        }
        let r = r as usize;
        if grid.steps * r >= reference.len() {
            return Err(Error::Configuration(format!(
                "reference path ends at {} before T={}",
                reference.times.last().copied().unwrap_or(0.0),
                grid.t_end()
            )));
        }
        let constant = model.has_constant_noise() && model.is_affine();
        let count = if constant { 1 } else { grid.steps + 1 };
        let mut hess = Vec::with_capacity(count * p * p);
        let mut sigma = Vec::with_capacity(count * p * p);
        for j in 0..count {
            let x = reference.state(j * r);
            hess.extend(model.hessian(x).transpose().iter());
            sigma.extend(model.noise_sqrt(x).transpose().iter());
        }
        Ok(Coefficients { p, hess, sigma, constant })
    }

    pub fn hessian(&self, j: usize) -> &[f64] {
        let j = if self.constant { 0 } else { j };
        &self.hess[j * self.p * self.p..(j + 1) * self.p * self.p]
    }

    pub fn sigma(&self, j: usize) -> &[f64] {
        let j = if self.constant { 0 } else { j };
        &self.sigma[j * self.p * self.p..(j + 1) * self.p * self.p]
    }
}

/// `out += a * M v` with `M` row-major.
#[inline]
fn axpy_mat(a: f64, m: &[f64], v: &[f64], out: &mut [f64]) {
    let p = v.len();
    for i in 0..p {
        let row = &m[i * p..(i + 1) * p];
        out[i] += a * row.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    }
}

fn check_state(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && v.abs() <= crate::algorithms::DIVERGENCE_BOUND) {
        Ok(())
    } else {
        Err(Error::Divergence { step, detail: "solver state left the bounded region".into() })
    }
}

fn damping(t: f64, eta: f64) -> f64 {
    3.0 / t.max(eta)
}

fn resolve_eta(eta: Option<f64>, h: f64) -> Result<f64> {
    let e = eta.unwrap_or(h);
    if e > 0.0 && e.is_finite() {
        Ok(e)
    } else {
        Err(Error::ParameterDomain(format!("eta_sing must be positive, got {e}")))
    }
}
