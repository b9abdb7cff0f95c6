//! Objective models: population objective `g`, its derivatives, per-datum
//! gradients, the gradient-noise covariance and a datum sampler.
//!
//! Parameters and data are plain `f64` slices. A datum is a fixed-length
//! record whose layout depends on the model:
//!
//! | model            | datum layout                  |
//! |------------------|-------------------------------|
//! | quadratic mean   | `u1, u2`                      |
//! | scalar quadratic | `u`                           |
//! | linreg (both)    | `response, covariate_1..p`    |
//! | tensor           | `w1, w2`                      |

use crate::error::{check_dim, Error, Result};
use crate::seeding::StreamRng;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub type ParamVector = Vec<f64>;

/// Distribution of the i.i.d. components of `W` in the tensor model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WDist {
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    UniformSym,
    Rademacher,
    /// Standard normal. Rejected by [`make_tensor4_d2`].
    Gaussian,
}

impl WDist {
    /// Raw moments `psi_0..psi_8`.
    pub fn moments(self) -> [f64; 9] {
        let mut psi = [0.0; 9];
        for k in (0..9).step_by(2) {
            psi[k] = match self {
                WDist::UniformSym => 3f64.powi(k as i32 / 2) / (k as f64 + 1.0),
                WDist::Rademacher => 1.0,
                WDist::Gaussian => (1..k).step_by(2).map(|j| j as f64).product(),
            };
        }
        psi
    }

    fn sample(self, rng: &mut StreamRng) -> f64 {
        match self {
            WDist::UniformSym => (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt(),
            WDist::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            WDist::Gaussian => rng.sample(StandardNormal),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ModelKind {
    QuadraticMean { theta: [f64; 2], tau: f64 },
    Scalar { theta: f64, sigma: f64 },
    LinregRandom { alpha: [[f64; 2]; 2], root: [[f64; 2]; 2], tau: f64, theta: [f64; 2] },
    LinregFixed { theta: Vec<f64>, tau: f64, n: usize, design: Vec<f64> },
    Tensor { dist: WDist, psi: [f64; 9] },
}

/// An optimization problem bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveModel {
    kind: ModelKind,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite_all(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} has non-finite entries")))
    }
}

/// Quadratic loss around the mean of `U = (N(theta_1, tau^2), Exp(mean theta_2))`.
pub fn make_quadratic_mean(theta_check: &[f64], tau: f64) -> Result<ObjectiveModel> {
    check_dim(2, theta_check.len())?;
    finite_all("theta_check", theta_check)?;
    positive("tau", tau)?;
    positive("theta_check[1] (exponential mean)", theta_check[1])?;
    Ok(ObjectiveModel { kind: ModelKind::QuadraticMean { theta: [theta_check[0], theta_check[1]], tau } })
}

/// One-dimensional quadratic loss `(u - theta)^2 / 2` with `U ~ N(theta_check, sigma^2)`.
/// `sigma = 0` gives a deterministic model.
pub fn make_scalar_quadratic(theta_check: f64, sigma: f64) -> Result<ObjectiveModel> {
    if !theta_check.is_finite() || !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::ParameterDomain(format!("invalid scalar model ({theta_check}, {sigma})")));
    }
    Ok(ObjectiveModel { kind: ModelKind::Scalar { theta: theta_check, sigma } })
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Regression `U1 = U2' theta_check + tau eps` with Gaussian covariates `U2 ~ N(0, alpha)`.
pub fn make_linreg_random(alpha: [[f64; 2]; 2], tau: f64, theta_check: &[f64]) -> Result<ObjectiveModel> {
    check_dim(2, theta_check.len())?;
    finite_all("theta_check", theta_check)?;
    positive("tau", tau)?;
    let a = DMatrix::from_row_slice(2, 2, &[alpha[0][0], alpha[0][1], alpha[1][0], alpha[1][1]]);
    if !a.iter().all(|x| x.is_finite()) || (alpha[0][1] - alpha[1][0]).abs() > 1e-14 {
        return Err(Error::ParameterDomain("alpha must be finite and symmetric".into()));
    }
    let min_eig = SymmetricEigen::new(a.clone()).eigenvalues.min();
    if min_eig < -1e-12 {
        return Err(Error::ParameterDomain(format!("alpha is not positive semidefinite (eigenvalue {min_eig})")));
    }
    let r = sym_sqrt(&a);
    Ok(ObjectiveModel {
        kind: ModelKind::LinregRandom {
            alpha,
            root: [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]],
            tau,
            theta: [theta_check[0], theta_check[1]],
        },
    })
}

/// Builds an `n x p` design with orthogonal columns of squared norm `n`.
///
/// Column `j` starts as the Walsh sign pattern `(-1)^{bit j of i}` and is then
/// Gram-Schmidt orthogonalized against earlier columns.
fn orthogonal_design(n: usize, p: usize) -> Result<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut c: Vec<f64> = (0..n).map(|i| if (i >> j) & 1 == 1 { -1.0 } else { 1.0 }).collect();
        if j == 0 {
            // alternate so the first column is not constant
            c = (0..n).map(|i| if i % 2 == 1 { -1.0 } else { 1.0 }).collect();
        }
        for _ in 0..2 {
            for prev in &cols {
                let dot: f64 = c.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                for (ci, pi) in c.iter_mut().zip(prev) {
                    *ci -= dot * pi;
                }
            }
        }
        let norm2: f64 = c.iter().map(|x| x * x).sum();
        if norm2 < 1e-8 {
            return Err(Error::ParameterDomain(format!("cannot build an orthogonal design with n={n}, p={p}")));
        }
        let s = (n as f64 / norm2).sqrt();
        cols.push(c.into_iter().map(|x| x * s).collect());
    }
    let mut design = vec![0.0; n * p];
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            design[i * p + j] = *v;
        }
    }
    Ok(design)
}

/// Fixed orthogonal design regression with `n` rows.
pub fn make_linreg_fixed(theta_check: &[f64], tau: f64, n: usize) -> Result<ObjectiveModel> {
    let p = theta_check.len();
    if p == 0 || n < p {
        return Err(Error::ParameterDomain(format!("need n >= p >= 1, got n={n}, p={p}")));
    }
    finite_all("theta_check", theta_check)?;
    positive("tau", tau)?;
    let design = orthogonal_design(n, p)?;
    Ok(ObjectiveModel { kind: ModelKind::LinregFixed { theta: theta_check.to_vec(), tau, n, design } })
}

/// Two-dimensional orthogonal tensor decomposition in whitened coordinates.
pub fn make_tensor4_d2(w_dist: WDist) -> Result<ObjectiveModel> {
    let psi = w_dist.moments();
    if (psi[4] - 3.0).abs() < 1e-12 {
        return Err(Error::UnidentifiableTensor);
    }
    Ok(ObjectiveModel { kind: ModelKind::Tensor { dist: w_dist, psi } })
}

fn binom6(l: usize) -> f64 {
    [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0][l]
}

impl ObjectiveModel {
    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::QuadraticMean { .. } => "quadratic_mean",
            ModelKind::Scalar { .. } => "scalar_quadratic",
            ModelKind::LinregRandom { .. } => "linreg_random",
            ModelKind::LinregFixed { .. } => "linreg_fixed",
            ModelKind::Tensor { .. } => "tensor4_d2",
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ModelKind::Scalar { .. } => 1,
            ModelKind::LinregFixed { theta, .. } => theta.len(),
            _ => 2,
        }
    }

    pub fn datum_len(&self) -> usize {
        match &self.kind {
            ModelKind::QuadraticMean { .. } | ModelKind::Tensor { .. } => 2,
            ModelKind::Scalar { .. } => 1,
            ModelKind::LinregRandom { .. } => 3,
            ModelKind::LinregFixed { theta, .. } => theta.len() + 1,
        }
    }

    /// True when `grad` and every `datum_grad` are affine in the parameter.
    pub fn is_affine(&self) -> bool {
        !matches!(self.kind, ModelKind::Tensor { .. })
    }

    pub fn minimizer(&self) -> Option<ParamVector> {
        match &self.kind {
            ModelKind::QuadraticMean { theta, .. } | ModelKind::LinregRandom { theta, .. } => Some(theta.to_vec()),
            ModelKind::Scalar { theta, .. } => Some(vec![*theta]),
            ModelKind::LinregFixed { theta, .. } => Some(theta.clone()),
            ModelKind::Tensor { .. } => None,
        }
    }

    /// Moments `psi_0..psi_8` of the tensor model's `W` components.
    pub fn tensor_moments(&self) -> Option<[f64; 9]> {
        match &self.kind {
            ModelKind::Tensor { psi, .. } => Some(*psi),
            _ => None,
        }
    }

    /// Row-major `n x p` design of the fixed-design regression.
    pub fn design(&self) -> Option<&[f64]> {
        match &self.kind {
            ModelKind::LinregFixed { design, .. } => Some(design),
            _ => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::QuadraticMean { theta, tau } => {
                let q: f64 = x.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
                0.5 * (q + tau * tau + theta[1] * theta[1])
            }
            ModelKind::Scalar { theta, sigma } => 0.5 * ((x[0] - theta).powi(2) + sigma * sigma),
            ModelKind::LinregRandom { alpha, tau, theta, .. } => {
                let b = [x[0] - theta[0], x[1] - theta[1]];
                let q = alpha[0][0] * b[0] * b[0] + 2.0 * alpha[0][1] * b[0] * b[1] + alpha[1][1] * b[1] * b[1];
                0.5 * (tau * tau + q)
            }
            ModelKind::LinregFixed { theta, tau, .. } => {
                let q: f64 = x.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
                0.5 * (q + tau * tau)
            }
            ModelKind::Tensor { .. } => {
                let n2 = x[0] * x[0] + x[1] * x[1];
                -(x[0].powi(4) + x[1].powi(4)) / (n2 * n2)
            }
        }
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::QuadraticMean { theta, .. } => {
                out[0] = x[0] - theta[0];
                out[1] = x[1] - theta[1];
            }
            ModelKind::Scalar { theta, .. } => out[0] = x[0] - theta,
            ModelKind::LinregRandom { alpha, theta, .. } => {
                let b = [x[0] - theta[0], x[1] - theta[1]];
                out[0] = alpha[0][0] * b[0] + alpha[0][1] * b[1];
                out[1] = alpha[1][0] * b[0] + alpha[1][1] * b[1];
            }
            ModelKind::LinregFixed { theta, .. } => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(theta) {
                    *o = a - b;
                }
            }
            ModelKind::Tensor { .. } => {
                let s = x[0].powi(4) + x[1].powi(4);
                for i in 0..2 {
                    out[i] = -4.0 * x[i] * (x[i] * x[i] - s);
                }
            }
        }
    }

    pub fn grad(&self, x: &[f64]) -> ParamVector {
        let mut g = vec![0.0; self.dim()];
        self.grad_into(x, &mut g);
        g
    }

    /// Hessian of `g`; for the tensor model the linearization matrix
    /// `-12 diag(x_i^2) + 4 |x|_4^4 I` of the fluctuation equation.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let p = self.dim();
        match &self.kind {
            ModelKind::QuadraticMean { .. } | ModelKind::Scalar { .. } | ModelKind::LinregFixed { .. } => DMatrix::identity(p, p),
            ModelKind::LinregRandom { alpha, .. } => DMatrix::from_row_slice(2, 2, &[alpha[0][0], alpha[0][1], alpha[1][0], alpha[1][1]]),
            ModelKind::Tensor { .. } => {
                let s = x[0].powi(4) + x[1].powi(4);
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(2, x.iter().map(|xi| -12.0 * xi * xi + 4.0 * s)))
            }
        }
    }

    /// Covariance of the per-datum gradient at `x`.
    pub fn noise_cov(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.kind {
            ModelKind::QuadraticMean { theta, tau } => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![tau * tau, theta[1] * theta[1]]))
            }
            ModelKind::Scalar { sigma, .. } => DMatrix::from_element(1, 1, sigma * sigma),
            ModelKind::LinregRandom { alpha, tau, theta, .. } => {
                let a = DMatrix::from_row_slice(2, 2, &[alpha[0][0], alpha[0][1], alpha[1][0], alpha[1][1]]);
                let b = nalgebra::DVector::from_vec(vec![x[0] - theta[0], x[1] - theta[1]]);
                let ab = &a * &b;
                let q = b.dot(&ab);
                &a * (q + tau * tau) + &ab * ab.transpose()
            }
            ModelKind::LinregFixed { theta, tau, .. } => {
                let p = theta.len();
                DMatrix::identity(p, p) * (tau * tau)
            }
            ModelKind::Tensor { psi, .. } => tensor_noise_cov(psi, x),
        }
    }

    /// Symmetric square root `sigma(x)` of [`Self::noise_cov`].
    pub fn noise_sqrt(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.kind {
            ModelKind::QuadraticMean { theta, tau } => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![*tau, theta[1].abs()])),
            ModelKind::Scalar { sigma, .. } => DMatrix::from_element(1, 1, *sigma),
            ModelKind::LinregFixed { theta, tau, .. } => DMatrix::identity(theta.len(), theta.len()) * *tau,
            _ => sym_sqrt(&self.noise_cov(x)),
        }
    }

    /// True when `noise_cov` does not depend on the parameter.
    pub fn has_constant_noise(&self) -> bool {
        matches!(self.kind, ModelKind::QuadraticMean { .. } | ModelKind::Scalar { .. } | ModelKind::LinregFixed { .. })
    }

    /// Draws one datum from the population distribution into `out`.
    pub fn sample_datum(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match &self.kind {
            ModelKind::QuadraticMean { theta, tau } => {
                let z: f64 = rng.sample(StandardNormal);
                let u: f64 = rng.random();
                out[0] = theta[0] + tau * z;
                out[1] = -theta[1] * (-u).ln_1p();
            }
            ModelKind::Scalar { theta, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                out[0] = theta + sigma * z;
            }
            ModelKind::LinregRandom { root, tau, theta, .. } => {
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                let h0 = root[0][0] * z0 + root[0][1] * z1;
                let h1 = root[1][0] * z0 + root[1][1] * z1;
                out[0] = h0 * theta[0] + h1 * theta[1] + tau * e;
                out[1] = h0;
                out[2] = h1;
            }
            ModelKind::LinregFixed { theta, tau, n, design } => {
                let i = rng.random_range(0..*n);
                self.fixed_row(theta, *tau, design, i, rng, out);
            }
            ModelKind::Tensor { dist, .. } => {
                out[0] = dist.sample(rng);
                out[1] = dist.sample(rng);
            }
        }
    }

    fn fixed_row(&self, theta: &[f64], tau: f64, design: &[f64], i: usize, rng: &mut StreamRng, out: &mut [f64]) {
        let p = theta.len();
        let row = &design[i * p..(i + 1) * p];
        let e: f64 = rng.sample(StandardNormal);
        out[0] = row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + tau * e;
        out[1..].copy_from_slice(row);
    }

    /// `n` records, flat with stride [`Self::datum_len`]. The fixed-design
    /// regression walks its design rows in order; other models draw i.i.d.
    pub fn generate_records(&self, n: usize, rng: &mut StreamRng) -> Vec<f64> {
        let d = self.datum_len();
        let mut out = vec![0.0; n * d];
        match &self.kind {
            ModelKind::LinregFixed { theta, tau, n: rows, design } => {
                for (i, rec) in out.chunks_exact_mut(d).enumerate() {
                    self.fixed_row(theta, *tau, design, i % rows, rng, rec);
                }
            }
            _ => {
                for rec in out.chunks_exact_mut(d) {
                    self.sample_datum(rng, rec);
                }
            }
        }
        out
    }

    /// Per-datum loss gradient.
    pub fn datum_grad_into(&self, x: &[f64], datum: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::QuadraticMean { .. } | ModelKind::Scalar { .. } => {
                for ((o, a), u) in out.iter_mut().zip(x).zip(datum) {
                    *o = a - u;
                }
            }
            ModelKind::LinregRandom { .. } | ModelKind::LinregFixed { .. } => {
                let cov = &datum[1..];
                let r: f64 = cov.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - datum[0];
                for (o, c) in out.iter_mut().zip(cov) {
                    *o = c * r;
                }
            }
            ModelKind::Tensor { psi, .. } => {
                let ip = x[0] * datum[0] + x[1] * datum[1];
                let f = -4.0 * ip.powi(3) / (psi[4] - 3.0);
                let g = [f * datum[0], f * datum[1]];
                let n2 = x[0] * x[0] + x[1] * x[1];
                let radial = (g[0] * x[0] + g[1] * x[1]) / n2;
                out[0] = g[0] - radial * x[0];
                out[1] = g[1] - radial * x[1];
            }
        }
    }

    /// Post-step hook applied to every iterate (unit-sphere projection for the tensor model).
    pub fn post_step(&self, x: &mut [f64]) {
        if let ModelKind::Tensor { .. } = self.kind {
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                x.iter_mut().for_each(|v| *v /= n);
            }
        }
    }

    pub fn has_post_step(&self) -> bool {
        matches!(self.kind, ModelKind::Tensor { .. })
    }
}

/// `16 Cov((x'W)^3 W)` from the binomial moment expansions.
fn tensor_noise_cov(psi: &[f64; 9], x: &[f64]) -> DMatrix<f64> {
    let (u1, u2) = (x[0], x[1]);
    let m = [u1.powi(3) * psi[4] + 3.0 * u1 * u2 * u2, u2.powi(3) * psi[4] + 3.0 * u1 * u1 * u2];
    let mut e11 = 0.0;
    let mut e22 = 0.0;
    let mut e12 = 0.0;
    for l in 0..=6usize {
        let c = binom6(l);
        let a = u1.powi(l as i32) * u2.powi(6 - l as i32);
        let b = u2.powi(l as i32) * u1.powi(6 - l as i32);
        e11 += c * a * psi[l + 2] * psi[6 - l];
        e22 += c * b * psi[l + 2] * psi[6 - l];
        e12 += c * a * psi[l + 1] * psi[7 - l];
    }
    DMatrix::from_row_slice(
        2,
        2,
        &[16.0 * (e11 - m[0] * m[0]), 16.0 * (e12 - m[0] * m[1]), 16.0 * (e12 - m[0] * m[1]), 16.0 * (e22 - m[1] * m[1])],
    )
}

pub fn eval_value(model: &ObjectiveModel, theta: &[f64]) -> Result<f64> {
    check_dim(model.dim(), theta.len())?;
    Ok(model.value(theta))
}

pub fn eval_grad(model: &ObjectiveModel, theta: &[f64]) -> Result<ParamVector> {
    check_dim(model.dim(), theta.len())?;
    Ok(model.grad(theta))
}

pub fn eval_hessian(model: &ObjectiveModel, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(model.dim(), theta.len())?;
    Ok(model.hessian(theta))
}

pub fn eval_noise_cov(model: &ObjectiveModel, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(model.dim(), theta.len())?;
    Ok(model.noise_cov(theta))
}

pub fn eval_datum_grad(model: &ObjectiveModel, theta: &[f64], datum: &[f64]) -> Result<ParamVector> {
    check_dim(model.dim(), theta.len())?;
    check_dim(model.datum_len(), datum.len())?;
    let mut g = vec![0.0; model.dim()];
    model.datum_grad_into(theta, datum, &mut g);
    Ok(g)
}
