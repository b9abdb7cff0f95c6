//! Monte-Carlo ensembles and the statistical checks built on them.

use crate::error::{check_dim, Error, Result};
use crate::models::ObjectiveModel;
use crate::oracles::adaptive_simpson;
use crate::seeding::derive_seed;
use crate::solvers::Path;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// `R` replicate outcome vectors with the seeds that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub replicates: Vec<Vec<f64>>,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    /// Component `i` of every replicate.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.replicates.iter().map(|r| r[i]).collect()
    }
}

/// Runs `sim(r, seed_r)` for `r = 0..R` in parallel; `seed_r` depends only on `(master_seed, r)`.
pub fn run_ensemble<F>(sim: F, replicates: usize, master_seed: u64) -> Result<Ensemble>
where
    F: Fn(usize, u64) -> Result<Vec<f64>> + Sync,
{
    if replicates < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: replicates });
    }
    let seeds: Vec<u64> = (0..replicates as u64).map(|r| derive_seed(master_seed, r)).collect();
    let outcomes: Vec<Result<Vec<f64>>> = seeds.par_iter().enumerate().map(|(r, &s)| sim(r, s)).collect();
    let mut reps = Vec::with_capacity(replicates);
    for (index, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) => reps.push(v),
            Err(e) => return Err(Error::Replicate { index, source: Box::new(e) }),
        }
    }
    if let Some(first) = reps.first() {
        let d = first.len();
        if let Some(bad) = reps.iter().position(|r| r.len() != d) {
            return Err(Error::Replicate { index: bad, source: Box::new(Error::Shape { expected: d, got: reps[bad].len() }) });
        }
    }
    Ok(Ensemble { replicates: reps, master_seed, seeds })
}

/// Sample mean and unbiased covariance of row vectors.
pub fn mean_cov(rows: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let r = rows.len();
    if r < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: r });
    }
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for row in rows {
        check_dim(d, row.len())?;
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= r as f64);
    let mut cov = DMatrix::zeros(d, d);
    for row in rows {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in 0..d {
                cov[(i, j)] += di * (row[j] - mean[j]);
            }
        }
    }
    cov /= (r - 1) as f64;
    Ok((mean, cov))
}

pub fn empirical_mean_cov(ensemble: &Ensemble) -> Result<(Vec<f64>, DMatrix<f64>)> {
    mean_cov(&ensemble.replicates)
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// `|A - B|_F / |B|_F`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Outcome of one check: passes iff `statistic <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    pub n_samples: usize,
    pub description: String,
}

impl TestResult {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, n_samples: usize, description: impl Into<String>) -> Self {
        let passed = statistic <= threshold;
        // JSON has no infinities; failed non-finite statistics are stored as f64::MAX
        let statistic = if statistic.is_finite() { statistic } else { f64::MAX };
        TestResult { name: name.into(), statistic, threshold, passed, n_samples, description: description.into() }
    }

    /// Two-sided closeness `|measured - target| <= tol`.
    pub fn within(name: impl Into<String>, measured: f64, target: f64, tol: f64, n_samples: usize, what: &str) -> Self {
        let stat = (measured - target).abs();
        let stat = if stat.is_nan() { f64::INFINITY } else { stat };
        TestResult::new(name, stat, tol, n_samples, format!("{what}: measured {measured:.6e}, target {target:.6e}"))
    }

    /// Relative closeness `|measured/target - 1| <= tol`.
    pub fn relative(name: impl Into<String>, measured: f64, target: f64, tol: f64, n_samples: usize, what: &str) -> Self {
        let stat = ((measured - target) / target).abs();
        let stat = if stat.is_nan() { f64::INFINITY } else { stat };
        TestResult::new(name, stat, tol, n_samples, format!("{what}: measured {measured:.6e}, target {target:.6e} (relative)"))
    }
}

pub const KS_MIN_SAMPLES: usize = 50;

/// Asymptotic Kolmogorov critical value `c(level)`.
pub fn ks_critical(level: f64) -> Result<f64> {
    if (level - 0.05).abs() < 1e-12 {
        Ok(1.358)
    } else if (level - 0.01).abs() < 1e-12 {
        Ok(1.628)
    } else {
        Err(Error::ParameterDomain(format!("KS level must be 0.05 or 0.01, got {level}")))
    }
}

/// One-sample KS distance against an arbitrary CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        d = d.max(f - i as f64 / n).max((j + 1) as f64 / n - f);
        i = j + 1;
    }
    d
}

pub fn ks_test_normal(samples: &[f64], mean: f64, sd: f64, level: f64) -> Result<TestResult> {
    if !(sd > 0.0) {
        return Err(Error::ParameterDomain(format!("sd must be positive, got {sd}")));
    }
    let c = ks_critical(level)?;
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: KS_MIN_SAMPLES, got: samples.len() });
    }
    let normal = Normal::new(mean, sd).map_err(|e| Error::ParameterDomain(e.to_string()))?;
    let d = ks_statistic(samples, |x| normal.cdf(x));
    let n = samples.len();
    Ok(TestResult::new("ks_normal", d, c / (n as f64).sqrt(), n, format!("KS vs N({mean:.4e}, {sd:.4e}^2) at level {level}")))
}

/// Ordinary least-squares slope and intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_dim(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::ParameterDomain("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Log-log least-squares slope of `errors` against `scales`.
pub fn rate_slope(scales: &[f64], errors: &[f64]) -> Result<f64> {
    check_dim(scales.len(), errors.len())?;
    if scales.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: scales.len() });
    }
    if scales.iter().chain(errors).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::ParameterDomain("rate_slope needs positive finite inputs".into()));
    }
    let lx: Vec<f64> = scales.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.0)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// First recorded time with `|X(t) - center| > rho`, or `None` within the horizon.
pub fn escape_time(path: &Path, center: &[f64], rho: f64) -> Result<Option<f64>> {
    check_dim(path.dim, center.len())?;
    if !(rho > 0.0) {
        return Err(Error::ParameterDomain(format!("rho must be positive, got {rho}")));
    }
    if path.is_empty() || dist(path.state(0), center) > rho {
        return Err(Error::Precondition("path must start inside the ball".into()));
    }
    Ok((0..path.len()).find(|&j| dist(path.state(j), center) > rho).map(|j| path.times[j]))
}

/// Integrated autocorrelation time estimated by batch means.
pub fn batch_means_act(series: &[f64]) -> f64 {
    let n = series.len();
    let b = ((n as f64).sqrt() as usize).max(1);
    let k = n / b;
    if k < 2 {
        return 1.0;
    }
    let v = sample_variance(series);
    if v == 0.0 {
        return 1.0;
    }
    let means: Vec<f64> = (0..k).map(|i| series[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64).collect();
    (b as f64 * sample_variance(&means) / v).max(1.0)
}

pub const GIBBS_MIN_SAMPLES: usize = 1000;
pub const GIBBS_BINS: usize = 20;

/// Chi-square goodness of fit of `samples` against the density
/// `p(x) ~ exp(-(2m / (delta sigma^2(x_min))) g(x))` on 20 equiprobable bins.
pub fn gibbs_density_check(model: &ObjectiveModel, delta: f64, m: usize, samples: &[f64], level: f64) -> Result<TestResult> {
    if model.dim() != 1 {
        return Err(Error::Precondition("Gibbs check needs a one-dimensional model".into()));
    }
    if samples.len() < GIBBS_MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: GIBBS_MIN_SAMPLES, got: samples.len() });
    }
    let centre = model.minimizer().ok_or_else(|| Error::Precondition("Gibbs check needs a known minimizer".into()))?[0];
    let s2 = model.noise_cov(&[centre])[(0, 0)];
    if !(s2 > 0.0) || !(delta > 0.0) || m == 0 {
        return Err(Error::ParameterDomain("Gibbs density needs positive delta, m and sigma^2".into()));
    }
    let beta = 2.0 * m as f64 / (delta * s2);
    let g0 = model.value(&[centre]);
    let density = |x: f64| (-beta * (model.value(&[x]) - g0)).exp();
    // curvature-based width, then a wide symmetric window
    let width = 12.0 / beta.sqrt();
    let lo = centre - width;
    let hi = centre + width;
    let grid = 4000usize;
    let dx = (hi - lo) / grid as f64;
    let mut cdf = vec![0.0; grid + 1];
    for i in 0..grid {
        let a = lo + i as f64 * dx;
        cdf[i + 1] = cdf[i] + adaptive_simpson(density, a, a + dx, 1e-14).value;
    }
    let total = cdf[grid];
    let mut edges = Vec::with_capacity(GIBBS_BINS - 1);
    for b in 1..GIBBS_BINS {
        let target = total * b as f64 / GIBBS_BINS as f64;
        let i = cdf.partition_point(|&c| c < target).clamp(1, grid);
        let frac = (target - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
        edges.push(lo + (i as f64 - 1.0 + frac) * dx);
    }
    let mut counts = [0usize; GIBBS_BINS];
    for &x in samples {
        counts[edges.partition_point(|&e| e <= x)] += 1;
    }
    let expected = samples.len() as f64 / GIBBS_BINS as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((GIBBS_BINS - 1) as f64).map_err(|e| Error::ParameterDomain(e.to_string()))?;
    let threshold = dist.inverse_cdf(1.0 - level);
    Ok(TestResult::new(
        "gibbs_chi_square",
        chi2,
        threshold,
        samples.len(),
        format!("20-bin chi-square against the Gibbs density at level {level}"),
    ))
}
