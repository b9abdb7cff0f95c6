//! Closed-form and semi-closed-form reference solutions.

mod bessel;
mod quadrature;

pub use bessel::{bessel_j1, bessel_method, bessel_y1, two_j1_over_t, BesselMethod, SERIES_LIMIT};
pub use quadrature::{adaptive_simpson, Quadrature, MAX_PANELS};

use crate::error::{check_dim, Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Series,
    Asymptotic,
    Quadrature,
    Algebraic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: Vec<f64>,
    pub method: OracleMethod,
    pub est_error: f64,
}

pub const QUADRATURE_TOL: f64 = 1e-10;

/// `theta + (x0 - theta) e^{-t}`.
pub fn exp_decay_path(theta: &[f64], x0: &[f64], t: f64) -> Result<Vec<f64>> {
    check_dim(theta.len(), x0.len())?;
    nonneg_time(t)?;
    let f = (-t).exp();
    Ok(theta.iter().zip(x0).map(|(c, x)| c + (x - c) * f).collect())
}

/// `theta + 2 (x0 - theta) J1(t) / t`.
pub fn bessel_path(theta: &[f64], x0: &[f64], t: f64) -> Result<Vec<f64>> {
    check_dim(theta.len(), x0.len())?;
    nonneg_time(t)?;
    let f = two_j1_over_t(t);
    Ok(theta.iter().zip(x0).map(|(c, x)| c + (x - c) * f).collect())
}

/// Diagonal of the constant-coefficient OU covariance at time `t`.
pub fn ou_variance(h_diag: &[f64], sigma_diag: &[f64], t: f64) -> Result<Vec<f64>> {
    check_dim(h_diag.len(), sigma_diag.len())?;
    nonneg_time(t)?;
    h_diag
        .iter()
        .zip(sigma_diag)
        .map(|(&h, &s)| {
            if !(h > 0.0) {
                return Err(Error::ParameterDomain(format!("OU rate must be positive, got {h}")));
            }
            Ok(s * s * (-(-2.0 * h * t).exp_m1()) / (2.0 * h))
        })
        .collect()
}

fn tensor_constant(x1sq_0: f64) -> Result<f64> {
    if !(x1sq_0 > 0.5 && x1sq_0 <= 1.0) {
        return Err(Error::ParameterDomain(format!("x1sq_0 must lie in (0.5, 1], got {x1sq_0}")));
    }
    Ok((2.0 * x1sq_0 - 1.0).powi(-2) - 1.0)
}

/// `X1^2(t) = 0.5 + 0.5 [1 + c e^{-4t}]^{-1/2}` with `c = (2 X1^2(0) - 1)^{-2} - 1`.
pub fn tensor_flow_x1sq(x1sq_0: f64, t: f64) -> Result<f64> {
    let c = tensor_constant(x1sq_0)?;
    nonneg_time(t)?;
    Ok(0.5 + 0.5 / (1.0 + c * (-4.0 * t).exp()).sqrt())
}

/// Exact solution of the two-dimensional flow `dX_i/dt = 4 X_i (X_i^2 - |X|_4^4)`
/// on the unit circle: the same expression with exponent `-8t`.
pub fn tensor_flow_x1sq_exact(x1sq_0: f64, t: f64) -> Result<f64> {
    let c = tensor_constant(x1sq_0)?;
    nonneg_time(t)?;
    Ok(0.5 + 0.5 / (1.0 + c * (-8.0 * t).exp()).sqrt())
}

/// Variance of the second-order limit process with unit Hessian:
/// `(pi/2)^2 s^2 / t^2 * int_0^t [J1(t) Y1(u) - Y1(t) J1(u)]^2 u^4 du`.
pub fn accel_limit_variance(sigma: f64, t: f64) -> Result<OracleResult> {
    if !(sigma >= 0.0) {
        return Err(Error::ParameterDomain(format!("sigma must be nonnegative, got {sigma}")));
    }
    nonneg_time(t)?;
    if t == 0.0 || sigma == 0.0 {
        return Ok(OracleResult { value: vec![0.0], method: OracleMethod::Quadrature, est_error: 0.0 });
    }
    let jt = bessel_j1(t);
    let yt = bessel_y1(t)?;
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let y = bessel_y1(u).unwrap_or(0.0);
        let g = jt * y - yt * bessel_j1(u);
        let u2 = u * u;
        g * g * u2 * u2
    };
    let q = adaptive_simpson(integrand, 0.0, t, QUADRATURE_TOL);
    let scale = (std::f64::consts::FRAC_PI_2 * sigma / t).powi(2);
    Ok(OracleResult { value: vec![scale * q.value], method: OracleMethod::Quadrature, est_error: scale * q.est_error })
}

fn nonneg_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("time must be finite and nonnegative, got {t}")))
    }
}

/// Names accepted by [`evaluate_named`], with their argument layout.
pub const ORACLES: &[(&str, &str)] = &[
    ("accel_limit_variance", "sigma t"),
    ("bessel_j1", "u"),
    ("bessel_path", "theta_1..theta_p x0_1..x0_p t"),
    ("bessel_y1", "u"),
    ("exp_decay_path", "theta_1..theta_p x0_1..x0_p t"),
    ("ou_variance", "h_1..h_p sigma_1..sigma_p t"),
    ("tensor_flow_x1sq", "x1sq_0 t"),
    ("tensor_flow_x1sq_exact", "x1sq_0 t"),
];

fn split_pair(args: &[f64]) -> Result<(&[f64], &[f64], f64)> {
    if args.len() < 3 || args.len().is_multiple_of(2) {
        return Err(Error::Configuration(format!("expected 2p+1 arguments, got {}", args.len())));
    }
    let p = (args.len() - 1) / 2;
    Ok((&args[..p], &args[p..2 * p], args[2 * p]))
}

fn arity(args: &[f64], n: usize) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        Err(Error::Configuration(format!("expected {n} arguments, got {}", args.len())))
    }
}

/// Evaluates an oracle by name on positional arguments.
pub fn evaluate_named(name: &str, args: &[f64]) -> Result<OracleResult> {
    let algebraic = |value: Vec<f64>| OracleResult { value, method: OracleMethod::Algebraic, est_error: 0.0 };
    match name {
        "bessel_j1" => {
            arity(args, 1)?;
            let method = match bessel_method(args[0].abs()) {
                BesselMethod::Series => OracleMethod::Series,
                BesselMethod::Asymptotic => OracleMethod::Asymptotic,
            };
            Ok(OracleResult { value: vec![bessel_j1(args[0])], method, est_error: 1e-15 })
        }
        "bessel_y1" => {
            arity(args, 1)?;
            let method = match bessel_method(args[0]) {
                BesselMethod::Series => OracleMethod::Series,
                BesselMethod::Asymptotic => OracleMethod::Asymptotic,
            };
            Ok(OracleResult { value: vec![bessel_y1(args[0])?], method, est_error: 1e-15 })
        }
        "exp_decay_path" => {
            let (a, b, t) = split_pair(args)?;
            exp_decay_path(a, b, t).map(algebraic)
        }
        "bessel_path" => {
            let (a, b, t) = split_pair(args)?;
            let mut r = algebraic(bessel_path(a, b, t)?);
            r.method = if t <= SERIES_LIMIT { OracleMethod::Series } else { OracleMethod::Asymptotic };
            Ok(r)
        }
        "ou_variance" => {
            let (a, b, t) = split_pair(args)?;
            ou_variance(a, b, t).map(algebraic)
        }
        "tensor_flow_x1sq" => {
            arity(args, 2)?;
            tensor_flow_x1sq(args[0], args[1]).map(|v| algebraic(vec![v]))
        }
        "tensor_flow_x1sq_exact" => {
            arity(args, 2)?;
            tensor_flow_x1sq_exact(args[0], args[1]).map(|v| algebraic(vec![v]))
        }
        "accel_limit_variance" => {
            arity(args, 2)?;
            accel_limit_variance(args[0], args[1])
        }
        other => Err(Error::Configuration(format!(
            "unknown oracle '{other}'; available: {}",
            ORACLES.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        ))),
    }
}
