//! Reproducible experiment drivers with a parameter registry.
//!
//! Each experiment takes a validated [`ExperimentSpec`] and a seed, and returns
//! its checks as [`TestResult`]s together with CSV tables. All randomness is
//! derived from the seed, so a report is a pure function of `(spec, seed)`.

mod example1;
mod figure1;
mod rates;
mod saddle;
mod sgd;
mod stationary;

use crate::analysis::TestResult;
use crate::error::{Error, Result};
use crate::seeding::namespaced_seed;
use crate::table::Table;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

/// Admissible values of a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    PositiveInt,
    Positive,
    NonNegative,
    Real,
    /// Significance level, 0.01 or 0.05.
    Level,
}

impl Domain {
    pub fn check(self, key: &str, v: f64) -> Result<()> {
        let ok = v.is_finite()
            && match self {
                Domain::PositiveInt => v >= 1.0 && v.fract() == 0.0 && v <= 1e15,
                Domain::Positive => v > 0.0,
                Domain::NonNegative => v >= 0.0,
                Domain::Real => true,
                Domain::Level => v == 0.01 || v == 0.05,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::ParameterDomain(format!("parameter '{key}' = {v} is outside its domain ({})", self.describe())))
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Domain::PositiveInt => "positive integer",
            Domain::Positive => "positive real",
            Domain::NonNegative => "nonnegative real",
            Domain::Real => "real",
            Domain::Level => "0.01 or 0.05",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParamDef {
    pub name: &'static str,
    pub default: f64,
    pub domain: Domain,
    pub doc: &'static str,
}

const fn p(name: &'static str, default: f64, domain: Domain, doc: &'static str) -> ParamDef {
    ParamDef { name, default, domain, doc }
}

type Driver = fn(&ExperimentSpec, u64) -> Result<Outcome>;

/// Registry entry.
pub struct ExperimentDef {
    pub name: &'static str,
    pub description: &'static str,
    /// Result being reproduced.
    pub anchor: &'static str,
    pub params: &'static [ParamDef],
    pub outputs: &'static [&'static str],
    driver: Driver,
}

impl ExperimentDef {
    pub fn default_spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            name: self.name.to_string(),
            parameters: self.params.iter().map(|p| (p.name.to_string(), p.default)).collect(),
            outputs: self.outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn param(&self, key: &str) -> Option<&ParamDef> {
        self.params.iter().find(|p| p.name == key)
    }
}

impl std::fmt::Debug for ExperimentDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExperimentDef").field("name", &self.name).finish_non_exhaustive()
    }
}

use Domain::*;

static REGISTRY: &[ExperimentDef] = &[
    ExperimentDef {
        name: "exp_discrete_vs_continuum",
        description: "Euler accuracy against closed forms, iterate-to-ODE error rates in delta and sample-size scaling",
        anchor: "discrete iterates versus continuous limits: O(delta) plain and delta^{1/2} accelerated error",
        params: &[
            p("ode_h", 1e-5, Positive, "Euler step for the oracle comparison"),
            p("horizon", 5.0, Positive, "time horizon"),
            p("ode_tol", 1e-3, Positive, "max error of the Euler solutions"),
            p("halving_lo", 0.4, Positive, "lower bound of the error ratio when h halves"),
            p("halving_hi", 0.6, Positive, "upper bound of the error ratio when h halves"),
            p("delta1", 1e-2, Positive, "largest step size"),
            p("delta2", 3e-3, Positive, "middle step size"),
            p("delta3", 1e-3, Positive, "smallest step size"),
            p("slope_tol", 0.15, Positive, "tolerance on fitted slopes"),
            p("tau", 1.0, Positive, "noise scale of the first coordinate"),
            p("theta2", 1.0, Positive, "mean of the second coordinate"),
            p("n1", 1e3, PositiveInt, "smallest sample size"),
            p("n2", 1e4, PositiveInt, "middle sample size"),
            p("n3", 1e5, PositiveInt, "largest sample size"),
            p("n_delta", 1e-2, Positive, "step size for the sample-size scaling"),
            p("replicates", 100.0, PositiveInt, "datasets per sample size"),
        ],
        outputs: &["oracle_errors.csv", "delta_rates.csv", "n_scaling.csv"],
        driver: rates::run,
    },
    ExperimentDef {
        name: "exp_example1_accelerated",
        description: "sqrt(n) fluctuations of the accelerated data-driven ODE around its population limit",
        anchor: "mean estimation with accelerated dynamics: Bessel factor 1 - 2 J1(t)/t",
        params: &[
            p("n", 1e4, PositiveInt, "sample size"),
            p("replicates", 2000.0, PositiveInt, "number of datasets"),
            p("tau", 1.0, Positive, "noise scale of the first coordinate"),
            p("theta1", 0.0, Real, "mean of the first coordinate"),
            p("theta2", 1.0, Positive, "mean of the second coordinate"),
            p("x0_1", 1.0, Real, "initial value, first coordinate"),
            p("x0_2", 0.0, Real, "initial value, second coordinate"),
            p("h", 1e-4, Positive, "Euler step"),
            p("t_inf", 50.0, Positive, "proxy for t = infinity"),
            p("ks_level", 0.01, Level, "KS significance level"),
            p("var_tol", 0.1, Positive, "relative variance tolerance"),
            p("small_t", 0.05, Positive, "time of the small-t check"),
            p("small_t_tol", 1e-3, Positive, "bound on the normalized variance at small t"),
        ],
        outputs: &["fluctuations.csv", "decay_envelopes.csv"],
        driver: example1::accelerated,
    },
    ExperimentDef {
        name: "exp_example1_plain",
        description: "sqrt(n) fluctuations of the plain data-driven ODE around its population limit",
        anchor: "mean estimation with plain dynamics: exponential factor 1 - e^{-t}",
        params: &[
            p("n", 1e4, PositiveInt, "sample size"),
            p("replicates", 2000.0, PositiveInt, "number of datasets"),
            p("tau", 1.0, Positive, "noise scale of the first coordinate"),
            p("theta1", 0.0, Real, "mean of the first coordinate"),
            p("theta2", 1.0, Positive, "mean of the second coordinate"),
            p("x0_1", 1.0, Real, "initial value, first coordinate"),
            p("x0_2", 0.0, Real, "initial value, second coordinate"),
            p("h", 1e-3, Positive, "Euler step"),
            p("t_inf", 20.0, Positive, "proxy for t = infinity"),
            p("ks_level", 0.01, Level, "KS significance level"),
            p("var_tol", 0.1, Positive, "relative variance tolerance"),
            p("limit_tol", 1e-6, Positive, "distance of X^n(t_inf) to the sample mean"),
            p("pi_tol", 5e-3, Positive, "relative error of the numerical Pi path"),
        ],
        outputs: &["fluctuations.csv", "pi_path.csv"],
        driver: example1::plain,
    },
    ExperimentDef {
        name: "exp_figure1",
        description: "least-squares scatter, SGD paths and accelerated full-data paths for the random-design regression",
        anchor: "numerical example: random-design linear regression",
        params: &[
            p("delta", 0.05, Positive, "step size"),
            p("n", 1000.0, PositiveInt, "sample size"),
            p("m", 200.0, PositiveInt, "mini-batch size"),
            p("x0_1", 0.1, Real, "initial value, first coordinate"),
            p("x0_2", 0.1, Real, "initial value, second coordinate"),
            p("alpha11", 0.02, Positive, "covariate variance, first coordinate"),
            p("alpha22", 0.005, Positive, "covariate variance, second coordinate"),
            p("tau", 0.1, Positive, "error standard deviation"),
            p("replicates", 2000.0, PositiveInt, "datasets for the covariance check"),
            p("scatter", 500.0, PositiveInt, "estimators in the scatter artifact"),
            p("se_band", 4.0, Positive, "standard errors allowed for the scatter mean"),
            p("cov_tol", 0.15, Positive, "relative Frobenius tolerance on the covariance"),
            p("endpoint_tol", 1e-3, Positive, "distance of algorithm endpoints to their minimizers"),
            p("gd_steps", 40000.0, PositiveInt, "plain iterations"),
            p("nesterov_steps", 5000.0, PositiveInt, "accelerated iterations"),
            p("sgd_paths", 5.0, PositiveInt, "SGD sample paths"),
            p("datasets", 3.0, PositiveInt, "datasets in the accelerated panel"),
            p("ode_substeps", 10.0, PositiveInt, "Euler steps per accelerated iteration"),
            p("thin", 50.0, PositiveInt, "keep every thin-th iterate in path artifacts"),
        ],
        outputs: &["figure1_scatter.csv", "figure1_sgd_paths.csv", "figure1_accelerated_paths.csv", "figure1_estimators.csv"],
        driver: figure1::run,
    },
    ExperimentDef {
        name: "exp_saddle_batchsize",
        description: "fourth-order tensor model: gradient flow, fluctuations at critical points and batch-size dependent saddle escape",
        anchor: "critical points of non-convex objectives and batch-size dependent escape",
        params: &[
            p("x1sq0", 0.9, Positive, "initial X1^2 of the gradient flow"),
            p("flow_h", 1e-4, Positive, "Euler step of the gradient flow"),
            p("flow_t", 3.0, Positive, "gradient-flow horizon"),
            p("flow_tol", 1e-3, Positive, "tolerance of the gradient-flow comparison"),
            p("h", 1e-3, Positive, "Euler-Maruyama step"),
            p("replicates", 2000.0, PositiveInt, "Monte-Carlo replicates"),
            p("reversion_paths", 200.0, PositiveInt, "paths for the mean-reversion fit"),
            p("reversion_t", 5.0, Positive, "horizon of the mean-reversion paths"),
            p("reversion_tol", 0.15, Positive, "relative tolerance of the fitted reversion rate"),
            p("lyapunov_tol", 0.1, Positive, "relative tolerance of the minimizer covariance"),
            p("growth_t", 1.5, Positive, "horizon of the saddle variance fit"),
            p("growth_tol", 0.2, Positive, "relative tolerance of the fitted growth rate"),
            p("delta", 1e-3, Positive, "step size"),
            p("m1", 10.0, PositiveInt, "smallest batch size"),
            p("m2", 100.0, PositiveInt, "middle batch size"),
            p("m3", 1000.0, PositiveInt, "largest batch size"),
            p("rho", 0.2, Positive, "escape radius"),
            p("escape_t", 5.0, Positive, "escape horizon"),
        ],
        outputs: &["flow.csv", "saddle_variance.csv", "escape.csv", "selection.csv"],
        driver: saddle::run,
    },
    ExperimentDef {
        name: "exp_sgd_weak_convergence",
        description: "mini-batch SGD and its diffusion: Ornstein-Uhlenbeck fluctuation law and the O(delta/m) coupling",
        anchor: "weak convergence of SGD fluctuations to a time-dependent Ornstein-Uhlenbeck process",
        params: &[
            p("m", 10.0, PositiveInt, "mini-batch size"),
            p("delta", 1e-3, Positive, "step size"),
            p("replicates", 5000.0, PositiveInt, "SGD runs"),
            p("tau", 1.0, Positive, "noise scale of the first coordinate"),
            p("theta2", 1.0, Positive, "mean of the second coordinate"),
            p("offset", 0.2, Real, "x0 - theta, both coordinates"),
            p("var_tol", 0.1, Positive, "relative variance tolerance"),
            p("ks_level", 0.01, Level, "KS significance level"),
            p("degenerate_n", 200.0, PositiveInt, "dataset size with m = n"),
            p("degenerate_replicates", 200.0, PositiveInt, "datasets with m = n"),
            p("degenerate_ratio", 0.05, Positive, "bound on the variance ratio with m = n"),
            p("coupling_replicates", 200.0, PositiveInt, "shared Brownian paths per setting"),
            p("coupling_delta", 0.01, Positive, "step size of the coupling study"),
            p("coupling_h", 1e-3, Positive, "Euler-Maruyama step of the coupling study"),
            p("coupling_t", 2.0, Positive, "coupling horizon"),
            p("coupling_m1", 10.0, PositiveInt, "batch size, setting 1"),
            p("coupling_m2", 100.0, PositiveInt, "batch size, setting 2"),
            p("coupling_m3", 1000.0, PositiveInt, "batch size, setting 3"),
            p("slope_tol", 0.2, Positive, "tolerance on the coupling slope"),
        ],
        outputs: &["sgd_fluctuations.csv", "coupling.csv"],
        driver: sgd::run,
    },
    ExperimentDef {
        name: "exp_stationary",
        description: "long-run SGD diffusion: stationary covariance from the Lyapunov equation and the one-dimensional Gibbs law",
        anchor: "stationary distribution of the SGD diffusion",
        params: &[
            p("delta", 0.01, Positive, "step size"),
            p("m", 10.0, PositiveInt, "mini-batch size"),
            p("horizon", 20.0, Positive, "simulation horizon, burn-in is half of it"),
            p("h", 0.01, Positive, "Euler-Maruyama step"),
            p("thin", 5.0, Positive, "time between pooled samples after burn-in"),
            p("replicates", 4000.0, PositiveInt, "independent paths"),
            p("tau", 0.5, Positive, "noise scale of the first coordinate"),
            p("theta2", 1.0, Positive, "mean of the second coordinate"),
            p("cov_tol", 0.1, Positive, "relative Frobenius tolerance"),
            p("gibbs_samples", 10000.0, PositiveInt, "samples for the Gibbs checks"),
            p("ks_level", 0.01, Level, "significance level of the Gibbs checks"),
            p("slope_tol", 0.15, Positive, "tolerance on the spread-versus-delta/m slope"),
        ],
        outputs: &["stationary_cov.csv", "gibbs_samples.csv", "spread.csv"],
        driver: stationary::run,
    },
];

/// All experiments, sorted by name.
pub fn registry() -> &'static [ExperimentDef] {
    REGISTRY
}

pub fn find(name: &str) -> Result<&'static ExperimentDef> {
    REGISTRY.iter().find(|d| d.name == name).ok_or_else(|| {
        let names: Vec<&str> = REGISTRY.iter().map(|d| d.name).collect();
        Error::Configuration(format!("unknown experiment '{name}'; available: {}", names.join(", ")))
    })
}

/// Name, parameter values and artifact names of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

impl ExperimentSpec {
    pub fn defaults(name: &str) -> Result<ExperimentSpec> {
        Ok(find(name)?.default_spec())
    }

    /// Overrides one parameter after checking its key and domain.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let def = find(&self.name)?;
        let pd = def.param(key).ok_or_else(|| {
            let keys: Vec<&str> = def.params.iter().map(|p| p.name).collect();
            Error::Configuration(format!("unknown parameter '{key}' for {}; known: {}", self.name, keys.join(", ")))
        })?;
        pd.domain.check(key, value)?;
        self.parameters.insert(key.to_string(), value);
        Ok(())
    }

    /// Parses `value` and calls [`Self::set`].
    pub fn set_str(&mut self, key: &str, value: &str) -> Result<()> {
        let v: f64 =
            value.trim().parse().map_err(|_| Error::Configuration(format!("parameter '{key}': cannot parse '{value}' as a number")))?;
        self.set(key, v)
    }

    pub fn validate(&self) -> Result<()> {
        let def = find(&self.name)?;
        for (k, v) in &self.parameters {
            let pd = def.param(k).ok_or_else(|| Error::Configuration(format!("unknown parameter '{k}'")))?;
            pd.domain.check(k, *v)?;
        }
        for pd in def.params {
            if !self.parameters.contains_key(pd.name) {
                return Err(Error::Configuration(format!("missing parameter '{}'", pd.name)));
            }
        }
        Ok(())
    }

    pub fn f(&self, key: &str) -> f64 {
        *self.parameters.get(key).unwrap_or_else(|| panic!("parameter '{key}' is registered"))
    }

    pub fn int(&self, key: &str) -> usize {
        self.f(key) as usize
    }
}

/// A CSV artifact with an optional plotting hint.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub table: Table,
    pub plot: Option<PlotHint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotHint {
    pub x: String,
    pub y: Vec<String>,
    pub points: bool,
    pub logscale: bool,
}

impl PlotHint {
    fn lines(x: &str, y: &[&str]) -> Option<PlotHint> {
        Some(PlotHint { x: x.into(), y: y.iter().map(|s| s.to_string()).collect(), points: false, logscale: false })
    }

    fn points(x: &str, y: &[&str]) -> Option<PlotHint> {
        Some(PlotHint { points: true, ..PlotHint::lines(x, y)? })
    }

    fn loglog(x: &str, y: &[&str]) -> Option<PlotHint> {
        Some(PlotHint { logscale: true, points: true, ..PlotHint::lines(x, y)? })
    }
}

/// What a driver returns.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub results: Vec<TestResult>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn check(&mut self, r: TestResult) {
        self.results.push(r);
    }

    fn artifact(&mut self, name: &str, table: Table, plot: Option<PlotHint>) {
        self.artifacts.push(Artifact { name: name.into(), table, plot });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub master_seed: u64,
    pub experiment_seed: u64,
    pub passed: bool,
    pub results: Vec<TestResult>,
    /// Files written for this report, filled in by the emitter.
    #[serde(default)]
    pub artifacts: Vec<ManifestEntry>,
    /// Seconds; kept out of `report.json` so reruns compare equal.
    #[serde(skip)]
    pub wall_time: f64,
    #[serde(skip)]
    pub tables: Vec<Artifact>,
}

/// Runs one experiment. The experiment's seed is `namespaced_seed(master_seed, name)`.
pub fn run_experiment(spec: &ExperimentSpec, master_seed: u64) -> Result<ExperimentReport> {
    spec.validate()?;
    let def = find(&spec.name)?;
    let seed = namespaced_seed(master_seed, def.name);
    let start = Instant::now();
    let out = (def.driver)(spec, seed)?;
    let wall_time = start.elapsed().as_secs_f64();
    if out.results.is_empty() || out.artifacts.is_empty() {
        return Err(Error::Configuration(format!("{} produced no results or artifacts", def.name)));
    }
    Ok(ExperimentReport {
        spec: spec.clone(),
        master_seed,
        experiment_seed: seed,
        passed: out.results.iter().all(|r| r.passed),
        results: out.results,
        artifacts: Vec::new(),
        wall_time,
        tables: out.artifacts,
    })
}

impl ExperimentReport {
    pub fn result(&self, name: &str) -> Option<&TestResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

/// Seed for a named part of an experiment.
fn part_seed(seed: u64, label: &str) -> u64 {
    namespaced_seed(seed, label)
}
