//! Plain and accelerated gradient iterations driven by exact, full-data or
//! mini-batch gradients, and the step-process embedding of their iterates.

use crate::data::{AffineField, Dataset, IndexSampler, SamplingMode};
use crate::error::{check_dim, Error, Result};
use crate::models::{ObjectiveModel, ParamVector};
use crate::seeding::substream;
use crate::table::Table;
use serde::{Deserialize, Serialize};

pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Exact,
    FullData,
    Minibatch,
}

/// Where the gradient at each step comes from.
#[derive(Debug, Clone)]
pub struct GradientSource<'a> {
    model: &'a ObjectiveModel,
    kind: SourceKind,
    dataset: Option<&'a Dataset>,
    affine: Option<AffineField>,
    batch_size: Option<usize>,
    batch_mode: Option<SamplingMode>,
}

impl<'a> GradientSource<'a> {
    pub fn exact(model: &'a ObjectiveModel) -> Self {
        GradientSource { model, kind: SourceKind::Exact, dataset: None, affine: None, batch_size: None, batch_mode: None }
    }

    pub fn full_data(model: &'a ObjectiveModel, dataset: &'a Dataset) -> Result<Self> {
        check_dim(model.datum_len(), dataset.datum_len())?;
        let affine = if model.is_affine() { Some(AffineField::from_dataset(model, dataset)?) } else { None };
        Ok(GradientSource { model, kind: SourceKind::FullData, dataset: Some(dataset), affine, batch_size: None, batch_mode: None })
    }

    pub fn minibatch(model: &'a ObjectiveModel, dataset: Option<&'a Dataset>, m: usize, mode: SamplingMode) -> Result<Self> {
        if m == 0 {
            return Err(Error::ParameterDomain("batch size must be positive".into()));
        }
        match (mode, dataset) {
            (SamplingMode::Population, _) => {}
            (_, None) => return Err(Error::Configuration(format!("{mode:?} batches need a dataset"))),
            (SamplingMode::WithoutReplacement, Some(d)) if m > d.len() => {
                return Err(Error::Sampling(format!("cannot draw {m} distinct records from {}", d.len())))
            }
            (_, Some(d)) => check_dim(model.datum_len(), d.datum_len())?,
        }
        Ok(GradientSource { model, kind: SourceKind::Minibatch, dataset, affine: None, batch_size: Some(m), batch_mode: Some(mode) })
    }

    pub fn model(&self) -> &ObjectiveModel {
        self.model
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn batch_size(&self) -> Option<usize> {
        self.batch_size
    }

    fn workspace(&self) -> Workspace {
        let n = self.dataset.map_or(0, Dataset::len);
        Workspace {
            sampler: match self.batch_mode {
                Some(SamplingMode::WithoutReplacement) | Some(SamplingMode::Bootstrap) => Some(IndexSampler::new(n)),
                _ => None,
            },
            datum: vec![0.0; self.model.datum_len()],
            g: vec![0.0; self.model.dim()],
        }
    }

    /// Gradient at `x` for step `k` (1-based); mini-batches use substream `k` of `seed`.
    fn eval(&self, x: &[f64], k: usize, seed: u64, ws: &mut Workspace, out: &mut [f64]) -> Result<()> {
        match self.kind {
            SourceKind::Exact => self.model.grad_into(x, out),
            SourceKind::FullData => match &self.affine {
                Some(a) => a.eval_into(x, out),
                None => {
                    let d = self.dataset.expect("full-data source has a dataset");
                    out.iter_mut().for_each(|v| *v = 0.0);
                    for r in d.records() {
                        self.model.datum_grad_into(x, r, &mut ws.g);
                        out.iter_mut().zip(&ws.g).for_each(|(o, v)| *o += v);
                    }
                    out.iter_mut().for_each(|v| *v /= d.len() as f64);
                }
            },
            SourceKind::Minibatch => {
                let m = self.batch_size.expect("minibatch source has a size");
                let mut rng = substream(seed, k as u64);
                out.iter_mut().for_each(|v| *v = 0.0);
                match self.batch_mode.expect("minibatch source has a mode") {
                    SamplingMode::Population => {
                        for _ in 0..m {
                            self.model.sample_datum(&mut rng, &mut ws.datum);
                            self.model.datum_grad_into(x, &ws.datum, &mut ws.g);
                            out.iter_mut().zip(&ws.g).for_each(|(o, v)| *o += v);
                        }
                    }
                    mode => {
                        let d = self.dataset.expect("subsampling source has a dataset");
                        let sampler = ws.sampler.as_mut().expect("sampler allocated");
                        let idx = sampler.draw_in_place(m, mode, &mut rng)?;
                        for &i in idx {
                            self.model.datum_grad_into(x, d.record(i), &mut ws.g);
                            out.iter_mut().zip(&ws.g).for_each(|(o, v)| *o += v);
                        }
                    }
                }
                out.iter_mut().for_each(|v| *v /= m as f64);
            }
        }
        Ok(())
    }
}

struct Workspace {
    sampler: Option<IndexSampler>,
    datum: Vec<f64>,
    g: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Constant,
    /// `delta_k = eta * k^{-alpha}` for `k >= 1`.
    Polynomial {
        eta: f64,
        alpha: f64,
    },
}

impl Schedule {
    fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Constant => Ok(()),
            Schedule::Polynomial { eta, alpha } => {
                if eta > 0.0 && alpha > 0.0 && alpha < 1.0 {
                    Ok(())
                } else {
                    Err(Error::ParameterDomain(format!("polynomial schedule needs eta > 0 and alpha in (0,1), got ({eta}, {alpha})")))
                }
            }
        }
    }

    pub fn rate(&self, delta: f64, k: usize) -> f64 {
        match *self {
            Schedule::Constant => delta,
            Schedule::Polynomial { eta, alpha } => eta * (k as f64).powf(-alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Plain,
    Nesterov,
}

/// Iterates `x_0..x_K` with their continuous-time stamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub family: Family,
    pub dim: usize,
    pub delta: f64,
    /// `delta` for plain iterations, `sqrt(delta)` for accelerated ones.
    pub step_scale: f64,
    pub schedule: Schedule,
    pub times: Vec<f64>,
    iterates: Vec<f64>,
    aux: Option<Vec<f64>>,
    grads: Vec<f64>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn iterate(&self, k: usize) -> &[f64] {
        &self.iterates[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iterates(&self) -> Vec<ParamVector> {
        self.iterates.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn last(&self) -> &[f64] {
        self.iterate(self.steps())
    }

    /// Interpolation point `y_k` of the accelerated iteration.
    pub fn aux(&self, k: usize) -> Option<&[f64]> {
        self.aux.as_ref().map(|a| &a[k * self.dim..(k + 1) * self.dim])
    }

    /// Point at which the gradient of step `k >= 1` was evaluated.
    pub fn eval_point(&self, k: usize) -> &[f64] {
        match self.family {
            Family::Plain => self.iterate(k - 1),
            Family::Nesterov => self.aux(k - 1).expect("accelerated trajectories store y"),
        }
    }

    /// Gradient estimate used at step `k >= 1`.
    pub fn grad_used(&self, k: usize) -> &[f64] {
        &self.grads[(k - 1) * self.dim..k * self.dim]
    }

    pub fn to_table(&self) -> Table {
        let mut cols = vec!["k".to_string(), "t".to_string()];
        cols.extend((1..=self.dim).map(|i| format!("x{i}")));
        if self.aux.is_some() {
            cols.extend((1..=self.dim).map(|i| format!("y{i}")));
        }
        let mut t = Table::new(cols);
        for k in 0..=self.steps() {
            let mut row = vec![k as f64, self.times[k]];
            row.extend_from_slice(self.iterate(k));
            if let Some(y) = self.aux(k) {
                row.extend_from_slice(y);
            }
            t.push(row);
        }
        t
    }
}

fn check_finite(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_BOUND) {
        Ok(())
    } else {
        Err(Error::Divergence { step, detail: format!("iterate {x:?} left the bounded region") })
    }
}

fn check_start(source: &GradientSource, x0: &[f64], delta: f64, k: usize) -> Result<()> {
    check_dim(source.model.dim(), x0.len())?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::ParameterDomain(format!("step size must be positive, got {delta}")));
    }
    if k == 0 {
        return Err(Error::ParameterDomain("iteration count must be positive".into()));
    }
    check_finite(x0, 0)
}

/// Runs plain gradient descent, calling `visit(k, x_k, grad_k)` after every step.
pub fn plain_gd_visit(
    source: &GradientSource,
    x0: &[f64],
    delta: f64,
    steps: usize,
    schedule: Schedule,
    seed: u64,
    mut visit: impl FnMut(usize, &[f64], &[f64]),
) -> Result<Vec<f64>> {
    check_start(source, x0, delta, steps)?;
    schedule.validate()?;
    let mut ws = source.workspace();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    for k in 1..=steps {
        source.eval(&x, k, seed, &mut ws, &mut g)?;
        let d = schedule.rate(delta, k);
        x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= d * gi);
        source.model.post_step(&mut x);
        check_finite(&x, k)?;
        visit(k, &x, &g);
    }
    Ok(x)
}

pub fn run_plain_gd(source: &GradientSource, x0: &[f64], delta: f64, steps: usize, schedule: Schedule, seed: u64) -> Result<Trajectory> {
    let p = x0.len();
    let mut iterates = Vec::with_capacity((steps + 1) * p);
    iterates.extend_from_slice(x0);
    let mut grads = Vec::with_capacity(steps * p);
    let mut times = Vec::with_capacity(steps + 1);
    times.push(0.0);
    let mut t = 0.0;
    plain_gd_visit(source, x0, delta, steps, schedule, seed, |k, x, g| {
        iterates.extend_from_slice(x);
        grads.extend_from_slice(g);
        t = match schedule {
            Schedule::Constant => k as f64 * delta,
            _ => t + schedule.rate(delta, k),
        };
        times.push(t);
    })?;
    Ok(Trajectory { family: Family::Plain, dim: p, delta, step_scale: delta, schedule, times, iterates, aux: None, grads })
}

/// Runs the accelerated iteration, calling `visit(k, x_k, y_k, grad_k)` after every step.
pub fn nesterov_visit(
    source: &GradientSource,
    x0: &[f64],
    delta: f64,
    steps: usize,
    seed: u64,
    mut visit: impl FnMut(usize, &[f64], &[f64], &[f64]),
) -> Result<Vec<f64>> {
    check_start(source, x0, delta, steps)?;
    let mut ws = source.workspace();
    let mut x_prev = x0.to_vec();
    let mut y = x0.to_vec();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    for k in 1..=steps {
        source.eval(&y, k, seed, &mut ws, &mut g)?;
        for i in 0..x.len() {
            x[i] = y[i] - delta * g[i];
        }
        source.model.post_step(&mut x);
        check_finite(&x, k)?;
        let c = (k as f64 - 1.0) / (k as f64 + 2.0);
        for i in 0..x.len() {
            y[i] = x[i] + c * (x[i] - x_prev[i]);
        }
        check_finite(&y, k)?;
        visit(k, &x, &y, &g);
        x_prev.copy_from_slice(&x);
    }
    Ok(x)
}

pub fn run_nesterov(source: &GradientSource, x0: &[f64], delta: f64, steps: usize, seed: u64) -> Result<Trajectory> {
    let p = x0.len();
    let mut iterates = Vec::with_capacity((steps + 1) * p);
    iterates.extend_from_slice(x0);
    let mut aux = iterates.clone();
    let mut grads = Vec::with_capacity(steps * p);
    nesterov_visit(source, x0, delta, steps, seed, |_, x, y, g| {
        iterates.extend_from_slice(x);
        aux.extend_from_slice(y);
        grads.extend_from_slice(g);
    })?;
    let s = delta.sqrt();
    Ok(Trajectory {
        family: Family::Nesterov,
        dim: p,
        delta,
        step_scale: s,
        schedule: Schedule::Constant,
        times: (0..=steps).map(|k| k as f64 * s).collect(),
        iterates,
        aux: Some(aux),
        grads,
    })
}

/// Accelerated iteration in velocity form:
/// `x_{k+1} = x_k + s z_k`, `z_{k+1} = k/(k+3) z_k - s grad(x_k + (2k+3)/(k+3) s z_k)`,
/// `z_0 = -s grad(x_0)`, with `s = sqrt(delta)`. Exact gradients only.
pub fn nesterov_velocity_form(model: &ObjectiveModel, x0: &[f64], delta: f64, steps: usize) -> Result<Vec<ParamVector>> {
    check_dim(model.dim(), x0.len())?;
    let s = delta.sqrt();
    let mut x = x0.to_vec();
    let mut z: Vec<f64> = model.grad(&x).iter().map(|g| -s * g).collect();
    let mut out = vec![x.clone()];
    let mut probe = vec![0.0; x.len()];
    let mut g = vec![0.0; x.len()];
    for k in 0..steps {
        let kf = k as f64;
        let c = (2.0 * kf + 3.0) / (kf + 3.0);
        for i in 0..x.len() {
            probe[i] = x[i] + c * s * z[i];
        }
        model.grad_into(&probe, &mut g);
        for i in 0..x.len() {
            x[i] += s * z[i];
            z[i] = kf / (kf + 3.0) * z[i] - s * g[i];
        }
        check_finite(&x, k + 1)?;
        out.push(x.clone());
    }
    Ok(out)
}

/// Right-continuous piecewise-constant embedding `x_delta(t)`.
pub fn step_process(traj: &Trajectory, t: f64) -> Result<ParamVector> {
    let horizon = *traj.times.last().expect("non-empty trajectory");
    let slack = 1e-9 * traj.step_scale;
    if !(t >= 0.0) || t > horizon + slack {
        return Err(Error::Range(format!("t={t} outside [0, {horizon}]")));
    }
    let k = match traj.schedule {
        Schedule::Constant => ((t + slack) / traj.step_scale).floor() as usize,
        Schedule::Polynomial { .. } => traj.times.partition_point(|&s| s <= t + slack) - 1,
    };
    Ok(traj.iterate(k.min(traj.steps())).to_vec())
}
