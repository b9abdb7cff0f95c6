use crate::error::{check_dim, Error, Result};
use crate::models::{ObjectiveModel, ParamVector};
use crate::seeding::{stream, StreamRng};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// `n` observations stored flat with stride `datum_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<f64>,
    n: usize,
    datum_len: usize,
    seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn datum_len(&self) -> usize {
        self.datum_len
    }

    pub fn record(&self, i: usize) -> &[f64] {
        &self.records[i * self.datum_len..(i + 1) * self.datum_len]
    }

    pub fn records(&self) -> impl Iterator<Item = &[f64]> {
        self.records.chunks_exact(self.datum_len)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.records
    }

    /// Column means of the records.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.datum_len];
        for r in self.records() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    /// CSV dump, one record per row with columns `u1..ud`.
    pub fn to_table(&self) -> crate::table::Table {
        let header = (1..=self.datum_len).map(|j| format!("u{j}")).collect();
        let mut t = crate::table::Table::new(header);
        for r in self.records() {
            t.push(r.to_vec());
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Population,
    Bootstrap,
    WithoutReplacement,
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "population" => Ok(SamplingMode::Population),
            "bootstrap" => Ok(SamplingMode::Bootstrap),
            "without_replacement" => Ok(SamplingMode::WithoutReplacement),
            _ => Err(Error::Configuration(format!("unknown sampling mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub records: Vec<f64>,
    pub m: usize,
    pub datum_len: usize,
    pub mode: SamplingMode,
    pub source_indices: Option<Vec<usize>>,
}

impl Batch {
    pub fn record(&self, i: usize) -> &[f64] {
        &self.records[i * self.datum_len..(i + 1) * self.datum_len]
    }
}

pub fn generate_dataset(model: &ObjectiveModel, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::ParameterDomain("dataset size must be at least 1".into()));
    }
    let mut rng = stream(seed);
    Ok(Dataset { records: model.generate_records(n, &mut rng), n, datum_len: model.datum_len(), seed })
}

fn check_dataset(model: &ObjectiveModel, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::ParameterDomain("empty dataset".into()));
    }
    check_dim(model.datum_len(), data.datum_len)
}

/// Mean of per-datum gradients over the whole dataset.
pub fn empirical_grad(model: &ObjectiveModel, data: &Dataset, theta: &[f64]) -> Result<ParamVector> {
    check_dim(model.dim(), theta.len())?;
    check_dataset(model, data)?;
    let mut out = vec![0.0; model.dim()];
    mean_grad(model, data.records(), data.n, theta, &mut out);
    Ok(out)
}

fn mean_grad<'a>(model: &ObjectiveModel, records: impl Iterator<Item = &'a [f64]>, n: usize, theta: &[f64], out: &mut [f64]) {
    let mut g = vec![0.0; out.len()];
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in records {
        model.datum_grad_into(theta, r, &mut g);
        for (o, v) in out.iter_mut().zip(&g) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= n as f64);
}

/// Draws a mini-batch of size `m`.
pub fn draw_minibatch(model: &ObjectiveModel, data: Option<&Dataset>, m: usize, mode: SamplingMode, rng: &mut StreamRng) -> Result<Batch> {
    if m == 0 {
        return Err(Error::Sampling("batch size must be at least 1".into()));
    }
    let d = model.datum_len();
    let mut records = vec![0.0; m * d];
    let indices = match mode {
        SamplingMode::Population => {
            for r in records.chunks_exact_mut(d) {
                model.sample_datum(rng, r);
            }
            None
        }
        SamplingMode::Bootstrap | SamplingMode::WithoutReplacement => {
            let data = data.ok_or_else(|| Error::Sampling(format!("{mode:?} sampling needs a dataset")))?;
            check_dataset(model, data)?;
            let mut sampler = IndexSampler::new(data.len());
            let idx = sampler.draw(m, mode, rng)?;
            for (r, &i) in records.chunks_exact_mut(d).zip(&idx) {
                r.copy_from_slice(data.record(i));
            }
            Some(idx)
        }
    };
    Ok(Batch { records, m, datum_len: d, mode, source_indices: indices })
}

pub fn minibatch_grad(model: &ObjectiveModel, batch: &Batch, theta: &[f64]) -> Result<ParamVector> {
    check_dim(model.dim(), theta.len())?;
    check_dim(model.datum_len(), batch.datum_len)?;
    if batch.m == 0 {
        return Err(Error::Sampling("empty batch".into()));
    }
    let mut out = vec![0.0; model.dim()];
    mean_grad(model, batch.records.chunks_exact(batch.datum_len), batch.m, theta, &mut out);
    Ok(out)
}

/// Index sampler that restores its permutation after every draw, so each
/// draw depends only on the RNG it is given.
#[derive(Debug, Clone)]
pub struct IndexSampler {
    perm: Vec<usize>,
    swaps: Vec<usize>,
    picked: Vec<usize>,
}

impl IndexSampler {
    pub fn new(n: usize) -> Self {
        IndexSampler { perm: (0..n).collect(), swaps: Vec::new(), picked: Vec::new() }
    }

    pub fn draw(&mut self, m: usize, mode: SamplingMode, rng: &mut StreamRng) -> Result<Vec<usize>> {
        self.draw_in_place(m, mode, rng)?;
        Ok(self.picked.clone())
    }

    /// Fills an internal buffer with `m` indices and returns it.
    pub fn draw_in_place(&mut self, m: usize, mode: SamplingMode, rng: &mut StreamRng) -> Result<&[usize]> {
        let n = self.perm.len();
        self.picked.clear();
        match mode {
            SamplingMode::Bootstrap => {
                for _ in 0..m {
                    self.picked.push(rng.random_range(0..n));
                }
            }
            SamplingMode::WithoutReplacement => {
                if m > n {
                    return Err(Error::Sampling(format!("cannot draw {m} distinct records from {n}")));
                }
                self.swaps.clear();
                for i in 0..m {
                    let j = rng.random_range(i..n);
                    self.perm.swap(i, j);
                    self.swaps.push(j);
                    self.picked.push(self.perm[i]);
                }
                for (i, &j) in self.swaps.iter().enumerate().rev() {
                    self.perm.swap(i, j);
                }
            }
            SamplingMode::Population => {
                return Err(Error::Sampling("population mode does not sample indices".into()));
            }
        }
        Ok(&self.picked)
    }
}

/// Affine representation `grad(x) = b + A x` of a data-averaged gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineField {
    pub b: Vec<f64>,
    /// Row-major `p x p`.
    pub a: Vec<f64>,
}

impl AffineField {
    /// Builds the affine form of the full-data gradient. Requires an affine model.
    pub fn from_dataset(model: &ObjectiveModel, data: &Dataset) -> Result<Self> {
        if !model.is_affine() {
            return Err(Error::Precondition(format!("{} gradients are not affine", model.name())));
        }
        let p = model.dim();
        let zero = vec![0.0; p];
        let b = empirical_grad(model, data, &zero)?;
        let mut a = vec![0.0; p * p];
        let mut e = vec![0.0; p];
        for j in 0..p {
            e[j] = 1.0;
            let gj = empirical_grad(model, data, &e)?;
            for i in 0..p {
                a[i * p + j] = gj[i] - b[i];
            }
            e[j] = 0.0;
        }
        Ok(AffineField { b, a })
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let p = self.b.len();
        for i in 0..p {
            let row = &self.a[i * p..(i + 1) * p];
            out[i] = self.b[i] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Stationary point `-A^{-1} b`.
    pub fn root(&self) -> Result<Vec<f64>> {
        let p = self.b.len();
        let a = nalgebra::DMatrix::from_row_slice(p, p, &self.a);
        let b = nalgebra::DVector::from_column_slice(&self.b);
        let x = a.lu().solve(&(-b)).ok_or_else(|| Error::Singularity("singular affine field".into()))?;
        Ok(x.iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::make_quadratic_mean;
    use crate::seeding::substream;

    #[test]
    fn sampler_restores_permutation() {
        let mut s = IndexSampler::new(10);
        let mut rng = substream(1, 0);
        let a = s.draw(4, SamplingMode::WithoutReplacement, &mut rng).unwrap();
        assert_eq!(s.perm, (0..10).collect::<Vec<_>>());
        let mut rng = substream(1, 0);
        let b = s.draw(4, SamplingMode::WithoutReplacement, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn affine_field_matches_direct() {
        let model = make_quadratic_mean(&[0.0, 1.0], 1.0).unwrap();
        let d = generate_dataset(&model, 100, 3).unwrap();
        let f = AffineField::from_dataset(&model, &d).unwrap();
        let mut out = vec![0.0; 2];
        f.eval_into(&[0.3, -0.7], &mut out);
        let direct = empirical_grad(&model, &d, &[0.3, -0.7]).unwrap();
        for i in 0..2 {
            assert!((out[i] - direct[i]).abs() < 1e-12);
        }
        let root = f.root().unwrap();
        let mean = d.mean();
        assert!((root[0] - mean[0]).abs() < 1e-12 && (root[1] - mean[1]).abs() < 1e-12);
    }
}
