use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Unique symmetric `G` with `G H + H G = S`, via the vectorized system
/// `(H (x) I + I (x) H) vec(G) = vec(S)`.
pub fn lyapunov_stationary(h: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = h.nrows();
    if h.ncols() != p || s.nrows() != p || s.ncols() != p {
        return Err(Error::Shape { expected: p, got: s.nrows() });
    }
    let sym = 0.5 * (h + h.transpose());
    if (h - &sym).norm() > 1e-12 * (1.0 + h.norm()) {
        return Err(Error::ParameterDomain("H must be symmetric".into()));
    }
    if sym.clone().cholesky().is_none() {
        return Err(Error::ParameterDomain("H must be positive definite".into()));
    }
    let eye = DMatrix::<f64>::identity(p, p);
    let k = sym.kronecker(&eye) + eye.kronecker(&sym);
    let rhs = nalgebra::DVector::from_iterator(p * p, s.iter().copied());
    let sol = k.lu().solve(&rhs).ok_or_else(|| Error::Singularity("singular Lyapunov operator".into()))?;
    let g = DMatrix::from_column_slice(p, p, sol.as_slice());
    Ok(0.5 * (&g + g.transpose()))
}
