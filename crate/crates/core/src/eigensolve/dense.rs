use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// All eigenpairs of `K x = lambda M x` by dense Cholesky reduction,
/// ascending, with `M`-orthonormal eigenvectors.
pub fn dense_generalized(k: &CsrMatrix, m: &CsrMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let kd = k.to_dense();
    let md = m.to_dense();
    let chol = md
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = &linv * kd * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..k.n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let back: DMatrix<f64> = linv.transpose() * &eig.eigenvectors;
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx.iter().map(|&i| back.column(i).iter().copied().collect()).collect();
    Ok((vals, vecs))
}
