use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;

/// Least-squares fit `Σ zᵢ uᵢuᵢᵀ` of `m` over the rank-one matrices of the basis columns.
///
/// Orthonormal columns give `zᵢ = uᵢᵀ M uᵢ`; oblique ones solve the normal
/// equations `Σⱼ (uᵢᵀuⱼ)² zⱼ = uᵢᵀ M uᵢ`.
pub fn project_matrix(m: &SymMatrix, basis: &DMatrix<f64>) -> Result<SymMatrix> {
    let n = m.dim();
    if basis.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: basis.nrows() });
    }
    let k = basis.ncols();
    if k == 0 {
        return Ok(SymMatrix::zeros(n));
    }
    if k > n {
        return Err(Error::RankDeficient { rows: n, cols: k });
    }
    let sv = basis.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-12 * smax) {
        return Err(Error::RankDeficient { rows: n, cols: k });
    }

    let gram = basis.transpose() * basis;
    let h = gram.map(|g| g * g);
    let r = DVector::from_iterator(k, (0..k).map(|i| {
        let u = basis.column(i);
        u.dot(&(m.as_dmatrix() * u))
    }));
    let z = h
        .cholesky()
        .ok_or(Error::RankDeficient { rows: n, cols: k })?
        .solve(&r);

    let mut scaled = basis.clone();
    for (j, zj) in z.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*zj);
    }
    Ok(SymMatrix::symmetrized(scaled * basis.transpose()))
}
