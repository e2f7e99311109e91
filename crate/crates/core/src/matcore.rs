//! Dense symmetric-matrix kernels.
//!
//! Every matrix operand of the solver (iterate, cost, constraints, dual slack)
//! is a [`SymMatrix`]. Construction symmetrizes via `(M + Mᵀ)/2`, so the
//! stored entries are exactly symmetric and downstream code never has to
//! re-check. Vectorization is column stacking; for symmetric operands this
//! agrees with row stacking.
//!
//! Storage is backed by `nalgebra::DMatrix`; eigen-decompositions go through
//! `nalgebra::linalg::SymmetricEigen` with a deterministic ordering and sign
//! convention layered on top.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue cutoff used by [`pinv_solve`].
pub const PINV_RCOND: f64 = 1e-12;

/// Negative eigenvalues down to this magnitude are clamped by [`matrix_sqrt`].
pub const SQRT_CLAMP: f64 = 1e-10;

/// A dense, exactly symmetric `n × n` real matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl std::fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SymMatrix{}", self.inner)
    }
}

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ)/2`.
    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        let (r, c) = m.shape();
        if r != c {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        if r == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes a square matrix; the caller guarantees squareness.
    pub(crate) fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        debug_assert_eq!(n, m.ncols());
        for j in 0..n {
            for i in (j + 1)..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Self { inner: m }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        for row in rows {
            if row.len() != n {
                return Err(Error::NotSquare { rows: n, cols: row.len() });
            }
        }
        Self::from_dmatrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n > 0, "matrix dimension must be positive");
        Self::symmetrized(DMatrix::from_fn(n, n, f))
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_fn(n, |_, _| 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// `E_ij + E_ji` for `i != j`, `E_ii` otherwise.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        Self::from_fn(n, |r, c| {
            if (r == i && c == j) || (r == j && c == i) {
                1.0
            } else {
                0.0
            }
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.inner[(i, j)]).collect()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.inner[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.inner.amax()
    }

    /// `tr(self · other)`; panics on dimension mismatch.
    #[inline]
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in trace inner product");
        self.inner.dot(&other.inner)
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        Self { inner: &self.inner * s }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim(), other.dim());
        Self { inner: &self.inner + &other.inner }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim(), other.dim());
        Self { inner: &self.inner - &other.inner }
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, s: f64, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim(), other.dim());
        let mut inner = self.inner.clone();
        inner.zip_apply(&other.inner, |a, b| *a += s * b);
        Self { inner }
    }

    /// Symmetric part of `self · other · self`.
    pub fn sandwich(&self, middle: &SymMatrix) -> SymMatrix {
        let t = &self.inner * &middle.inner * &self.inner;
        Self::symmetrized(t)
    }

    /// `Bᵀ · self · B` for a (possibly rectangular) `n × k` matrix `B`.
    pub fn congruence(&self, b: &DMatrix<f64>) -> SymMatrix {
        assert_eq!(b.nrows(), self.dim());
        Self::symmetrized(b.transpose() * &self.inner * b)
    }

    /// Inverse of a positive definite matrix via its eigendecomposition.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        let eig = eigendecompose(self);
        let lmin = eig.min();
        if lmin <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eig: lmin });
        }
        Ok(eig.map_values(|l| 1.0 / l))
    }

    /// Largest absolute entry of the difference with `other`.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim());
        (&self.inner - &other.inner).amax()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// Column-stacked `vec(M)` of an `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VecMatrix {
    n: usize,
    data: Vec<f64>,
}

impl VecMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn dot(&self, other: &VecMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Reshapes back to a matrix, symmetrizing.
    pub fn unvec(&self) -> SymMatrix {
        let n = self.n;
        SymMatrix::symmetrized(DMatrix::from_column_slice(n, n, &self.data))
    }
}

/// Column-stacking vectorization.
pub fn vec(m: &SymMatrix) -> VecMatrix {
    // DMatrix is column-major, so its backing slice is already column-stacked.
    VecMatrix { n: m.dim(), data: m.inner.as_slice().to_vec() }
}

pub fn unvec(v: &VecMatrix) -> SymMatrix {
    v.unvec()
}

/// `tr(A B)`.
pub fn trace_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(a.dot(b))
}

/// Ascending eigenvalues with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomp {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            scaled.column_mut(j).scale_mut(s);
        }
        SymMatrix::symmetrized(scaled * self.vectors.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_values(|l| l)
    }

    /// `Σ ln λᵢ`; `-inf` if any eigenvalue is non-positive.
    pub fn log_det(&self) -> f64 {
        if self.min() <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.values.iter().map(|l| l.ln()).sum()
    }
}

/// Symmetric eigendecomposition, ascending, with the first non-negligible
/// component of every eigenvector made positive.
pub fn eigendecompose(m: &SymMatrix) -> EigenDecomp {
    let n = m.dim();
    let eig = nalgebra::linalg::SymmetricEigen::new(m.inner.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    EigenDecomp { values, vectors }
}

pub fn min_eigenvalue(m: &SymMatrix) -> f64 {
    eigendecompose(m).min()
}

pub fn is_psd(m: &SymMatrix, tol: f64) -> bool {
    min_eigenvalue(m) >= -tol
}

/// Minimum-norm least-squares solution `L† · rhs` for a symmetric PSD `L`.
pub fn pinv_solve(l: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    pinv_solve_rcond(l, rhs, PINV_RCOND)
}

pub fn pinv_solve_rcond(l: &DMatrix<f64>, rhs: &DVector<f64>, rcond: f64) -> DVector<f64> {
    let m = l.nrows();
    assert_eq!(m, l.ncols(), "pinv_solve needs a square matrix");
    assert_eq!(m, rhs.len(), "pinv_solve rhs length mismatch");
    if m == 0 {
        return DVector::zeros(0);
    }
    let sym = 0.5 * (l + l.transpose());
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.amax();
    let mut out = DVector::zeros(m);
    if lmax == 0.0 {
        return out;
    }
    let cutoff = rcond * lmax;
    for k in 0..m {
        let lam = eig.eigenvalues[k];
        if lam.abs() > cutoff {
            let v = eig.eigenvectors.column(k);
            out.axpy(v.dot(rhs) / lam, &v, 1.0);
        }
    }
    out
}

/// Basis `Ũ` with `ŨᵀCŨ = I` and `ŨᵀX0Ũ = diag(λ)`, λ ascending.
///
/// Columns are the generalized eigenvectors of the pencil `(X0, C)`.
pub fn simultaneous_diagonalize(c: &SymMatrix, x0: &SymMatrix) -> Result<DMatrix<f64>> {
    if c.dim() != x0.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), got: x0.dim() });
    }
    let ec = eigendecompose(c);
    if ec.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eig: ec.min() });
    }
    let ex = min_eigenvalue(x0);
    if ex <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eig: ex });
    }
    let c_inv_sqrt = ec.map_values(|l| 1.0 / l.sqrt());
    let whitened = x0.congruence(c_inv_sqrt.as_dmatrix());
    let ew = eigendecompose(&whitened);
    Ok(c_inv_sqrt.as_dmatrix() * ew.vectors)
}

/// Principal square root of a PSD matrix.
pub fn matrix_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = eigendecompose(m);
    if eig.min() < -SQRT_CLAMP {
        return Err(Error::NotPositiveSemidefinite { min_eig: eig.min() });
    }
    Ok(eig.map_values(|l| l.max(0.0).sqrt()))
}

/// Orthonormal basis of the column span of `b` (modified Gram-Schmidt).
pub fn orthonormalize(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = b.shape();
    let mut q = b.clone();
    for j in 0..k {
        let scale = b.column(j).norm();
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm <= 1e-12 * scale.max(f64::MIN_POSITIVE) || norm == 0.0 {
            return Err(Error::RankDeficient { rows: n, cols: k });
        }
        q.column_mut(j).unscale_mut(norm);
    }
    Ok(q)
}
