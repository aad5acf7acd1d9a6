//! Dense symmetric linear algebra.
//!
//! Dimensions in this crate stay small (block sizes up to roughly a dozen), so
//! everything here is the straightforward dense algorithm: cyclic Jacobi for
//! the symmetric eigenproblem and an unpivoted Cholesky factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`SymMatrix::new`] before it rejects input.
pub const SYMMETRY_TOL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 100;

/// A real symmetric matrix.
///
/// Construction symmetrizes the input as `(A + Aᵀ)/2`, so the stored entries
/// are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m`, symmetrizing it.
    ///
    /// Rejects non-square or non-finite input and asymmetry larger than
    /// [`SYMMETRY_TOL`] relative to the Frobenius norm.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = m.norm().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self::symmetrize(m))
    }

    /// Returns `(m + mᵀ)/2` without checking the asymmetry.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        let sym = (&m + m.transpose()) * 0.5;
        Self(sym)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self(&self.0 * alpha)
    }

    /// `self + alpha·other`.
    pub fn add_scaled(&self, alpha: f64, other: &SymMatrix) -> Self {
        Self(&self.0 + &other.0 * alpha)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// Full symmetric eigendecomposition with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigDecomposition {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `V·diag(λ)·Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        v * DMatrix::from_diagonal(&self.eigenvalues) * v.transpose()
    }
}

/// Cyclic Jacobi eigensolver.
pub fn sym_eig(a: &SymMatrix) -> Result<EigDecomposition> {
    let n = a.dim();
    if n == 0 {
        return Ok(EigDecomposition {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let mut m = a.0.clone();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm();
    let threshold = 1e-15 * scale;

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&m) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > 1e-12 * scale {
        return Err(Error::EigenFailure(format!(
            "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

// A ← JᵀAJ and V ← VJ for the plane rotation in (p, q).
fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = m.nrows();
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = c * akp - s * akq;
        m[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = c * apk - s * aqk;
        m[(q, k)] = s * apk + c * aqk;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(a: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(a)?.max())
}

/// Lower-triangular `L` with `L·Lᵀ = A`.
///
/// Fails with [`Error::NotPositiveDefinite`] as soon as a pivot is not
/// strictly positive; callers use this as the positive-definiteness test.
pub fn cholesky(a: &SymMatrix) -> Result<DMatrix<f64>> {
    let n = a.dim();
    let m = &a.0;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L·Lᵀ·x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// `A⁻¹` from the Cholesky factor of `A`.
pub fn cholesky_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::<f64>::zeros(n);
        e[j] = 1.0;
        inv.set_column(j, &cholesky_solve(l, &e));
    }
    (&inv + inv.transpose()) * 0.5
}

/// Solves `A·x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &SymMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has length {}, matrix is {}x{}",
            b.len(),
            a.dim(),
            a.dim()
        )));
    }
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

/// `‖M‖₂ = sqrt(λ_max(MᵀM))`.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    let gram = SymMatrix::symmetrize(m.transpose() * m);
    Ok(lambda_max(&gram)?.max(0.0).sqrt())
}
