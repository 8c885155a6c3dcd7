//! Small dense complex linear algebra helpers shared across the crate.
//!
//! All matrices here are desk-scale (at most a few hundred rows), so every
//! routine is a plain dense algorithm on `nalgebra` types.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<C64>;
/// Dense complex vector used throughout the crate.
pub type CVector = DVector<C64>;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max |A - A^H| = {max_asymmetry:.3e} exceeds {tol:.3e}")]
    NotHermitian { max_asymmetry: f64, tol: f64 },
    #[error("eigendecomposition did not converge")]
    NoConvergence,
}

/// Largest entrywise deviation from Hermiticity, max_ij |A_ij - conj(A_ji)|.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut max = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > max {
                max = d;
            }
        }
    }
    max
}

fn check_hermitian(m: &CMatrix, tol: f64) -> Result<(), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let err = hermiticity_error(m);
    if err > tol {
        return Err(LinalgError::NotHermitian {
            max_asymmetry: err,
            tol,
        });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    /// Real eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose k-th column is the eigenvector of `values[k]`.
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    /// Spread between the largest and smallest eigenvalue.
    pub fn spread(&self) -> f64 {
        self.max() - self.min()
    }

    /// Eigenvector for the k-th (ascending) eigenvalue.
    pub fn eigenvector(&self, k: usize) -> CVector {
        self.vectors.column(k).into()
    }
}

/// Hermitian eigendecomposition with validation.
///
/// The input must be Hermitian within `tol`; it is symmetrized as
/// `(A + A^H)/2` before factorization so the decomposition itself sees an
/// exactly Hermitian matrix.
pub fn eigh(m: &CMatrix, tol: f64) -> Result<Eigh, LinalgError> {
    check_hermitian(m, tol)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Eigh {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let decomp = sym
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or(LinalgError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomp.eigenvalues[a]
            .partial_cmp(&decomp.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&k| decomp.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors
            .column_mut(dst)
            .copy_from(&decomp.eigenvectors.column(src));
    }
    Ok(Eigh { values, vectors })
}

/// Commutator [A, B] = AB - BA.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Haar-distributed random unitary via QR of a complex Ginibre matrix.
///
/// The R diagonal phases are divided out so the distribution is exactly
/// Haar rather than QR-convention dependent.
pub fn haar_unitary<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase.conj();
        }
    }
    q
}

/// Normalized complex Gaussian vector (Haar-distributed on the unit sphere).
pub fn random_unit_vector<R: Rng>(dim: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(dim, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let norm = v.norm();
        if norm > 1e-12 {
            return v.unscale(norm);
        }
    }
}
