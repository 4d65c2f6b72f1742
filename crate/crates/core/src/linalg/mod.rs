//! Dense complex linear algebra shared by every other module.

mod eigen;
mod matrix;
pub mod pauli;

pub use eigen::{herm_eig, HermitianEigen};
pub use matrix::{ComplexMatrix, C64, I, ONE, ZERO};

use crate::error::{Error, Result};

/// Which tensor factor a partial trace removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Kronecker product a ⊗ b.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    ComplexMatrix::from_fn(ar * br, ac * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// Partial trace of a (dim_first·dim_second)-square matrix over one factor.
pub fn partial_trace(
    m: &ComplexMatrix,
    dim_first: usize,
    dim_second: usize,
    traced: Factor,
) -> Result<ComplexMatrix> {
    let n = dim_first * dim_second;
    if m.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "partial trace over {dim_first}x{dim_second} factors needs a {n}x{n} matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(match traced {
        Factor::Second => ComplexMatrix::from_fn(dim_first, dim_first, |a, b| {
            (0..dim_second)
                .map(|k| m[(a * dim_second + k, b * dim_second + k)])
                .sum()
        }),
        Factor::First => ComplexMatrix::from_fn(dim_second, dim_second, |a, b| {
            (0..dim_first)
                .map(|k| m[(k * dim_second + a, k * dim_second + b)])
                .sum()
        }),
    })
}

/// Eigenvalues within this multiple of machine epsilon (relative to the
/// largest) are roundoff; their square roots would be spuriously large.
const SQRT_ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// PSD square root. Eigenvalues in [−tol, 0) and those at roundoff level
/// are clipped to zero.
pub fn sqrt_psd(m: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let eig = herm_eig(m, tol)?;
    let min = eig.min_eigenvalue();
    if min < -tol {
        return Err(Error::NegativeEigenvalue(min));
    }
    let floor = SQRT_ROUNDOFF * eig.max_eigenvalue().max(0.0);
    Ok(eig.reconstruct_with(|l| if l > floor { l.sqrt() } else { 0.0 }))
}

/// Hermitian within `tol` and no eigenvalue below −tol.
pub fn is_psd(m: &ComplexMatrix, tol: f64) -> bool {
    match herm_eig(m, tol) {
        Ok(eig) => eig.min_eigenvalue() >= -tol,
        Err(_) => false,
    }
}

/// Orthonormal basis of the range of a PSD matrix, one column per
/// eigenvalue above `rank_tol`, largest eigenvalue first.
pub fn range_isometry(m: &ComplexMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    let (u, _) = range_decomposition(m, rank_tol)?;
    Ok(u)
}

/// Range basis together with the retained eigenvalues (same order).
pub fn range_decomposition(m: &ComplexMatrix, rank_tol: f64) -> Result<(ComplexMatrix, Vec<f64>)> {
    let eig = herm_eig(m, f64::max(rank_tol, 1e-9) * f64::max(1.0, m.frobenius_norm()))?;
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .rev()
        .filter(|&k| eig.eigenvalues[k] > rank_tol)
        .collect();
    let values = keep.iter().map(|&k| eig.eigenvalues[k]).collect();
    Ok((eig.eigenvectors.select_columns(&keep), values))
}

/// Numerical rank: number of eigenvalues above `rank_tol`.
pub fn psd_rank(m: &ComplexMatrix, rank_tol: f64) -> Result<usize> {
    Ok(range_decomposition(m, rank_tol)?.1.len())
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
pub fn project_psd(m: &ComplexMatrix) -> ComplexMatrix {
    let eig = herm_eig(&m.hermitian_part(), f64::INFINITY).expect("square input");
    if eig.min_eigenvalue() >= 0.0 {
        return m.hermitian_part();
    }
    eig.reconstruct_with(|l| l.max(0.0))
}

/// Moore–Penrose pseudo-inverse via A† (A A†)⁺, discarding eigenvalues of
/// A A† below `rel_cutoff` times the largest one.
pub fn pseudo_inverse(a: &ComplexMatrix, rel_cutoff: f64) -> ComplexMatrix {
    let gram = a * &a.adjoint();
    let eig = herm_eig(&gram, f64::INFINITY).expect("square gram matrix");
    let cutoff = rel_cutoff * eig.max_eigenvalue().max(0.0);
    let inv = eig.reconstruct_with(|l| if l > cutoff && l > 0.0 { 1.0 / l } else { 0.0 });
    &a.adjoint() * &inv
}

/// Default tolerances. Every consumer takes tolerances explicitly; these
/// are the values used when the caller has no opinion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Hermiticity and positivity checks.
    pub psd: f64,
    /// Eigenvalues at or below this count as zero when computing ranks.
    pub rank: f64,
    /// Trace and positivity checks on input states.
    pub state: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd: 1e-9,
            rank: 1e-9,
            state: 1e-8,
        }
    }
}
