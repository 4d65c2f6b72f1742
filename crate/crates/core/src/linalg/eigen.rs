//! Hermitian eigendecomposition by cyclic complex Jacobi rotations.
//!
//! Sweeps visit the pairs (p, q), p < q, in row order, so the result is a
//! deterministic function of the input bits.

use super::matrix::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Spectrum and eigenbasis of a Hermitian matrix.
///
/// Eigenvalues ascend; column `k` of `eigenvectors` belongs to
/// `eigenvalues[k]` and has its largest-magnitude entry real and positive.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    /// U diag(f(λ)) U†
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let n = u.rows();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for r in 0..n {
                let ur = u[(r, k)] * w;
                if ur == ZERO {
                    continue;
                }
                for c in 0..n {
                    out[(r, c)] += ur * u[(c, k)].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|l| l)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

/// Eigendecomposition of `m`, which must satisfy ‖m − m†‖_F ≤ tol.
///
/// The Hermitian part of `m` is diagonalized. Off-diagonal mass is driven
/// below `1e-15·‖m‖_F`, which keeps the reconstruction error near machine
/// precision for the dimensions this crate targets (≤ 64).
pub fn herm_eig(m: &ComplexMatrix, tol: f64) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let herr = m.hermiticity_error();
    if herr > tol {
        return Err(Error::NotHermitian(herr));
    }
    Ok(jacobi(m.hermitian_part()))
}

fn off_diagonal_norm_sqr(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                acc += a[(r, c)].norm_sqr();
            }
        }
    }
    acc
}

fn jacobi(mut a: ComplexMatrix) -> HermitianEigen {
    let n = a.rows();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    let threshold = (1e-15 * scale).powi(2);

    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm_sqr(&a) <= threshold {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]).then(i.cmp(&j)));

    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = v.select_columns(&order);
    fix_phases(&mut eigenvectors);
    HermitianEigen {
        eigenvalues,
        eigenvectors,
    }
}

/// Zeroes a[p][q] with the unitary U = D·R, where D removes the phase of
/// a[p][q] and R is a real Jacobi rotation.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let phase = apq / r; // e^{iφ}
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let pc = phase.conj();
    // U restricted to (p, q): [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
    let u_pp = C64::new(c, 0.0);
    let u_pq = C64::new(s, 0.0);
    let u_qp = pc * (-s);
    let u_qq = pc * c;

    let n = a.rows();
    // A ← A U
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    // A ← U† A
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    // V ← V U
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
}

/// Rotates every column so that its largest-magnitude entry (first one on
/// near-ties) is real and positive.
fn fix_phases(u: &mut ComplexMatrix) {
    let (rows, cols) = u.shape();
    for c in 0..cols {
        let mut best = 0;
        let mut best_mag = -1.0;
        for r in 0..rows {
            let mag = u[(r, c)].norm();
            if mag > best_mag + 1e-12 {
                best = r;
                best_mag = mag;
            }
        }
        if best_mag <= 0.0 {
            continue;
        }
        let phase = u[(best, c)].conj() / best_mag;
        for r in 0..rows {
            u[(r, c)] *= phase;
        }
        u[(best, c)] = C64::new(u[(best, c)].norm(), 0.0);
    }
}
