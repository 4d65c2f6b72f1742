//! Pauli matrices and Bloch-vector helpers for qubits.

use super::matrix::{ComplexMatrix, C64, ZERO};

pub fn x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn y() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO])
        .expect("2x2")
}

pub fn z() -> ComplexMatrix {
    ComplexMatrix::diag_real(&[1.0, -1.0])
}

/// a·I + v·σ
pub fn bloch_operator(a: f64, v: [f64; 3]) -> ComplexMatrix {
    ComplexMatrix::from_vec(
        2,
        2,
        vec![
            C64::new(a + v[2], 0.0),
            C64::new(v[0], -v[1]),
            C64::new(v[0], v[1]),
            C64::new(a - v[2], 0.0),
        ],
    )
    .expect("2x2")
}

/// Coefficients (a, v) with m = a·I + v·σ for a Hermitian 2×2 matrix.
pub fn bloch_decompose(m: &ComplexMatrix) -> (f64, [f64; 3]) {
    assert_eq!(m.shape(), (2, 2), "Bloch decomposition needs a qubit operator");
    let a = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
    let vx = 0.5 * (m[(0, 1)].re + m[(1, 0)].re);
    let vy = 0.5 * (m[(1, 0)].im - m[(0, 1)].im);
    let vz = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
    (a, [vx, vy, vz])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bloch_round_trip() {
        let m = bloch_operator(0.5, [0.1, -0.2, 0.3]);
        let expected = &(&(&ComplexMatrix::identity(2).scale_real(0.5) + &x().scale_real(0.1))
            + &y().scale_real(-0.2))
            + &z().scale_real(0.3);
        assert!(m.approx_eq(&expected, 1e-15));
        let (a, v) = bloch_decompose(&m);
        assert!((a - 0.5).abs() < 1e-15);
        assert!((v[0] - 0.1).abs() < 1e-15 && (v[1] + 0.2).abs() < 1e-15 && (v[2] - 0.3).abs() < 1e-15);
    }
}
