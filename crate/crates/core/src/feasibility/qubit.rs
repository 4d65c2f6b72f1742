use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::pauli;
use crate::povm::{Label, ProductLabeledPovm};

/// Slack on the boundary of the qubit criterion. Decimal inputs such as
/// 0.8 and 0.6 are not exact in binary, so an equality case can land a few
/// ulps on the wrong side.
pub const BUSCH_BOUNDARY_TOL: f64 = 1e-12;

/// 1 − (s² + t² − cos²θ·s²t²); nonnegative exactly when A_s and B_{t,θ}
/// are jointly measurable.
pub fn busch_margin(s: f64, t: f64, theta: f64) -> Result<f64> {
    for (name, v) in [("s", s), ("t", t)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::OutOfRange(format!("{name} = {v} not in (0, 1]")));
        }
    }
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(Error::OutOfRange(format!("theta = {theta} not in [0, pi/2]")));
    }
    let c = theta.cos();
    Ok(1.0 - (s * s + t * t - c * c * s * s * t * t))
}

pub fn busch_criterion(s: f64, t: f64, theta: f64) -> Result<bool> {
    Ok(busch_margin(s, t, theta)? >= -BUSCH_BOUNDARY_TOL)
}

/// M(i,j) = ¼(I + i·s·σ_z + j·t·σ_x), a joint observable of A_s and
/// B_{t,π/2} whenever s² + t² ≤ 1.
pub fn orthogonal_joint_observable(s: f64, t: f64) -> Result<ProductLabeledPovm> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("s = {s}, t = {t} must lie in [0, 1]")));
    }
    if s * s + t * t > 1.0 + BUSCH_BOUNDARY_TOL {
        return Err(Error::OutOfRange(format!("s² + t² = {} exceeds 1", s * s + t * t)));
    }
    let mut entries = Vec::with_capacity(4);
    for i in [1, -1] {
        for j in [1, -1] {
            let v = [j as f64 * t / 4.0, 0.0, i as f64 * s / 4.0];
            entries.push(((Label::single(i), Label::single(j)), pauli::bloch_operator(0.25, v)));
        }
    }
    ProductLabeledPovm::from_pairs(2, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::herm_eig;
    use crate::povm::{a_s, b_t_theta};

    #[test]
    fn criterion_examples() {
        assert!(busch_criterion(0.8, 0.6, FRAC_PI_2).unwrap());
        assert!(!busch_criterion(0.8, 0.7, FRAC_PI_2).unwrap());
        for s in [0.1, 0.5, 0.9, 1.0] {
            for t in [0.2, 0.7, 1.0] {
                assert!(busch_criterion(s, t, 0.0).unwrap());
            }
        }
        assert!((busch_margin(0.8, 0.7, FRAC_PI_2).unwrap() + 0.13).abs() < 1e-12);
    }

    #[test]
    fn criterion_rejects_out_of_range() {
        assert!(busch_criterion(0.0, 0.5, 0.1).is_err());
        assert!(busch_criterion(0.5, 1.1, 0.1).is_err());
        assert!(busch_criterion(0.5, 0.5, -0.1).is_err());
        assert!(busch_criterion(0.5, 0.5, 2.0).is_err());
        assert!(busch_criterion(f64::NAN, 0.5, 0.1).is_err());
    }

    #[test]
    fn orthogonal_joint_at_equal_weights() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = orthogonal_joint_observable(h, h).unwrap();
        assert!(m.validate(1e-12));
        for (_, e) in m.entries() {
            let ev = herm_eig(e, 1e-12).unwrap().eigenvalues;
            assert!(ev[0].abs() < 1e-12 && (ev[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_joint_marginals() {
        let m = orthogonal_joint_observable(0.6, 0.6).unwrap();
        let expected_min = 0.25 * (1.0 - 0.72f64.sqrt());
        for (_, e) in m.entries() {
            let ev = herm_eig(e, 1e-12).unwrap().eigenvalues;
            assert!((ev[0] - expected_min).abs() < 1e-12);
        }
        let (ma, mb) = m.marginals();
        assert!(ma.max_deviation(&a_s(0.6).unwrap()).unwrap() < 1e-15);
        assert!(mb.max_deviation(&b_t_theta(0.6, FRAC_PI_2).unwrap()).unwrap() < 1e-15);
        assert!(orthogonal_joint_observable(0.8, 0.7).is_err());
    }
}
