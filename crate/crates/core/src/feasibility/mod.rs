//! Convex feasibility tests: Choi decompositions (A-channels and conjugate
//! B-channels), compensating observables, joint observables, and the exact
//! qubit criterion.
//!
//! All numerical searches run [`dykstra::ConeProblem`] and re-check any
//! witness directly against the problem before reporting Feasible.

pub mod dykstra;
mod joint;
mod qubit;
mod decompose;

use serde::{Deserialize, Serialize};

use crate::linalg::ComplexMatrix;

pub use decompose::{conjugate_is_b_channel, decompose_psd, is_a_channel, recover_b_prime, DecompositionProblem};
pub use joint::{find_joint_observable, find_joint_observables, JointSearch};
pub use qubit::{busch_criterion, busch_margin, orthogonal_joint_observable, BUSCH_BOUNDARY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Feasible,
    Infeasible,
    Undecided,
}

impl Status {
    pub fn is_feasible(self) -> bool {
        self == Status::Feasible
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Feasible => "Feasible",
            Status::Infeasible => "Infeasible",
            Status::Undecided => "Undecided",
        };
        f.write_str(s)
    }
}

/// Solver settings. Infeasible is declared only when the residual changes by
/// less than `stall_delta` for `stall_window` consecutive iterations while
/// staying above `floor_factor · tol`. This is a heuristic, not a proof.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub stall_window: usize,
    pub stall_delta: f64,
    pub floor_factor: f64,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 50_000,
            stall_window: 500,
            stall_delta: 1e-12,
            floor_factor: 10.0,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOutcome {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<ComplexMatrix>>,
    pub residual: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub infeasibility_floor: Option<f64>,
    /// Constraint residual of the PSD iterate, one entry per iteration.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl FeasibilityOutcome {
    pub fn is_feasible(&self) -> bool {
        self.status.is_feasible()
    }

    pub(crate) fn feasible(witness: Vec<ComplexMatrix>, residual: f64) -> Self {
        Self {
            status: Status::Feasible,
            witness: Some(witness),
            residual,
            iterations: 0,
            infeasibility_floor: None,
            trace: Vec::new(),
        }
    }

    /// Keeps Feasible only if the independent check accepts the witness.
    pub(crate) fn confirm(mut self, check: impl FnOnce(&[ComplexMatrix]) -> bool) -> Self {
        if self.status == Status::Feasible {
            let ok = self.witness.as_deref().map(check).unwrap_or(false);
            if !ok {
                self.status = Status::Undecided;
                self.witness = None;
            }
        }
        self
    }
}

/// Largest constraint violation of PSD-ness over a list of blocks.
pub(crate) fn psd_violation(blocks: &[ComplexMatrix]) -> f64 {
    blocks
        .iter()
        .map(|b| {
            let eig = crate::linalg::herm_eig(&b.hermitian_part(), f64::INFINITY).expect("square");
            (-eig.min_eigenvalue()).max(b.hermiticity_error())
        })
        .fold(0.0, f64::max)
}

/// Subspace bases used to confine solver blocks to faces of the PSD cone
/// on which every solution must lie. Rank decisions err towards larger
/// subspaces, which only weakens the reduction.
pub(crate) mod faces {
    use crate::linalg::{range_isometry, ComplexMatrix};

    /// Eigenvalues of a PSD input at or below this are treated as zero.
    pub const RANK_TOL: f64 = 1e-9;

    /// Eigenvalues of a sum of two projectors above 2 − this mark the
    /// intersection of their ranges.
    const INTERSECTION_TOL: f64 = 1e-8;

    /// Orthonormal basis of the range of a PSD matrix.
    pub fn range(m: &ComplexMatrix) -> ComplexMatrix {
        range_isometry(m, RANK_TOL).expect("square input")
    }

    /// Orthonormal basis of the orthogonal complement of span(columns).
    pub fn complement(span: &ComplexMatrix) -> ComplexMatrix {
        let d = span.rows();
        let basis = range(&(span * &span.adjoint()));
        let q = &ComplexMatrix::identity(d) - &(&basis * &basis.adjoint());
        range_isometry(&q, 0.5).expect("square input")
    }

    /// Orthonormal basis of range(u) ∩ range(v) for orthonormal u, v.
    pub fn intersect(u: &ComplexMatrix, v: &ComplexMatrix) -> ComplexMatrix {
        let sum = &(u * &u.adjoint()) + &(v * &v.adjoint());
        range_isometry(&sum, 2.0 - INTERSECTION_TOL).expect("square input")
    }

}
