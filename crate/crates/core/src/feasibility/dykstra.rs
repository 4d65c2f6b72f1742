//! Dykstra alternating projections between a product of PSD cones and an
//! affine subspace {x : Ax = b}.
//!
//! Variables are a list of square complex blocks stacked row-major into one
//! vector. The affine projection x ↦ x − A⁺(Ax − b) is exact (A⁺ computed
//! once); the cone projection clips negative eigenvalues block by block and
//! carries Dykstra's correction term. The affine step needs no correction.
//!
//! A block may be confined to a subspace with orthonormal basis U, so that
//! it reads U Z U† with Z PSD. The solver then works on Z. Since U is an
//! isometry this changes neither the metric nor the cone, but it removes
//! directions in which every solution vanishes. Without that reduction a
//! solution forced onto the boundary of the cone is approached sublinearly.

use rayon::prelude::*;

use super::{FeasibilityOutcome, SolverOptions, Status};
use crate::linalg::{herm_eig, pseudo_inverse, ComplexMatrix, C64, ZERO};

/// Relative eigenvalue cutoff for the constraint pseudo-inverse.
const CONSTRAINT_PINV_CUTOFF: f64 = 1e-12;

/// Blocks at least this large are projected in parallel.
const PARALLEL_BLOCK_DIM: usize = 8;

/// Sparse linear constraints Σ coeff·x[index] = rhs over the stacked vector.
#[derive(Debug, Clone, Default)]
pub struct LinearConstraints {
    rows: Vec<Vec<(usize, C64)>>,
    rhs: Vec<C64>,
}

impl LinearConstraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, terms: Vec<(usize, C64)>, rhs: C64) {
        self.rows.push(terms);
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn dense(&self, n: usize) -> ComplexMatrix {
        let mut a = ComplexMatrix::zeros(self.rows.len(), n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(i, coeff) in row {
                a[(r, i)] += coeff;
            }
        }
        a
    }
}

/// Layout of the stacked variable vector.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    len: usize,
}

impl BlockLayout {
    pub fn new(dims: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut len = 0;
        for &d in &dims {
            offsets.push(len);
            len += d * d;
        }
        Self { dims, offsets, len }
    }

    /// Position of entry (r, c) of block k.
    pub fn index(&self, k: usize, r: usize, c: usize) -> usize {
        self.offsets[k] + r * self.dims[k] + c
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn block_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn stack(&self, blocks: &[ComplexMatrix]) -> Vec<C64> {
        assert_eq!(blocks.len(), self.dims.len());
        let mut v = Vec::with_capacity(self.len);
        for (b, &d) in blocks.iter().zip(&self.dims) {
            assert_eq!(b.shape(), (d, d));
            v.extend_from_slice(b.as_slice());
        }
        v
    }

    pub fn unstack(&self, v: &[C64]) -> Vec<ComplexMatrix> {
        (0..self.block_count()).map(|k| self.block(v, k)).collect()
    }

    fn block(&self, v: &[C64], k: usize) -> ComplexMatrix {
        let (d, o) = (self.dims[k], self.offsets[k]);
        ComplexMatrix::from_vec(d, d, v[o..o + d * d].to_vec()).expect("block size")
    }
}

/// Precomputed projector onto {x : Ax = b}.
#[derive(Debug, Clone)]
struct AffineProjector {
    a: ComplexMatrix,
    a_pinv: ComplexMatrix,
    b: Vec<C64>,
}

impl AffineProjector {
    fn new(a: ComplexMatrix, b: Vec<C64>) -> Self {
        let a_pinv = pseudo_inverse(&a, CONSTRAINT_PINV_CUTOFF);
        Self { a, a_pinv, b }
    }

    /// Ax − b
    fn violation(&self, x: &[C64]) -> Vec<C64> {
        let n = self.a.cols();
        if n == 0 {
            return self.b.iter().map(|b| -b).collect();
        }
        self.a
            .as_slice()
            .chunks(n)
            .zip(&self.b)
            .map(|(row, b)| row.iter().zip(x).map(|(a, x)| a * x).sum::<C64>() - b)
            .collect()
    }

    /// x ← x − A⁺ r
    fn correct(&self, x: &mut [C64], r: &[C64]) {
        let m = self.a_pinv.cols();
        if m == 0 {
            return;
        }
        for (xi, row) in x.iter_mut().zip(self.a_pinv.as_slice().chunks(m)) {
            *xi -= row.iter().zip(r).map(|(p, r)| p * r).sum::<C64>();
        }
    }

    fn project(&self, x: &mut [C64]) {
        let r = self.violation(x);
        self.correct(x, &r);
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A feasibility problem: find PSD blocks satisfying linear constraints,
/// optionally with each block confined to a subspace.
#[derive(Debug, Clone)]
pub struct ConeProblem {
    layout: BlockLayout,
    faces: Option<Vec<ComplexMatrix>>,
    reduced: BlockLayout,
    affine: AffineProjector,
}

impl ConeProblem {
    pub fn new(layout: BlockLayout, constraints: &LinearConstraints) -> Self {
        let affine = AffineProjector::new(constraints.dense(layout.len()), constraints.rhs.clone());
        Self {
            reduced: layout.clone(),
            layout,
            faces: None,
            affine,
        }
    }

    /// Block k is U_k Z_k U_k† for the isometry `faces[k]` (d_k × r_k).
    pub fn on_faces(layout: BlockLayout, constraints: &LinearConstraints, faces: Vec<ComplexMatrix>) -> Self {
        assert_eq!(faces.len(), layout.block_count());
        for (u, &d) in faces.iter().zip(layout.dims()) {
            assert_eq!(u.rows(), d);
        }
        let full = constraints.dense(layout.len());
        let reduced = BlockLayout::new(faces.iter().map(|u| u.cols()).collect());
        let m = full.rows();
        // Column (k,p,q) of the reduced map is A·vec(U_k e_p e_q† U_k†).
        let mut a = ComplexMatrix::zeros(m, reduced.len());
        for (k, u) in faces.iter().enumerate() {
            let d = layout.dims[k];
            let o = layout.offsets[k];
            for row in 0..m {
                let start = row * full.cols() + o;
                let coeffs = &full.as_slice()[start..start + d * d];
                if coeffs.iter().all(|c| *c == ZERO) {
                    continue;
                }
                for p in 0..u.cols() {
                    for q in 0..u.cols() {
                        let mut acc = ZERO;
                        for (idx, coeff) in coeffs.iter().enumerate() {
                            if *coeff != ZERO {
                                acc += coeff * u[(idx / d, p)] * u[(idx % d, q)].conj();
                            }
                        }
                        a[(row, reduced.index(k, p, q))] = acc;
                    }
                }
            }
        }
        Self {
            affine: AffineProjector::new(a, constraints.rhs.clone()),
            layout,
            faces: Some(faces),
            reduced,
        }
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn reduce(&self, blocks: &[ComplexMatrix]) -> Vec<C64> {
        match &self.faces {
            None => self.layout.stack(blocks),
            Some(faces) => {
                let reduced: Vec<ComplexMatrix> = blocks.iter().zip(faces).map(|(b, u)| u.adjoint_sandwich(b)).collect();
                self.reduced.stack(&reduced)
            }
        }
    }

    fn expand(&self, z: &[C64]) -> Vec<ComplexMatrix> {
        let blocks = self.reduced.unstack(z);
        match &self.faces {
            None => blocks,
            Some(faces) => blocks.iter().zip(faces).map(|(b, u)| u.sandwich(b)).collect(),
        }
    }

    fn project_cone(&self, z: &[C64]) -> Vec<C64> {
        let dims = self.reduced.dims();
        let project_block = |k: usize| project_psd_block(&self.reduced.block(z, k));
        let blocks: Vec<ComplexMatrix> = if dims.iter().any(|&d| d >= PARALLEL_BLOCK_DIM) {
            (0..dims.len()).into_par_iter().map(project_block).collect()
        } else {
            (0..dims.len()).map(project_block).collect()
        };
        let mut out = Vec::with_capacity(z.len());
        for b in blocks {
            out.extend(b.into_vec());
        }
        out
    }

    /// Runs Dykstra from `start`. Feasible as soon as the PSD iterate meets
    /// the constraints within `opts.tol`; Infeasible when the residual stalls
    /// above the floor threshold (see [`SolverOptions`]); Undecided otherwise.
    pub fn solve(&self, start: &[ComplexMatrix], opts: &SolverOptions) -> FeasibilityOutcome {
        let mut x = self.reduce(start);
        self.affine.project(&mut x);
        let mut correction = vec![ZERO; x.len()];
        let mut trace = Vec::new();
        let mut previous = f64::INFINITY;
        let mut stalled = 0usize;
        let mut last = f64::INFINITY;

        for iter in 1..=opts.max_iters {
            let z: Vec<C64> = x.iter().zip(&correction).map(|(a, b)| a + b).collect();
            let y = self.project_cone(&z);
            for ((p, zi), yi) in correction.iter_mut().zip(&z).zip(&y) {
                *p = zi - yi;
            }
            let r = self.affine.violation(&y);
            let residual = norm(&r);
            last = residual;
            if opts.record_trace {
                trace.push(residual);
            }

            if residual <= opts.tol {
                return FeasibilityOutcome {
                    status: Status::Feasible,
                    witness: Some(self.expand(&y)),
                    residual,
                    iterations: iter,
                    infeasibility_floor: None,
                    trace,
                };
            }

            if (residual - previous).abs() < opts.stall_delta && residual > opts.floor_factor * opts.tol {
                stalled += 1;
                if stalled >= opts.stall_window {
                    return FeasibilityOutcome {
                        status: Status::Infeasible,
                        witness: None,
                        residual,
                        iterations: iter,
                        infeasibility_floor: Some(residual),
                        trace,
                    };
                }
            } else {
                stalled = 0;
            }
            previous = residual;

            x = y;
            self.affine.correct(&mut x, &r);
        }

        FeasibilityOutcome {
            status: Status::Undecided,
            witness: None,
            residual: last,
            iterations: opts.max_iters,
            infeasibility_floor: None,
            trace,
        }
    }
}

/// Nearest PSD matrix to the Hermitian part of `m`.
fn project_psd_block(m: &ComplexMatrix) -> ComplexMatrix {
    if m.rows() == 0 {
        return m.clone();
    }
    let h = m.hermitian_part();
    let eig = herm_eig(&h, f64::INFINITY).expect("square block");
    if eig.min_eigenvalue() >= 0.0 {
        return h;
    }
    eig.reconstruct_with(|l| l.max(0.0))
}
