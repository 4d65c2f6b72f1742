//! Naimark dilations (K, Â, V) of finite-outcome observables.
//!
//! The canonical dilation lives on C^{|Ω|} ⊗ H with Vψ = Σ_x |x⟩ ⊗ √A(x)ψ.
//! The minimal one keeps, inside each block |x⟩ ⊗ H, only the range of
//! A(x): K = ⊕_x range A(x), with block x of V equal to diag(√λ)·U_x† for
//! the eigenpairs (λ, U_x) of A(x) above the rank tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eig, psd_rank, range_decomposition, sqrt_psd, ComplexMatrix, Tolerances};
use crate::povm::{Label, Povm, ProductLabeledPovm};

/// Isometry `v`: H → C^{dim_k} and sharp observable `sharp` on C^{dim_k}
/// with v† sharp(x) v = A(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaimarkDilation {
    pub dim_k: usize,
    pub v: ComplexMatrix,
    pub sharp: Povm,
}

impl NaimarkDilation {
    pub fn dim_in(&self) -> usize {
        self.v.cols()
    }

    /// Â(x)·V for every outcome, in label order.
    pub fn branch_isometries(&self) -> Vec<(Label, ComplexMatrix)> {
        self.sharp
            .outcomes()
            .iter()
            .map(|o| (o.label.clone(), &o.effect * &self.v))
            .collect()
    }

    /// [Â(x₁)V | Â(x₂)V | …]; its columns Â(x)Vψᵢ span K iff the dilation is minimal.
    pub fn spanning_set(&self) -> ComplexMatrix {
        let blocks: Vec<ComplexMatrix> = self.branch_isometries().into_iter().map(|(_, m)| m).collect();
        ComplexMatrix::hstack(&blocks).expect("equal row counts")
    }

    /// Numerical rank of the spanning set.
    pub fn span_rank(&self, rank_tol: f64) -> usize {
        let s = self.spanning_set();
        psd_rank(&(&s * &s.adjoint()), rank_tol).expect("square")
    }

    pub fn is_minimal(&self, rank_tol: f64) -> bool {
        self.span_rank(rank_tol) == self.dim_k
    }

    /// Replaces the sharp observable by x' ↦ Σ_{x: f(x) = x'} Â(x). The
    /// result is a dilation of the correspondingly coarse-grained observable.
    pub fn coarse_grain(&self, f: impl Fn(&Label) -> Label) -> Result<NaimarkDilation> {
        let mut groups: std::collections::BTreeMap<Label, ComplexMatrix> = Default::default();
        for o in self.sharp.outcomes() {
            *groups
                .entry(f(&o.label))
                .or_insert_with(|| ComplexMatrix::zeros(self.dim_k, self.dim_k)) += &o.effect;
        }
        Ok(NaimarkDilation {
            dim_k: self.dim_k,
            v: self.v.clone(),
            sharp: Povm::new(self.dim_k, groups.into_iter().collect())?,
        })
    }
}

/// Largest violated invariant of `d` as a dilation of `a`, or None.
pub fn dilation_defect(a: &Povm, d: &NaimarkDilation, tol: f64) -> Option<String> {
    if d.v.shape() != (d.dim_k, a.dim()) || d.sharp.dim() != d.dim_k {
        return Some("shape mismatch".into());
    }
    let iso = (&d.v.adjoint() * &d.v).distance(&ComplexMatrix::identity(a.dim()));
    if iso > tol {
        return Some(format!("V†V deviates from I by {iso:.3e}"));
    }
    if let Some(msg) = d.sharp.violation(tol) {
        return Some(format!("sharp part is not an observable: {msg}"));
    }
    if !d.sharp.is_sharp(tol) {
        return Some("sharp part has non-projective effects".into());
    }
    if d.sharp.len() != a.len() {
        return Some("outcome sets differ".into());
    }
    for (o, s) in a.outcomes().iter().zip(d.sharp.outcomes()) {
        if o.label != s.label {
            return Some(format!("label {} has no counterpart", o.label));
        }
        let err = d.v.adjoint_sandwich(&s.effect).distance(&o.effect);
        if err > tol {
            return Some(format!("V†Â{}V deviates from A{} by {err:.3e}", o.label, o.label));
        }
    }
    None
}

pub fn verify_dilation(a: &Povm, d: &NaimarkDilation, tol: f64) -> bool {
    dilation_defect(a, d, tol).is_none()
}

/// Canonical dilation on C^{|Ω|} ⊗ H.
pub fn naimark_canonical(a: &Povm, tol: &Tolerances) -> Result<NaimarkDilation> {
    a.ensure_valid(tol.psd)?;
    let n = a.len();
    let d = a.dim();
    let dim_k = n * d;
    let mut v = ComplexMatrix::zeros(dim_k, d);
    let mut sharp = Vec::with_capacity(n);
    for (x, o) in a.outcomes().iter().enumerate() {
        v.set_block(x * d, 0, &sqrt_psd(&o.effect, tol.psd)?);
        let mut p = ComplexMatrix::zeros(dim_k, dim_k);
        p.set_block(x * d, x * d, &ComplexMatrix::identity(d));
        sharp.push((o.label.clone(), p));
    }
    Ok(NaimarkDilation {
        dim_k,
        v,
        sharp: Povm::new(dim_k, sharp)?,
    })
}

/// Minimal dilation K = ⊕_x range A(x), blocks in label order.
pub fn naimark_minimal(a: &Povm, tol: &Tolerances) -> Result<NaimarkDilation> {
    a.ensure_valid(tol.psd)?;
    let d = a.dim();
    let mut blocks = Vec::with_capacity(a.len());
    for o in a.outcomes() {
        let (u, values) = range_decomposition(&o.effect, tol.rank)?;
        // diag(√λ)·U†
        let mut block = u.adjoint();
        for (r, &l) in values.iter().enumerate() {
            let s = l.sqrt();
            for c in 0..d {
                block[(r, c)] *= s;
            }
        }
        blocks.push((o.label.clone(), block));
    }
    let dim_k: usize = blocks.iter().map(|(_, b)| b.rows()).sum();
    let mut v = ComplexMatrix::zeros(dim_k, d);
    let mut sharp = Vec::with_capacity(blocks.len());
    let mut offset = 0;
    for (label, block) in blocks {
        let r = block.rows();
        v.set_block(offset, 0, &block);
        let mut p = ComplexMatrix::zeros(dim_k, dim_k);
        p.set_block(offset, offset, &ComplexMatrix::identity(r));
        sharp.push((label, p));
        offset += r;
    }
    Ok(NaimarkDilation {
        dim_k,
        v,
        sharp: Povm::new(dim_k, sharp)?,
    })
}

/// Isometry J: K₁ → K₂ with J·Â₁(x) = Â₂(x)·J and J·V₁ = V₂.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectingIsometry {
    pub j: ComplexMatrix,
}

/// Residuals of the three defining identities of J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntertwinerResiduals {
    pub isometry: f64,
    pub intertwining: f64,
    pub embedding: f64,
}

impl IntertwinerResiduals {
    pub fn max(&self) -> f64 {
        self.isometry.max(self.intertwining).max(self.embedding)
    }
}

impl ConnectingIsometry {
    pub fn residuals(&self, from: &NaimarkDilation, to: &NaimarkDilation) -> IntertwinerResiduals {
        let j = &self.j;
        let isometry = (&j.adjoint() * j).distance(&ComplexMatrix::identity(from.dim_k));
        let intertwining = from
            .sharp
            .outcomes()
            .iter()
            .zip(to.sharp.outcomes())
            .map(|(p, q)| (j * &p.effect).distance(&(&q.effect * j)))
            .fold(0.0, f64::max);
        let embedding = (j * &from.v).distance(&to.v);
        IntertwinerResiduals {
            isometry,
            intertwining,
            embedding,
        }
    }
}

/// Pseudo-inverse eigenvalue cutoff for the normal equations.
const PINV_CUTOFF: f64 = 1e-10;

/// Solves J·Â₁(x)V₁ψ = Â₂(x)V₂ψ over the outcome × basis spanning set by
/// least squares, then checks every defining identity within `tol`.
pub fn connecting_isometry(
    minimal: &NaimarkDilation,
    other: &NaimarkDilation,
    tol: f64,
    rank_tol: f64,
) -> Result<ConnectingIsometry> {
    if minimal.dim_in() != other.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "dilations of {}- and {}-dimensional observables",
            minimal.dim_in(),
            other.dim_in()
        )));
    }
    if !minimal.sharp.labels().eq(other.sharp.labels()) {
        return Err(Error::DilationMismatch(f64::INFINITY));
    }
    let s1 = minimal.spanning_set();
    let s2 = other.spanning_set();
    let gram = &s1 * &s1.adjoint();
    let rank = psd_rank(&gram, rank_tol)?;
    if rank != minimal.dim_k {
        return Err(Error::NotMinimal {
            rank,
            dim: minimal.dim_k,
        });
    }
    // J = S₂ S₁† (S₁ S₁†)⁺
    let eig = herm_eig(&gram, f64::INFINITY)?;
    let gram_inv = eig.reconstruct_with(|l| if l > PINV_CUTOFF { 1.0 / l } else { 0.0 });
    let j = &(&s2 * &s1.adjoint()) * &gram_inv;
    let fit = (&j * &s1).distance(&s2);
    if fit > tol {
        return Err(Error::DilationMismatch(fit));
    }
    let out = ConnectingIsometry { j };
    let res = out.residuals(minimal, other);
    if res.max() > tol {
        return Err(Error::DilationMismatch(res.max()));
    }
    Ok(out)
}

/// max over (x, y, x') of ‖M̂(x,y)·J·Â(x′) − δ_{xx′}·M̂(x,y)·J‖_F, where
/// `joint` is a dilation of M with labels (x, y) and J connects `minimal`
/// (a dilation of the first marginal) into it.
pub fn auxiliary_formula_residual(
    joint_dilation: &NaimarkDilation,
    joint_labels: &ProductLabeledPovm,
    minimal: &NaimarkDilation,
    j: &ConnectingIsometry,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (o, ((x, _), _)) in joint_dilation.sharp.outcomes().iter().zip(joint_labels.entries()) {
        let mj = &o.effect * &j.j;
        for p in minimal.sharp.outcomes() {
            let lhs = &mj * &p.effect;
            let err = if p.label == x {
                lhs.distance(&mj)
            } else {
                lhs.frobenius_norm()
            };
            worst = worst.max(err);
        }
    }
    worst
}
