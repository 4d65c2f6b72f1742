//! The universal A-channel Λ_A(ϱ) = Σ_x Â(x)VϱV†Â(x) over a minimal Naimark
//! dilation, and the compensating construction that turns any observable B
//! jointly measurable with A into a B′ on the output of Λ_A with
//! Λ_A*(B′(y)) = B(y).
//!
//! Given a joint observable M of (A, B) with canonical dilation (K′, M̂, V′),
//! the coarse-grained Â′(x) = Σ_y M̂(x,y) dilates A, so there is an isometry
//! J: K → K′ intertwining the two dilations of A. Then
//! B′(y) = Σ_x J†M̂(x,y)J, and Γ^B(ϱ) = Σ_y tr[ϱB′(y)]|y⟩⟨y| satisfies
//! Λ^B = Γ^B ∘ Λ_A. Different M can give different (equally valid) B′.

use serde::{Deserialize, Serialize};

use crate::channel::{classical_channel, KrausChannel, Partition};
use crate::dilation::{
    auxiliary_formula_residual, connecting_isometry, naimark_canonical, naimark_minimal,
    ConnectingIsometry, NaimarkDilation,
};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, Tolerances};
use crate::povm::{Label, Povm, ProductLabeledPovm};

/// Λ_A together with the minimal dilation it was built from.
#[derive(Debug, Clone)]
pub struct UniversalChannel {
    pub observable: Povm,
    pub dilation: NaimarkDilation,
    pub channel: KrausChannel,
}

/// Builds Λ_A with Kraus operators Â(x)V, partitioned by outcome.
pub fn universal_channel(a: &Povm, tol: &Tolerances) -> Result<UniversalChannel> {
    let dilation = naimark_minimal(a, tol)?;
    let mut kraus = Vec::with_capacity(a.len());
    let mut partition = Partition::new();
    for (i, (label, k)) in dilation.branch_isometries().into_iter().enumerate() {
        kraus.push(k);
        partition.insert(label, vec![i]);
    }
    let channel = KrausChannel::new(a.dim(), dilation.dim_k, kraus)?.with_partition(partition)?;
    Ok(UniversalChannel {
        observable: a.clone(),
        dilation,
        channel,
    })
}

/// Everything produced while compensating Λ_A for one target B.
#[derive(Debug, Clone)]
pub struct Compensation {
    /// B′ on the output space of Λ_A.
    pub b_prime: Povm,
    /// Γ^B: output space of Λ_A → C^{|Ω_B|}.
    pub gamma: KrausChannel,
    /// Canonical dilation of the joint observable; `None` when B is trivial.
    pub joint_dilation: Option<NaimarkDilation>,
    pub connecting: Option<ConnectingIsometry>,
}

fn first_marginal_check(a: &Povm, joint: &ProductLabeledPovm, tol: f64) -> Result<Povm> {
    let (first, second) = joint.marginals();
    let dev = first.max_deviation(a).ok_or_else(|| {
        Error::DimensionMismatch("joint observable and A have different outcome sets".into())
    })?;
    if dev > tol {
        return Err(Error::MarginalMismatch(dev));
    }
    Ok(second)
}

fn is_trivial(b: &Povm, tol: f64) -> bool {
    b.len() == 1 && b.effects().all(|e| e.distance(&ComplexMatrix::identity(b.dim())) <= tol)
}

impl UniversalChannel {
    pub fn output_dim(&self) -> usize {
        self.dilation.dim_k
    }

    /// Runs the compensating construction for the joint observable `joint`.
    /// `tol` bounds the marginal mismatch and the intertwining residuals.
    pub fn compensate(&self, joint: &ProductLabeledPovm, tol: f64, tols: &Tolerances) -> Result<Compensation> {
        let b = first_marginal_check(&self.observable, joint, tol)?;
        let k = self.output_dim();
        if is_trivial(&b, tol) {
            let b_prime = Povm::new(
                k,
                vec![(b.labels().next().cloned().expect("one outcome"), ComplexMatrix::identity(k))],
            )?;
            let gamma = classical_channel(&b_prime, tols)?;
            return Ok(Compensation {
                b_prime,
                gamma,
                joint_dilation: None,
                connecting: None,
            });
        }

        let joint_dilation = naimark_canonical(joint.povm(), tols)?;
        let first_len = joint.first_len();
        let coarse = joint_dilation.coarse_grain(|l| Label(l.0[..first_len].to_vec()))?;
        let j = connecting_isometry(&self.dilation, &coarse, tol, tols.rank)?;

        let mut effects: std::collections::BTreeMap<Label, ComplexMatrix> = Default::default();
        for (o, ((_, y), _)) in joint_dilation.sharp.outcomes().iter().zip(joint.entries()) {
            *effects.entry(y).or_insert_with(|| ComplexMatrix::zeros(k, k)) += &j.j.adjoint_sandwich(&o.effect);
        }
        let b_prime = Povm::new(k, effects.into_iter().collect())?;
        let gamma = classical_channel(&b_prime, tols)?;
        Ok(Compensation {
            b_prime,
            gamma,
            joint_dilation: Some(joint_dilation),
            connecting: Some(j),
        })
    }

    /// Γ^B for the given joint observable.
    pub fn gamma_channel(&self, joint: &ProductLabeledPovm, tol: f64, tols: &Tolerances) -> Result<KrausChannel> {
        Ok(self.compensate(joint, tol, tols)?.gamma)
    }

    /// B′ with Λ_A*(B′(y)) = B(y), B the second marginal of `joint`.
    pub fn modified_observable(&self, joint: &ProductLabeledPovm, tol: f64, tols: &Tolerances) -> Result<Povm> {
        Ok(self.compensate(joint, tol, tols)?.b_prime)
    }

    /// max over basis operators |i⟩⟨j| of ‖Λ^B(E) − Γ^B(Λ_A(E))‖_F.
    pub fn factorization_residual(&self, b: &Povm, gamma: &KrausChannel, tols: &Tolerances) -> Result<f64> {
        let lambda_b = classical_channel(b, tols)?;
        let composed = gamma.compose_after(&self.channel)?;
        Ok(max_basis_deviation(&lambda_b, &composed))
    }

    /// Residual of the auxiliary intertwining identity for a compensation.
    pub fn auxiliary_residual(&self, joint: &ProductLabeledPovm, comp: &Compensation) -> Option<f64> {
        Some(auxiliary_formula_residual(
            comp.joint_dilation.as_ref()?,
            joint,
            &self.dilation,
            comp.connecting.as_ref()?,
        ))
    }
}

/// max over matrix units |i⟩⟨j| of the output deviation of two channels
/// with the same input and output dimensions.
pub fn max_basis_deviation(a: &KrausChannel, b: &KrausChannel) -> f64 {
    assert_eq!((a.dim_in(), a.dim_out()), (b.dim_in(), b.dim_out()));
    let d = a.dim_in();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let e = ComplexMatrix::unit(d, i, j);
            worst = worst.max(a.apply_linear(&e).distance(&b.apply_linear(&e)));
        }
    }
    worst
}

/// max_y ‖Λ*(B′(y)) − B(y)‖_F; labels must match.
pub fn sequential_residual(channel: &KrausChannel, b_prime: &Povm, b: &Povm) -> Result<f64> {
    if b_prime.dim() != channel.dim_out() || b.dim() != channel.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "B′ on {}, B on {}, channel {} → {}",
            b_prime.dim(),
            b.dim(),
            channel.dim_in(),
            channel.dim_out()
        )));
    }
    let implemented = b_prime.map_effects(channel.dim_in(), |e| {
        channel.heisenberg_apply(e).expect("dimension checked")
    })?;
    implemented
        .max_deviation(b)
        .ok_or_else(|| Error::InvalidPovm("B′ and B have different outcome labels".into()))
}

/// Λ*(B′(y)) == B(y) for every outcome, within `tol`.
pub fn verify_sequential(channel: &KrausChannel, b_prime: &Povm, b: &Povm, tol: f64) -> Result<bool> {
    Ok(sequential_residual(channel, b_prime, b)? <= tol)
}

/// M(x, y) = Φ_x*(B′(y)).
pub fn implemented_joint(channel: &KrausChannel, b_prime: &Povm) -> Result<ProductLabeledPovm> {
    let partition = channel.partition().ok_or(Error::MissingPartition)?;
    if b_prime.dim() != channel.dim_out() {
        return Err(Error::DimensionMismatch("B′ must act on the channel output".into()));
    }
    let mut entries = Vec::with_capacity(partition.len() * b_prime.len());
    for x in partition.keys() {
        for o in b_prime.outcomes() {
            entries.push(((x.clone(), o.label.clone()), channel.branch_heisenberg(x, &o.effect)?));
        }
    }
    ProductLabeledPovm::from_pairs(channel.dim_in(), entries)
}

/// An A-channel, a follow-up observable B′ and the joint observable the
/// sequence implements.
#[derive(Debug, Clone)]
pub struct SequentialScheme {
    pub first: Povm,
    pub channel: KrausChannel,
    pub second: Povm,
    pub implemented: ProductLabeledPovm,
}

impl SequentialScheme {
    pub fn new(first: Povm, channel: KrausChannel, second: Povm) -> Result<Self> {
        let implemented = implemented_joint(&channel, &second)?;
        Ok(Self {
            first,
            channel,
            second,
            implemented,
        })
    }

    /// Largest deviation among the scheme's invariants: branch effects vs A,
    /// and first marginal of the implemented observable vs A.
    pub fn defect(&self) -> Result<f64> {
        let branches = self.channel.partition_observable()?;
        let d1 = branches
            .max_deviation(&self.first)
            .ok_or_else(|| Error::InvalidPovm("partition labels differ from A".into()))?;
        let (first, _) = self.implemented.marginals();
        let d2 = first.max_deviation(&self.first).unwrap_or(f64::INFINITY);
        Ok(d1.max(d2))
    }

    pub fn bundle(&self) -> SchemeBundle {
        SchemeBundle {
            a: self.first.clone(),
            channel: self.channel.clone(),
            b_prime: self.second.clone(),
            implemented: self.implemented.povm().clone(),
        }
    }
}

/// JSON audit bundle for a sequential scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeBundle {
    #[serde(rename = "A")]
    pub a: Povm,
    pub channel: KrausChannel,
    #[serde(rename = "B_prime")]
    pub b_prime: Povm,
    pub implemented: Povm,
}
