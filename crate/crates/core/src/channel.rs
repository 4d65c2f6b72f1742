//! Quantum channels in Kraus form.
//!
//! A channel may carry an outcome partition: a map from outcome labels to
//! disjoint, exhaustive sets of Kraus indices. Branch `x` is then the
//! completely positive map Φ_x built from its Kraus operators, and Σ_x Φ_x
//! is the channel itself.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    herm_eig, is_psd, partial_trace, range_decomposition, sqrt_psd, ComplexMatrix, Factor,
    Tolerances, C64,
};
use crate::povm::{Label, Povm, ProductLabeledPovm};

pub type Partition = BTreeMap<Label, Vec<usize>>;

#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<ComplexMatrix>,
    partition: Option<Partition>,
}

impl KrausChannel {
    /// Checks shapes only; trace preservation is reported by
    /// [`KrausChannel::trace_preservation_error`].
    pub fn new(dim_in: usize, dim_out: usize, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidChannel("no Kraus operators".into()));
        }
        if let Some((i, k)) = kraus
            .iter()
            .enumerate()
            .find(|(_, k)| k.shape() != (dim_out, dim_in))
        {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator {i} is {}x{}, expected {dim_out}x{dim_in}",
                k.rows(),
                k.cols()
            )));
        }
        Ok(Self {
            dim_in,
            dim_out,
            kraus,
            partition: None,
        })
    }

    pub fn with_partition(mut self, partition: Partition) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (label, idx) in &partition {
            for &i in idx {
                if i >= self.kraus.len() {
                    return Err(Error::InvalidChannel(format!(
                        "partition {label} refers to Kraus index {i} of {}",
                        self.kraus.len()
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidChannel(format!(
                        "Kraus index {i} appears in more than one branch"
                    )));
                }
            }
        }
        if seen.len() != self.kraus.len() {
            return Err(Error::InvalidChannel(
                "partition does not cover every Kraus operator".into(),
            ));
        }
        self.partition = Some(partition);
        Ok(self)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, dim, vec![ComplexMatrix::identity(dim)]).expect("square identity")
    }

    /// ϱ ↦ UϱU† for an isometry U.
    pub fn isometric(u: ComplexMatrix) -> Self {
        let (out, inp) = u.shape();
        Self::new(inp, out, vec![u]).expect("one operator")
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn partition(&self) -> Option<&Partition> {
        self.partition.as_ref()
    }

    pub fn without_partition(&self) -> Self {
        Self {
            partition: None,
            ..self.clone()
        }
    }

    /// ‖Σᵢ Kᵢ†Kᵢ − I‖_F
    pub fn trace_preservation_error(&self) -> f64 {
        let mut acc = ComplexMatrix::zeros(self.dim_in, self.dim_in);
        for k in &self.kraus {
            acc += &(&k.adjoint() * k);
        }
        acc.distance(&ComplexMatrix::identity(self.dim_in))
    }

    pub fn is_cptp(&self, tol: f64) -> bool {
        self.trace_preservation_error() <= tol
    }

    /// Σᵢ Kᵢ X Kᵢ† on any dim_in-square operator, without state checks.
    pub fn apply_linear(&self, x: &ComplexMatrix) -> ComplexMatrix {
        apply_kraus(self.kraus.iter(), self.dim_out, x)
    }

    /// Λ(ϱ) for a density matrix ϱ.
    pub fn apply(&self, state: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_input(state)?;
        check_state(state, Tolerances::default().state)?;
        Ok(self.apply_linear(state))
    }

    /// Λ*(T) = Σᵢ Kᵢ† T Kᵢ.
    pub fn heisenberg_apply(&self, t: &ComplexMatrix) -> Result<ComplexMatrix> {
        if t.shape() != (self.dim_out, self.dim_out) {
            return Err(Error::DimensionMismatch(format!(
                "Heisenberg input is {}x{}, channel output dimension is {}",
                t.rows(),
                t.cols(),
                self.dim_out
            )));
        }
        Ok(heisenberg_kraus(self.kraus.iter(), self.dim_in, t))
    }

    fn branch_indices(&self, label: &Label) -> Result<&[usize]> {
        let partition = self.partition.as_ref().ok_or(Error::MissingPartition)?;
        partition
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidChannel(format!("no branch labelled {label}")))
    }

    /// Φ_x*(T) for the branch labelled `label`.
    pub fn branch_heisenberg(&self, label: &Label, t: &ComplexMatrix) -> Result<ComplexMatrix> {
        if t.shape() != (self.dim_out, self.dim_out) {
            return Err(Error::DimensionMismatch("branch Heisenberg input".into()));
        }
        let idx = self.branch_indices(label)?;
        Ok(heisenberg_kraus(idx.iter().map(|&i| &self.kraus[i]), self.dim_in, t))
    }

    /// Φ_x(X) for the branch labelled `label`.
    pub fn branch_apply(&self, label: &Label, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_input(x)?;
        let idx = self.branch_indices(label)?;
        Ok(apply_kraus(idx.iter().map(|&i| &self.kraus[i]), self.dim_out, x))
    }

    /// Choi matrix of the branch labelled `label`.
    pub fn branch_choi(&self, label: &Label) -> Result<ChoiMatrix> {
        let idx = self.branch_indices(label)?;
        Ok(choi_of(
            idx.iter().map(|&i| &self.kraus[i]),
            self.dim_in,
            self.dim_out,
        ))
    }

    /// The observable x ↦ Φ_x*(I) determined by the partition.
    pub fn partition_observable(&self) -> Result<Povm> {
        let partition = self.partition.as_ref().ok_or(Error::MissingPartition)?;
        let id = ComplexMatrix::identity(self.dim_out);
        let effects = partition
            .keys()
            .map(|label| Ok((label.clone(), self.branch_heisenberg(label, &id)?)))
            .collect::<Result<Vec<_>>>()?;
        Povm::new(self.dim_in, effects)
    }

    /// (Λ⊗id)(Σᵢⱼ |ii⟩⟨jj|), output factor first.
    pub fn choi(&self) -> ChoiMatrix {
        choi_of(self.kraus.iter(), self.dim_in, self.dim_out)
    }

    /// `self ∘ first`: apply `first`, then `self`. Partitions are dropped.
    pub fn compose_after(&self, first: &KrausChannel) -> Result<KrausChannel> {
        if first.dim_out != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "cannot feed a {}-dimensional output into a {}-dimensional input",
                first.dim_out, self.dim_in
            )));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * first.kraus.len());
        for a in &self.kraus {
            for b in &first.kraus {
                kraus.push(a * b);
            }
        }
        KrausChannel::new(first.dim_in, self.dim_out, kraus)
    }

    /// Conjugates every output by the unitary `u` (a change of output basis).
    pub fn rotate_output(&self, u: &ComplexMatrix) -> Result<KrausChannel> {
        if u.shape() != (self.dim_out, self.dim_out) {
            return Err(Error::DimensionMismatch("output rotation".into()));
        }
        let mut out = KrausChannel::new(
            self.dim_in,
            self.dim_out,
            self.kraus.iter().map(|k| u * k).collect(),
        )?;
        out.partition = self.partition.clone();
        Ok(out)
    }

    fn check_input(&self, x: &ComplexMatrix) -> Result<()> {
        if x.shape() != (self.dim_in, self.dim_in) {
            return Err(Error::DimensionMismatch(format!(
                "input is {}x{}, channel input dimension is {}",
                x.rows(),
                x.cols(),
                self.dim_in
            )));
        }
        Ok(())
    }
}

fn apply_kraus<'a>(
    kraus: impl Iterator<Item = &'a ComplexMatrix>,
    dim_out: usize,
    x: &ComplexMatrix,
) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(dim_out, dim_out);
    for k in kraus {
        acc += &k.sandwich(x);
    }
    acc
}

fn heisenberg_kraus<'a>(
    kraus: impl Iterator<Item = &'a ComplexMatrix>,
    dim_in: usize,
    t: &ComplexMatrix,
) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(dim_in, dim_in);
    for k in kraus {
        acc += &k.adjoint_sandwich(t);
    }
    acc
}

fn choi_of<'a>(
    kraus: impl Iterator<Item = &'a ComplexMatrix> + Clone,
    dim_in: usize,
    dim_out: usize,
) -> ChoiMatrix {
    // Σᵢⱼ Λ(|i⟩⟨j|) ⊗ |i⟩⟨j|, entry ((o,i),(p,j)) = Λ(|i⟩⟨j|)[o,p]
    let n = dim_out * dim_in;
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..dim_in {
        for j in 0..dim_in {
            let image = apply_kraus(kraus.clone(), dim_out, &ComplexMatrix::unit(dim_in, i, j));
            for o in 0..dim_out {
                for p in 0..dim_out {
                    m[(o * dim_in + i, p * dim_in + j)] = image[(o, p)];
                }
            }
        }
    }
    ChoiMatrix {
        matrix: m,
        dim_in,
        dim_out,
    }
}

/// Checks that `state` is a density matrix within `tol`.
pub fn check_state(state: &ComplexMatrix, tol: f64) -> Result<()> {
    if !state.is_square() {
        return Err(Error::InvalidState("not square".into()));
    }
    let tr = state.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > tol {
        return Err(Error::InvalidState(format!("trace is {tr}")));
    }
    if !is_psd(state, tol) {
        return Err(Error::InvalidState("not positive semidefinite".into()));
    }
    Ok(())
}

/// Choi matrix with the output factor first: entry ((o,i),(p,j)).
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    pub matrix: ComplexMatrix,
    pub dim_in: usize,
    pub dim_out: usize,
}

impl ChoiMatrix {
    /// Tr_out, which equals Λ*(I)ᵀ.
    pub fn input_marginal(&self) -> ComplexMatrix {
        partial_trace(&self.matrix, self.dim_out, self.dim_in, Factor::First)
            .expect("consistent dimensions")
    }

    pub fn is_completely_positive(&self, tol: f64) -> bool {
        is_psd(&self.matrix, tol)
    }

    pub fn trace_preservation_error(&self) -> f64 {
        self.input_marginal()
            .distance(&ComplexMatrix::identity(self.dim_in))
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.is_completely_positive(tol) && self.trace_preservation_error() <= tol
    }
}

/// Isometry V: H_in → H_out ⊗ H_env with Λ(ϱ) = Tr_env[VϱV†].
#[derive(Debug, Clone, PartialEq)]
pub struct StinespringForm {
    pub v: ComplexMatrix,
    pub dim_out: usize,
    pub dim_env: usize,
}

impl StinespringForm {
    pub fn isometry_error(&self) -> f64 {
        (&self.v.adjoint() * &self.v).distance(&ComplexMatrix::identity(self.v.cols()))
    }

    /// Tr_env[VXV†]
    pub fn reduce_to_output(&self, x: &ComplexMatrix) -> ComplexMatrix {
        partial_trace(&self.v.sandwich(x), self.dim_out, self.dim_env, Factor::Second)
            .expect("consistent dimensions")
    }

    /// Tr_out[VXV†]
    pub fn reduce_to_environment(&self, x: &ComplexMatrix) -> ComplexMatrix {
        partial_trace(&self.v.sandwich(x), self.dim_out, self.dim_env, Factor::First)
            .expect("consistent dimensions")
    }
}

/// Canonical Stinespring isometry Vψ = Σᵢ Kᵢψ ⊗ |i⟩, one environment
/// level per listed Kraus operator.
pub fn stinespring(c: &KrausChannel) -> StinespringForm {
    let env = c.kraus.len();
    let mut v = ComplexMatrix::zeros(c.dim_out * env, c.dim_in);
    for (i, k) in c.kraus.iter().enumerate() {
        for o in 0..c.dim_out {
            for col in 0..c.dim_in {
                v[(o * env + i, col)] = k[(o, col)];
            }
        }
    }
    StinespringForm {
        v,
        dim_out: c.dim_out,
        dim_env: env,
    }
}

/// Conjugate (complementary) channel Λ̄(ϱ) = Tr_out[VϱV†] of the canonical
/// Stinespring form. Kraus operator L_m has row i equal to row m of Kᵢ.
pub fn conjugate(c: &KrausChannel) -> KrausChannel {
    let env = c.kraus.len();
    let kraus = (0..c.dim_out)
        .map(|m| ComplexMatrix::from_fn(env, c.dim_in, |i, col| c.kraus[i][(m, col)]))
        .collect();
    KrausChannel::new(c.dim_in, env, kraus).expect("consistent shapes")
}

/// Lüders channel ϱ ↦ Σ_x √A(x) ϱ √A(x), partitioned by outcome.
pub fn luders(a: &Povm, tol: &Tolerances) -> Result<KrausChannel> {
    a.ensure_valid(tol.psd)?;
    let mut kraus = Vec::with_capacity(a.len());
    let mut partition = Partition::new();
    for (i, o) in a.outcomes().iter().enumerate() {
        kraus.push(sqrt_psd(&o.effect, tol.psd)?);
        partition.insert(o.label.clone(), vec![i]);
    }
    KrausChannel::new(a.dim(), a.dim(), kraus)?.with_partition(partition)
}

/// Kraus operators √λ·|y⟩⟨v| for the eigenpairs (λ, v) of `effect` above
/// the rank tolerance.
fn classical_kraus(effect: &ComplexMatrix, y: usize, n_out: usize, rank_tol: f64) -> Result<Vec<ComplexMatrix>> {
    let (u, values) = range_decomposition(effect, rank_tol)?;
    let ket = ComplexMatrix::basis_ket(n_out, y);
    Ok(values
        .iter()
        .enumerate()
        .map(|(k, &l)| ComplexMatrix::outer(&ket, &u.column(k)).scale_real(l.sqrt()))
        .collect())
}

/// Λ^B(ϱ) = Σ_y tr[ϱB(y)] |y⟩⟨y| on C^{|Ω_B|}; pointer state |y⟩ follows
/// outcome order. Partitioned by the outcomes of B.
pub fn classical_channel(b: &Povm, tol: &Tolerances) -> Result<KrausChannel> {
    b.ensure_valid(tol.psd)?;
    let n_out = b.len();
    let mut kraus = Vec::new();
    let mut partition = Partition::new();
    for (y, o) in b.outcomes().iter().enumerate() {
        let ks = classical_kraus(&o.effect, y, n_out, tol.rank)?;
        partition.insert(o.label.clone(), (kraus.len()..kraus.len() + ks.len()).collect());
        kraus.extend(ks);
    }
    KrausChannel::new(b.dim(), n_out, kraus)?.with_partition(partition)
}

/// Λ^B built from a joint observable M of (A, B), partitioned by the
/// first outcome x: branch x is ϱ ↦ Σ_y tr[ϱM(x,y)] |y⟩⟨y|.
pub fn classical_channel_from_joint(m: &ProductLabeledPovm, tol: &Tolerances) -> Result<KrausChannel> {
    m.povm().ensure_valid(tol.psd)?;
    let seconds = m.second_labels();
    let n_out = seconds.len();
    let mut kraus = Vec::new();
    let mut partition = Partition::new();
    for ((x, y), effect) in m.entries() {
        let y_index = seconds.binary_search(&y).expect("label present");
        let ks = classical_kraus(effect, y_index, n_out, tol.rank)?;
        partition
            .entry(x)
            .or_default()
            .extend(kraus.len()..kraus.len() + ks.len());
        kraus.extend(ks);
    }
    KrausChannel::new(m.dim(), n_out, kraus)?.with_partition(partition)
}

/// Λ*(B(y)) == B(y) for every y, within `tol`.
pub fn nondisturbing(c: &KrausChannel, b: &Povm, tol: f64) -> Result<bool> {
    if b.dim() != c.dim_out || c.dim_in != c.dim_out {
        return Err(Error::DimensionMismatch(format!(
            "observable on dimension {} vs channel {} → {}",
            b.dim(),
            c.dim_in,
            c.dim_out
        )));
    }
    for e in b.effects() {
        if c.heisenberg_apply(e)?.distance(e) > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Spectrum of a Hermitian matrix, ascending.
pub fn spectrum(m: &ComplexMatrix) -> Vec<f64> {
    herm_eig(m, f64::INFINITY)
        .map(|e| e.eigenvalues)
        .unwrap_or_default()
}

// JSON: {"dim_in", "dim_out", "kraus": [...], "partition": {"1,-1": [0, 2]}}
#[derive(Serialize, Deserialize)]
struct RawChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition: Option<BTreeMap<String, Vec<usize>>>,
}

/// Partition keys are the label's integers joined by commas.
pub fn label_key(label: &Label) -> String {
    label.0.iter().map(i32::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_label_key(key: &str) -> std::result::Result<Label, String> {
    let trimmed = key.trim().trim_start_matches(['(', '[']).trim_end_matches([')', ']']);
    trimmed
        .split(',')
        .map(|p| p.trim().parse::<i32>().map_err(|e| format!("bad label {key:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Label)
}

impl Serialize for KrausChannel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawChannel {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            kraus: self.kraus.clone(),
            partition: self.partition.as_ref().map(|p| {
                p.iter()
                    .map(|(label, idx)| (label_key(label), idx.clone()))
                    .collect()
            }),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KrausChannel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawChannel::deserialize(d)?;
        let channel = KrausChannel::new(raw.dim_in, raw.dim_out, raw.kraus).map_err(D::Error::custom)?;
        match raw.partition {
            None => Ok(channel),
            Some(p) => {
                let partition = p
                    .into_iter()
                    .map(|(k, v)| Ok((parse_label_key(&k)?, v)))
                    .collect::<std::result::Result<Partition, String>>()
                    .map_err(D::Error::custom)?;
                channel.with_partition(partition).map_err(D::Error::custom)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli;
    use crate::povm::{a_s, b_t_theta};
    use std::f64::consts::FRAC_PI_2;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn plus_state() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])
    }

    fn sharp_z() -> Povm {
        a_s(1.0).unwrap()
    }

    #[test]
    fn identity_channel_is_identity() {
        let c = KrausChannel::identity(2);
        let rho = plus_state();
        assert_eq!(c.apply(&rho).unwrap(), rho);
        assert!(c.is_cptp(1e-15));
    }

    #[test]
    fn luders_sharp_z_dephases_plus() {
        let c = luders(&sharp_z(), &tol()).unwrap();
        let out = c.apply(&plus_state()).unwrap();
        assert!(out.approx_eq(&ComplexMatrix::diag_real(&[0.5, 0.5]), 1e-15));
    }

    #[test]
    fn luders_unsharp_kraus_and_branch_trace() {
        let a = a_s(0.8).unwrap();
        let c = luders(&a, &tol()).unwrap();
        // outcomes sorted: −1 then +1
        assert!(c.kraus()[1].approx_eq(&ComplexMatrix::diag_real(&[0.9f64.sqrt(), 0.1f64.sqrt()]), 1e-14));
        assert!(c.kraus()[0].approx_eq(&ComplexMatrix::diag_real(&[0.1f64.sqrt(), 0.9f64.sqrt()]), 1e-14));
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        let branch = c.branch_apply(&Label::single(1), &half).unwrap();
        assert!((branch.trace().re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn luders_rejects_invalid_povm() {
        let bad = Povm::new(
            2,
            vec![
                (Label::single(0), ComplexMatrix::identity(2)),
                (Label::single(1), ComplexMatrix::identity(2)),
            ],
        )
        .unwrap();
        assert!(matches!(luders(&bad, &tol()), Err(Error::InvalidPovm(_))));
    }

    #[test]
    fn classical_channel_on_ground_state() {
        let b = b_t_theta(0.6, FRAC_PI_2).unwrap();
        let c = classical_channel(&b, &tol()).unwrap();
        let out = c.apply(&ComplexMatrix::diag_real(&[1.0, 0.0])).unwrap();
        assert!(out.approx_eq(&ComplexMatrix::diag_real(&[0.5, 0.5]), 1e-14));
        assert!(c.is_cptp(1e-12));
    }

    #[test]
    fn classical_channel_of_trivial_povm() {
        let c = classical_channel(&Povm::trivial(2), &tol()).unwrap();
        assert_eq!(c.dim_out(), 1);
        let out = c.apply(&plus_state()).unwrap();
        assert!(out.approx_eq(&ComplexMatrix::identity(1), 1e-14));
    }

    #[test]
    fn classical_channel_pointer_probabilities() {
        // tr[Λ^B(ϱ)|y⟩⟨y|] = tr[ϱB(y)]
        let b = b_t_theta(0.7, 0.3).unwrap();
        let c = classical_channel(&b, &tol()).unwrap();
        let rho = plus_state();
        let out = c.apply(&rho).unwrap();
        for (y, e) in b.effects().enumerate() {
            assert!((out[(y, y)] - rho.trace_product(e)).norm() < 1e-14);
        }
    }

    #[test]
    fn classical_channel_drops_zero_eigenpairs() {
        let c = classical_channel(&sharp_z(), &tol()).unwrap();
        assert_eq!(c.kraus().len(), 2);
    }

    #[test]
    fn heisenberg_examples() {
        let c = luders(&a_s(0.8).unwrap(), &tol()).unwrap();
        let id = ComplexMatrix::identity(2);
        assert!(c.heisenberg_apply(&id).unwrap().approx_eq(&id, 1e-14));
        let b1 = b_t_theta(1.0, FRAC_PI_2).unwrap();
        let img = c.heisenberg_apply(b1.effect(&Label::single(1)).unwrap()).unwrap();
        let expected = pauli::bloch_operator(0.5, [0.3, 0.0, 0.0]);
        assert!(img.approx_eq(&expected, 1e-14));
        let a = a_s(0.8).unwrap();
        for o in a.outcomes() {
            let branch = c.branch_heisenberg(&o.label, &id).unwrap();
            assert!(branch.approx_eq(&o.effect, 1e-14));
        }
        assert!(c.heisenberg_apply(&ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn apply_rejects_bad_states() {
        let c = KrausChannel::identity(2);
        assert!(matches!(c.apply(&ComplexMatrix::identity(2)), Err(Error::InvalidState(_))));
        assert!(matches!(c.apply(&pauli::z()), Err(Error::InvalidState(_))));
        assert!(matches!(c.apply(&ComplexMatrix::identity(3)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn choi_examples() {
        let ch = KrausChannel::identity(2).choi();
        let mut omega = ComplexMatrix::zeros(4, 4);
        for &i in &[0usize, 3] {
            for &j in &[0usize, 3] {
                omega[(i, j)] = C64::new(1.0, 0.0);
            }
        }
        assert_eq!(ch.matrix, omega);
        assert!(ch.is_valid(1e-12));

        // ϱ ↦ I/2 with Kraus |i⟩⟨j|/√2
        let kraus = (0..2)
            .flat_map(|i| (0..2).map(move |j| ComplexMatrix::unit(2, i, j).scale_real(0.5f64.sqrt())))
            .collect();
        let dep = KrausChannel::new(2, 2, kraus).unwrap();
        assert!(dep.choi().matrix.approx_eq(&ComplexMatrix::identity(4).scale_real(0.5), 1e-15));
    }

    #[test]
    fn choi_input_marginal_is_transposed_branch_effect() {
        let a = b_t_theta(0.7, 0.9).unwrap();
        // introduce a σ_y component so the transpose is visible
        let a = a
            .map_effects(2, |e| {
                let u = ComplexMatrix::from_vec(
                    2,
                    2,
                    vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0)],
                )
                .unwrap();
                u.sandwich(e)
            })
            .unwrap();
        let c = luders(&a, &tol()).unwrap();
        for o in a.outcomes() {
            let marg = c.branch_choi(&o.label).unwrap().input_marginal();
            assert!(marg.approx_eq(&o.effect.transpose(), 1e-14));
        }
    }

    #[test]
    fn stinespring_examples() {
        let s = stinespring(&KrausChannel::identity(2));
        assert_eq!(s.dim_env, 1);
        assert_eq!(s.v, ComplexMatrix::identity(2));

        let c = luders(&a_s(0.8).unwrap(), &tol()).unwrap();
        let s = stinespring(&c);
        assert_eq!(s.v.shape(), (4, 2));
        assert!(s.isometry_error() < 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                let e = ComplexMatrix::unit(2, i, j);
                assert!(s.reduce_to_output(&e).approx_eq(&c.apply_linear(&e), 1e-12));
                assert!(s
                    .reduce_to_environment(&e)
                    .approx_eq(&conjugate(&c).apply_linear(&e), 1e-12));
            }
        }
    }

    #[test]
    fn conjugate_of_unitary_is_constant() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = ComplexMatrix::from_real_rows(&[&[h, h], &[h, -h]]);
        let c = conjugate(&KrausChannel::isometric(u));
        assert_eq!(c.dim_out(), 1);
        let out = c.apply(&plus_state()).unwrap();
        assert!(out.approx_eq(&ComplexMatrix::identity(1), 1e-14));
    }

    #[test]
    fn conjugate_of_sharp_luders_on_plus() {
        let c = conjugate(&luders(&sharp_z(), &tol()).unwrap());
        let out = c.apply(&plus_state()).unwrap();
        assert!(out.approx_eq(&ComplexMatrix::diag_real(&[0.5, 0.5]), 1e-14));
    }

    #[test]
    fn nondisturbance_examples() {
        let b = b_t_theta(0.6, 0.4).unwrap();
        assert!(nondisturbing(&KrausChannel::identity(2), &b, 1e-12).unwrap());
        let l = luders(&a_s(0.8).unwrap(), &tol()).unwrap();
        assert!(nondisturbing(&l, &b_t_theta(0.6, 0.0).unwrap(), 1e-12).unwrap());
        assert!(!nondisturbing(&l, &b_t_theta(0.6, FRAC_PI_2).unwrap(), 1e-9).unwrap());
        assert!(nondisturbing(&l, &Povm::trivial(3), 1e-9).is_err());
    }

    #[test]
    fn partition_must_be_exhaustive_and_disjoint() {
        let c = KrausChannel::new(1, 1, vec![ComplexMatrix::identity(1); 2]).unwrap();
        let mut p = Partition::new();
        p.insert(Label::single(0), vec![0]);
        assert!(c.clone().with_partition(p.clone()).is_err());
        p.insert(Label::single(1), vec![0, 1]);
        assert!(c.clone().with_partition(p).is_err());
    }

    #[test]
    fn channel_json_round_trip() {
        let c = luders(&a_s(0.8).unwrap(), &tol()).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"partition\":{\"-1\":[0],\"1\":[1]}"));
        let back: KrausChannel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(parse_label_key("(1,-1)").unwrap(), Label::pair(1, -1));
    }
}
