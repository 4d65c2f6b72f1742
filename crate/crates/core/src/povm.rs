//! Finite-outcome observables (POVMs), their structural predicates,
//! post-processing, and the qubit families used throughout the crate.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eig, pauli, ComplexMatrix};

/// Outcome label: a tuple of integers. Outcomes order lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub Vec<i32>);

impl Label {
    pub fn single(x: i32) -> Self {
        Label(vec![x])
    }

    pub fn pair(x: i32, y: i32) -> Self {
        Label(vec![x, y])
    }

    pub fn concat(&self, other: &Label) -> Label {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Label(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(i32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// One outcome of a POVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub label: Label,
    #[serde(rename = "matrix")]
    pub effect: ComplexMatrix,
}

/// A finite family of effects on a `dim`-dimensional space.
///
/// Construction only checks shapes and label uniqueness; the mathematical
/// conditions (positivity, normalization) are checked by [`Povm::validate`]
/// so that malformed observables can still be represented and reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Povm {
    dim: usize,
    outcomes: Vec<Outcome>,
}

#[derive(Deserialize)]
struct RawPovm {
    dim: usize,
    outcomes: Vec<Outcome>,
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawPovm::deserialize(d)?;
        let pairs = raw.outcomes.into_iter().map(|o| (o.label, o.effect)).collect();
        Povm::new(raw.dim, pairs).map_err(serde::de::Error::custom)
    }
}

impl Povm {
    pub fn new(dim: usize, outcomes: Vec<(Label, ComplexMatrix)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidPovm("no outcomes".into()));
        }
        let mut sorted: BTreeMap<Label, ComplexMatrix> = BTreeMap::new();
        for (label, effect) in outcomes {
            if effect.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch(format!(
                    "effect {label} is {}x{}, expected {dim}x{dim}",
                    effect.rows(),
                    effect.cols()
                )));
            }
            if sorted.insert(label.clone(), effect).is_some() {
                return Err(Error::InvalidPovm(format!("duplicate label {label}")));
            }
        }
        Ok(Self {
            dim,
            outcomes: sorted
                .into_iter()
                .map(|(label, effect)| Outcome { label, effect })
                .collect(),
        })
    }

    /// The one-outcome observable {I}.
    pub fn trivial(dim: usize) -> Self {
        Self::new(dim, vec![(Label::single(0), ComplexMatrix::identity(dim))]).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.outcomes.iter().map(|o| &o.label)
    }

    pub fn effects(&self) -> impl Iterator<Item = &ComplexMatrix> {
        self.outcomes.iter().map(|o| &o.effect)
    }

    pub fn effect(&self, label: &Label) -> Option<&ComplexMatrix> {
        self.outcomes
            .binary_search_by(|o| o.label.cmp(label))
            .ok()
            .map(|i| &self.outcomes[i].effect)
    }

    pub fn index_of(&self, label: &Label) -> Option<usize> {
        self.outcomes.binary_search_by(|o| o.label.cmp(label)).ok()
    }

    pub fn effect_sum(&self) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
        for o in &self.outcomes {
            acc += &o.effect;
        }
        acc
    }

    /// First violated condition, if any.
    pub fn violation(&self, tol: f64) -> Option<String> {
        for o in &self.outcomes {
            let herr = o.effect.hermiticity_error();
            if herr > tol {
                return Some(format!("effect {} is not Hermitian ({herr:.3e})", o.label));
            }
            let eig = herm_eig(&o.effect, f64::INFINITY).expect("square");
            if eig.min_eigenvalue() < -tol {
                return Some(format!(
                    "effect {} has negative eigenvalue {:.3e}",
                    o.label,
                    eig.min_eigenvalue()
                ));
            }
        }
        let dev = self
            .effect_sum()
            .distance(&ComplexMatrix::identity(self.dim));
        // Rounding accumulates over many effects, hence the √dim scaling.
        if dev > tol * (self.dim as f64).sqrt() {
            return Some(format!("normalization fails: ‖Σ effects − I‖_F = {dev:.3e}"));
        }
        None
    }

    pub fn validate(&self, tol: f64) -> bool {
        self.violation(tol).is_none()
    }

    pub(crate) fn ensure_valid(&self, tol: f64) -> Result<()> {
        match self.violation(tol) {
            Some(msg) => Err(Error::InvalidPovm(msg)),
            None => Ok(()),
        }
    }

    pub fn is_sharp(&self, tol: f64) -> bool {
        self.outcomes
            .iter()
            .all(|o| (&o.effect * &o.effect).distance(&o.effect) <= tol)
    }

    pub fn commutes_with(&self, other: &Povm, tol: f64) -> bool {
        self.dim == other.dim
            && self.outcomes.iter().all(|a| {
                other
                    .outcomes
                    .iter()
                    .all(|b| a.effect.commutator(&b.effect).frobenius_norm() <= tol)
            })
    }

    /// Same labels and entrywise-equal effects within `tol`.
    pub fn approx_eq(&self, other: &Povm, tol: f64) -> bool {
        self.max_deviation(other).is_some_and(|d| d <= tol)
    }

    /// max_x ‖A(x) − B(x)‖_F, or None when dims or label sets differ.
    pub fn max_deviation(&self, other: &Povm) -> Option<f64> {
        if self.dim != other.dim || self.len() != other.len() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.outcomes.iter().zip(&other.outcomes) {
            if a.label != b.label {
                return None;
            }
            worst = worst.max(a.effect.distance(&b.effect));
        }
        Some(worst)
    }

    /// Applies `f` to every effect, keeping labels.
    pub fn map_effects(&self, dim: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Result<Povm> {
        Povm::new(
            dim,
            self.outcomes
                .iter()
                .map(|o| (o.label.clone(), f(&o.effect)))
                .collect(),
        )
    }

    /// Smearing z ↦ Σ_y kernel[y][z]·A(y). Row `y` of the kernel follows
    /// outcome order and must be a probability vector over the new labels.
    pub fn post_process(&self, kernel: &[Vec<f64>], new_labels: Vec<Label>) -> Result<Povm> {
        if kernel.len() != self.len() {
            return Err(Error::NotStochastic(format!(
                "kernel has {} rows for {} outcomes",
                kernel.len(),
                self.len()
            )));
        }
        for (y, row) in kernel.iter().enumerate() {
            if row.len() != new_labels.len() {
                return Err(Error::NotStochastic(format!(
                    "row {y} has {} entries for {} new outcomes",
                    row.len(),
                    new_labels.len()
                )));
            }
            if let Some(w) = row.iter().find(|w| w.is_nan() || **w < 0.0) {
                return Err(Error::NotStochastic(format!("row {y} has weight {w}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::NotStochastic(format!("row {y} sums to {total}")));
            }
        }
        let effects = new_labels
            .into_iter()
            .enumerate()
            .map(|(z, label)| {
                let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
                for (y, o) in self.outcomes.iter().enumerate() {
                    acc += &o.effect.scale_real(kernel[y][z]);
                }
                (label, acc)
            })
            .collect();
        Povm::new(self.dim, effects)
    }
}

/// A POVM on a product outcome set Ω_A × Ω_B. Labels are the concatenation
/// of an Ω_A label (`first_len` integers) and an Ω_B label.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLabeledPovm {
    povm: Povm,
    first_len: usize,
}

impl ProductLabeledPovm {
    pub fn new(povm: Povm, first_len: usize) -> Result<Self> {
        let mut firsts = Vec::new();
        let mut seconds = Vec::new();
        for label in povm.labels() {
            if label.len() <= first_len {
                return Err(Error::InvalidPovm(format!(
                    "label {label} cannot be split after {first_len} entries"
                )));
            }
            firsts.push(Label(label.0[..first_len].to_vec()));
            seconds.push(Label(label.0[first_len..].to_vec()));
        }
        firsts.sort();
        firsts.dedup();
        seconds.sort();
        seconds.dedup();
        if firsts.len() * seconds.len() != povm.len() {
            return Err(Error::InvalidPovm(format!(
                "labels do not form a full product ({} x {} vs {} outcomes)",
                firsts.len(),
                seconds.len(),
                povm.len()
            )));
        }
        Ok(Self { povm, first_len })
    }

    /// Builds M from effects keyed by (x, y).
    pub fn from_pairs(dim: usize, entries: Vec<((Label, Label), ComplexMatrix)>) -> Result<Self> {
        let first_len = entries
            .first()
            .map(|((x, _), _)| x.len())
            .ok_or_else(|| Error::InvalidPovm("no outcomes".into()))?;
        if entries.iter().any(|((x, _), _)| x.len() != first_len) {
            return Err(Error::InvalidPovm("first labels differ in length".into()));
        }
        let povm = Povm::new(
            dim,
            entries.into_iter().map(|((x, y), m)| (x.concat(&y), m)).collect(),
        )?;
        Self::new(povm, first_len)
    }

    /// Joint observable of a coarse-graining and its refinement:
    /// M(x, y) = δ_{x, y[..prefix]} C(y), pairing C with the marginal over
    /// the first `prefix` label entries.
    pub fn refinement(c: &Povm, prefix: usize) -> Result<Self> {
        if c.labels().any(|l| l.len() < prefix) || prefix == 0 {
            return Err(Error::InvalidPovm(format!("labels shorter than the prefix {prefix}")));
        }
        let mut firsts: Vec<Label> = c.labels().map(|l| Label(l.0[..prefix].to_vec())).collect();
        firsts.dedup();
        let zero = ComplexMatrix::zeros(c.dim(), c.dim());
        let mut entries = Vec::with_capacity(firsts.len() * c.len());
        for x in &firsts {
            for o in c.outcomes() {
                let e = if o.label.0[..prefix] == x.0[..] { o.effect.clone() } else { zero.clone() };
                entries.push(((x.clone(), o.label.clone()), e));
            }
        }
        Self::from_pairs(c.dim(), entries)
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn into_povm(self) -> Povm {
        self.povm
    }

    pub fn first_len(&self) -> usize {
        self.first_len
    }

    pub fn dim(&self) -> usize {
        self.povm.dim()
    }

    pub fn split(&self, label: &Label) -> (Label, Label) {
        (
            Label(label.0[..self.first_len].to_vec()),
            Label(label.0[self.first_len..].to_vec()),
        )
    }

    /// Iterates ((x, y), M(x, y)) in label order.
    pub fn entries(&self) -> impl Iterator<Item = ((Label, Label), &ComplexMatrix)> {
        self.povm.outcomes().iter().map(|o| (self.split(&o.label), &o.effect))
    }

    pub fn first_labels(&self) -> Vec<Label> {
        let mut v: Vec<Label> = self.entries().map(|((x, _), _)| x).collect();
        v.dedup();
        v
    }

    pub fn second_labels(&self) -> Vec<Label> {
        let mut v: Vec<Label> = self.entries().map(|((_, y), _)| y).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn get(&self, x: &Label, y: &Label) -> Option<&ComplexMatrix> {
        self.povm.effect(&x.concat(y))
    }

    /// (A, B) with A(x) = Σ_y M(x,y) and B(y) = Σ_x M(x,y).
    pub fn marginals(&self) -> (Povm, Povm) {
        let d = self.dim();
        let mut first: BTreeMap<Label, ComplexMatrix> = BTreeMap::new();
        let mut second: BTreeMap<Label, ComplexMatrix> = BTreeMap::new();
        for ((x, y), m) in self.entries() {
            *first.entry(x).or_insert_with(|| ComplexMatrix::zeros(d, d)) += m;
            *second.entry(y).or_insert_with(|| ComplexMatrix::zeros(d, d)) += m;
        }
        (
            Povm::new(d, first.into_iter().collect()).expect("marginal"),
            Povm::new(d, second.into_iter().collect()).expect("marginal"),
        )
    }

    pub fn validate(&self, tol: f64) -> bool {
        self.povm.validate(tol)
    }
}

fn check_sharpness(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::OutOfRange(format!("sharpness {t} not in (0, 1]")));
    }
    Ok(())
}

/// Binary qubit observable ½(I ± t·n·σ) with labels ±1.
pub fn qubit_binary(t: f64, axis: [f64; 3]) -> Result<Povm> {
    check_sharpness(t)?;
    let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::OutOfRange(format!("axis has norm {norm}, expected 1")));
    }
    let v = |sign: f64| axis.map(|a| 0.5 * sign * t * a);
    Povm::new(
        2,
        vec![
            (Label::single(1), pauli::bloch_operator(0.5, v(1.0))),
            (Label::single(-1), pauli::bloch_operator(0.5, v(-1.0))),
        ],
    )
}

/// A_s(±1) = ½(I ± s σ_z).
pub fn a_s(s: f64) -> Result<Povm> {
    qubit_binary(s, [0.0, 0.0, 1.0])
}

/// B_{t,θ}(±1) = ½(I ± t(sinθ σ_x + cosθ σ_z)).
pub fn b_t_theta(t: f64, theta: f64) -> Result<Povm> {
    qubit_binary(t, [theta.sin(), 0.0, theta.cos()])
}

/// The four-outcome observable with labels (j, k) ∈ {±1}², whose
/// first-index marginal is A_s:
///
/// C(1,±1) = (1±s)/4 (I ± σ_z), C(−1,1) = (1−s)/4 (I + σ_x),
/// C(−1,−1) = (1−s)/4 (I − σ_x) + s/2 (I − σ_z).
pub fn observable_c(s: f64) -> Result<Povm> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::OutOfRange(format!("s = {s} not in (0, 1)")));
    }
    let id = ComplexMatrix::identity(2);
    let (sx, sz) = (pauli::x(), pauli::z());
    let q = (1.0 - s) / 4.0;
    Povm::new(
        2,
        vec![
            (Label::pair(1, 1), (&id + &sz).scale_real((1.0 + s) / 4.0)),
            (Label::pair(1, -1), (&id - &sz).scale_real(q)),
            (Label::pair(-1, 1), (&id + &sx).scale_real(q)),
            (
                Label::pair(-1, -1),
                &(&id - &sx).scale_real(q) + &(&id - &sz).scale_real(s / 2.0),
            ),
        ],
    )
}

/// Noisy x, y and z spin observables with sharpness t.
pub fn noisy_spin_triplet(t: f64) -> Result<(Povm, Povm, Povm)> {
    Ok((
        qubit_binary(t, [1.0, 0.0, 0.0])?,
        qubit_binary(t, [0.0, 1.0, 0.0])?,
        qubit_binary(t, [0.0, 0.0, 1.0])?,
    ))
}

/// Bloch description (bias, vector) of a binary qubit observable with
/// labels ±1: A(+1) = ½((1+b)·I + v·σ), A(−1) = ½((1−b)·I − v·σ).
pub fn binary_qubit_bloch(p: &Povm) -> Option<(f64, [f64; 3])> {
    if p.dim() != 2 || p.len() != 2 {
        return None;
    }
    let plus = p.effect(&Label::single(1))?;
    let (a, v) = pauli::bloch_decompose(plus);
    Some((2.0 * a - 1.0, v.map(|c| 2.0 * c)))
}

/// Recognizes an unbiased binary qubit observable ½(I ± v·σ) and returns v.
pub fn unbiased_qubit_vector(p: &Povm, tol: f64) -> Option<[f64; 3]> {
    let (bias, v) = binary_qubit_bloch(p)?;
    if bias.abs() > tol || p.effect(&Label::single(-1)).is_none() {
        return None;
    }
    let rebuilt = qubit_from_vector(v)?;
    (p.max_deviation(&rebuilt)? <= tol).then_some(v)
}

fn qubit_from_vector(v: [f64; 3]) -> Option<Povm> {
    Povm::new(
        2,
        vec![
            (Label::single(1), pauli::bloch_operator(0.5, v.map(|c| 0.5 * c))),
            (Label::single(-1), pauli::bloch_operator(0.5, v.map(|c| -0.5 * c))),
        ],
    )
    .ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn z_basis() -> Povm {
        Povm::new(
            2,
            vec![
                (Label::single(0), ComplexMatrix::diag_real(&[1.0, 0.0])),
                (Label::single(1), ComplexMatrix::diag_real(&[0.0, 1.0])),
            ],
        )
        .unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(z_basis().validate(1e-9));
        let double = Povm::new(
            2,
            vec![
                (Label::single(0), ComplexMatrix::identity(2)),
                (Label::single(1), ComplexMatrix::identity(2)),
            ],
        )
        .unwrap();
        assert!(!double.validate(1e-9));
        assert!(double.violation(1e-9).unwrap().contains("normalization"));
        assert!(observable_c(0.8).unwrap().validate(1e-12));
    }

    #[test]
    fn negative_effect_fails_validation() {
        let p = Povm::new(
            2,
            vec![
                (Label::single(0), ComplexMatrix::diag_real(&[1.5, 0.0])),
                (Label::single(1), ComplexMatrix::diag_real(&[-0.5, 1.0])),
            ],
        )
        .unwrap();
        assert!(!p.validate(1e-9));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let r = Povm::new(
            1,
            vec![
                (Label::single(0), ComplexMatrix::identity(1)),
                (Label::single(0), ComplexMatrix::zeros(1, 1)),
            ],
        );
        assert!(matches!(r, Err(Error::InvalidPovm(_))));
    }

    #[test]
    fn sharpness() {
        assert!(z_basis().is_sharp(1e-12));
        assert!(!a_s(0.8).unwrap().is_sharp(1e-9));
        assert!(a_s(1.0).unwrap().is_sharp(1e-12));
    }

    #[test]
    fn commutation() {
        let a = a_s(0.8).unwrap();
        assert!(a.commutes_with(&b_t_theta(0.6, 0.0).unwrap(), 1e-12));
        assert!(!a.commutes_with(&b_t_theta(0.6, FRAC_PI_2).unwrap(), 1e-9));
        assert!(!a.commutes_with(&b_t_theta(0.6, FRAC_PI_4).unwrap(), 1e-9));
        assert!(a.commutes_with(&Povm::trivial(2), 1e-12));
    }

    #[test]
    fn qubit_binary_examples() {
        let p = qubit_binary(1.0, [0.0, 0.0, 1.0]).unwrap();
        assert!(p
            .effect(&Label::single(1))
            .unwrap()
            .approx_eq(&ComplexMatrix::diag_real(&[1.0, 0.0]), 1e-15));
        let a = a_s(0.8).unwrap();
        assert!(a
            .effect(&Label::single(1))
            .unwrap()
            .approx_eq(&ComplexMatrix::diag_real(&[0.9, 0.1]), 1e-15));
        assert!(a
            .effect(&Label::single(-1))
            .unwrap()
            .approx_eq(&ComplexMatrix::diag_real(&[0.1, 0.9]), 1e-15));
        let b = b_t_theta(0.6, FRAC_PI_2).unwrap();
        let expected = &ComplexMatrix::identity(2).scale_real(0.5) + &pauli::x().scale_real(0.3);
        assert!(b.effect(&Label::single(1)).unwrap().approx_eq(&expected, 1e-15));
    }

    #[test]
    fn qubit_binary_rejects_bad_parameters() {
        assert!(qubit_binary(0.0, [0.0, 0.0, 1.0]).is_err());
        assert!(qubit_binary(1.2, [0.0, 0.0, 1.0]).is_err());
        assert!(qubit_binary(0.5, [0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn observable_c_effects() {
        let c = observable_c(0.8).unwrap();
        let id = ComplexMatrix::identity(2);
        let e11 = (&id + &pauli::z()).scale_real(0.45);
        assert!(c.effect(&Label::pair(1, 1)).unwrap().approx_eq(&e11, 1e-15));
        let em11 = (&id + &pauli::x()).scale_real(0.05);
        assert!(c.effect(&Label::pair(-1, 1)).unwrap().approx_eq(&em11, 1e-15));
        assert!(observable_c(1.0).is_err());
        assert!(observable_c(0.0).is_err());
    }

    #[test]
    fn c_marginal_is_a_s() {
        for &s in &[0.1, 0.5, 0.8, 0.99] {
            let m = ProductLabeledPovm::new(observable_c(s).unwrap(), 1).unwrap();
            let (a, _) = m.marginals();
            assert!(a.approx_eq(&a_s(s).unwrap(), 1e-12));
        }
    }

    #[test]
    fn orthogonal_joint_marginals() {
        let (s, t) = (0.6, 0.6);
        let mut entries = Vec::new();
        for &i in &[1, -1] {
            for &j in &[1, -1] {
                let e = pauli::bloch_operator(0.25, [0.25 * j as f64 * t, 0.0, 0.25 * i as f64 * s]);
                entries.push(((Label::single(i), Label::single(j)), e));
            }
        }
        let m = ProductLabeledPovm::from_pairs(2, entries).unwrap();
        let (a, b) = m.marginals();
        assert!(a.approx_eq(&a_s(0.6).unwrap(), 1e-15));
        assert!(b.approx_eq(&b_t_theta(0.6, FRAC_PI_2).unwrap(), 1e-15));
    }

    #[test]
    fn product_with_trivial_factor() {
        let a = a_s(0.8).unwrap();
        let entries = a
            .outcomes()
            .iter()
            .map(|o| ((o.label.clone(), Label::single(0)), o.effect.clone()))
            .collect();
        let m = ProductLabeledPovm::from_pairs(2, entries).unwrap();
        let (first, second) = m.marginals();
        assert!(first.approx_eq(&a, 0.0));
        assert!(second.approx_eq(&Povm::trivial(2), 1e-15));
    }

    #[test]
    fn incomplete_product_rejected() {
        let p = Povm::new(
            1,
            vec![
                (Label::pair(0, 0), ComplexMatrix::identity(1)),
                (Label::pair(0, 1), ComplexMatrix::zeros(1, 1)),
                (Label::pair(1, 0), ComplexMatrix::zeros(1, 1)),
            ],
        )
        .unwrap();
        assert!(ProductLabeledPovm::new(p, 1).is_err());
    }

    #[test]
    fn post_processing_examples() {
        let b = b_t_theta(1.0, 0.3).unwrap();
        let id_kernel = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let same = b.post_process(&id_kernel, vec![Label::single(-1), Label::single(1)]).unwrap();
        assert!(same.approx_eq(&b, 0.0));

        let merged = b.post_process(&[vec![1.0], vec![1.0]], vec![Label::single(0)]).unwrap();
        assert!(merged.approx_eq(&Povm::trivial(2), 1e-15));

        // rows follow outcome order (−1, +1)
        let t = 0.35;
        let (p, q) = ((1.0 + t) / 2.0, (1.0 - t) / 2.0);
        let smeared = b
            .post_process(&[vec![p, q], vec![q, p]], vec![Label::single(-1), Label::single(1)])
            .unwrap();
        assert!(smeared.approx_eq(&b_t_theta(t, 0.3).unwrap(), 1e-15));
    }

    #[test]
    fn post_processing_rejects_bad_kernels() {
        let b = a_s(0.5).unwrap();
        let l = vec![Label::single(0), Label::single(1)];
        assert!(b.post_process(&[vec![0.5, 0.6], vec![0.5, 0.5]], l.clone()).is_err());
        assert!(b.post_process(&[vec![1.5, -0.5], vec![0.5, 0.5]], l.clone()).is_err());
        assert!(b.post_process(&[vec![1.0, 0.0]], l).is_err());
    }

    #[test]
    fn triplet() {
        let (x, y, z) = noisy_spin_triplet(1.0).unwrap();
        for p in [&x, &y, &z] {
            assert!(p.is_sharp(1e-12));
            assert!(p.validate(1e-12));
        }
        let t = 0.65;
        assert!(t > 1.0 / 3f64.sqrt() && t <= 1.0 / 2f64.sqrt());
        let (x, y, z) = noisy_spin_triplet(t).unwrap();
        for p in [&x, &y, &z] {
            assert!(p.validate(1e-12));
        }
        assert!(noisy_spin_triplet(0.0).is_err());
    }

    #[test]
    fn unbiased_recognition() {
        let b = b_t_theta(0.6, 0.4).unwrap();
        let v = unbiased_qubit_vector(&b, 1e-9).unwrap();
        assert!((v[0] - 0.6 * 0.4f64.sin()).abs() < 1e-12);
        assert!(unbiased_qubit_vector(&observable_c(0.5).unwrap(), 1e-9).is_none());
        let biased = Povm::new(
            2,
            vec![
                (Label::single(1), ComplexMatrix::diag_real(&[1.0, 0.5])),
                (Label::single(-1), ComplexMatrix::diag_real(&[0.0, 0.5])),
            ],
        )
        .unwrap();
        assert!(unbiased_qubit_vector(&biased, 1e-9).is_none());
    }

    #[test]
    fn json_round_trip() {
        let c = observable_c(0.8).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.starts_with("{\"dim\":2,\"outcomes\":[{\"label\":[-1,-1],\"matrix\":"));
        let back: Povm = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn refinement_pairs_c_with_its_coarse_graining() {
        let c = observable_c(0.8).unwrap();
        let m = ProductLabeledPovm::refinement(&c, 1).unwrap();
        assert!(m.validate(1e-12));
        let (first, second) = m.marginals();
        assert!(first.max_deviation(&a_s(0.8).unwrap()).unwrap() <= 1e-12);
        assert!(second.max_deviation(&c).unwrap() <= 1e-12);
        assert!(ProductLabeledPovm::refinement(&c, 3).is_err());
    }
}
