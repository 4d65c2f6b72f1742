use super::dykstra::{BlockLayout, ConeProblem, LinearConstraints};
use super::{faces, psd_violation, FeasibilityOutcome, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ONE};
use crate::povm::{Label, Povm, ProductLabeledPovm};

const MAX_OBSERVABLES: usize = 3;
const MAX_TRIPLE_DIM: usize = 4;
const INPUT_TOL: f64 = 1e-9;

/// Result of a joint-observable search. `joint` carries the witness with
/// concatenated labels when the search is Feasible.
#[derive(Debug, Clone)]
pub struct JointSearch {
    pub outcome: FeasibilityOutcome,
    pub joint: Option<Povm>,
    label_lens: Vec<usize>,
}

impl JointSearch {
    /// The witness as a two-index observable (pairs only).
    pub fn product(&self) -> Option<ProductLabeledPovm> {
        match (&self.joint, self.label_lens.as_slice()) {
            (Some(j), [first, _]) => ProductLabeledPovm::new(j.clone(), *first).ok(),
            _ => None,
        }
    }
}

/// Joint observable of a pair, M with A(x) = Σ_y M(x,y) and B(y) = Σ_x M(x,y).
pub fn find_joint_observable(a: &Povm, b: &Povm, opts: &SolverOptions) -> Result<JointSearch> {
    find_joint_observables(&[a, b], opts)
}

/// Joint observable for up to three observables, each recovered as the
/// marginal over all other indices.
pub fn find_joint_observables(observables: &[&Povm], opts: &SolverOptions) -> Result<JointSearch> {
    let k = observables.len();
    if k == 0 || k > MAX_OBSERVABLES {
        return Err(Error::Unsupported(format!(
            "joint search takes 1 to {MAX_OBSERVABLES} observables, got {k}"
        )));
    }
    let dim = observables[0].dim();
    for o in observables {
        if o.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "observables on dimensions {dim} and {}",
                o.dim()
            )));
        }
        o.ensure_valid(INPUT_TOL)?;
    }
    if k == MAX_OBSERVABLES && dim > MAX_TRIPLE_DIM {
        return Err(Error::Unsupported(format!(
            "three-way search limited to dimension {MAX_TRIPLE_DIM}, got {dim}"
        )));
    }

    let indices = multi_indices(&observables.iter().map(|o| o.len()).collect::<Vec<_>>());
    let layout = BlockLayout::new(vec![dim; indices.len()]);
    let mut cons = LinearConstraints::new();
    for (i, obs) in observables.iter().enumerate() {
        for (x, outcome) in obs.outcomes().iter().enumerate() {
            let blocks: Vec<usize> = (0..indices.len()).filter(|&m| indices[m][i] == x).collect();
            for r in 0..dim {
                for c in 0..dim {
                    let terms = blocks.iter().map(|&m| (layout.index(m, r, c), ONE)).collect();
                    cons.push(terms, outcome.effect[(r, c)]);
                }
            }
        }
    }
    // M(x₁,…,x_k) ≤ A_i(x_i) confines each block to the common range
    let ranges: Vec<Vec<ComplexMatrix>> = observables
        .iter()
        .map(|o| o.effects().map(faces::range).collect())
        .collect();
    let face_bases = indices
        .iter()
        .map(|idx| {
            idx.iter()
                .enumerate()
                .map(|(i, &x)| ranges[i][x].clone())
                .reduce(|u, v| faces::intersect(&u, &v))
                .expect("at least one observable")
        })
        .collect();
    let start = vec![ComplexMatrix::zeros(dim, dim); indices.len()];
    let outcome = ConeProblem::on_faces(layout, &cons, face_bases)
        .solve(&start, opts)
        .confirm(|w| marginal_defect(observables, &indices, w) <= opts.tol);

    let joint = match &outcome.witness {
        Some(w) if outcome.is_feasible() => {
            let labels = indices.iter().map(|idx| joint_label(observables, idx));
            Some(Povm::new(dim, labels.zip(w.iter().cloned()).collect())?)
        }
        _ => None,
    };
    Ok(JointSearch {
        outcome,
        joint,
        label_lens: observables
            .iter()
            .map(|o| o.labels().next().map_or(0, Label::len))
            .collect(),
    })
}

/// All index tuples in lexicographic order.
fn multi_indices(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    out
}

fn joint_label(observables: &[&Povm], idx: &[usize]) -> Label {
    idx.iter()
        .zip(observables)
        .fold(Label(Vec::new()), |acc, (&x, o)| acc.concat(&o.outcomes()[x].label))
}

/// Largest violation of positivity or of any marginal, recomputed directly.
fn marginal_defect(observables: &[&Povm], indices: &[Vec<usize>], witness: &[ComplexMatrix]) -> f64 {
    let dim = observables[0].dim();
    let mut worst = psd_violation(witness);
    for (i, obs) in observables.iter().enumerate() {
        for (x, outcome) in obs.outcomes().iter().enumerate() {
            let mut sum = ComplexMatrix::zeros(dim, dim);
            for (idx, m) in indices.iter().zip(witness) {
                if idx[i] == x {
                    sum += m;
                }
            }
            worst = worst.max(sum.distance(&outcome.effect));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::Status;
    use crate::linalg::pauli;
    use crate::povm::{a_s, b_t_theta, noisy_spin_triplet, qubit_binary};
    use std::f64::consts::FRAC_PI_2;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn commuting_sharp_pair_has_product_joint() {
        let a = a_s(1.0).unwrap();
        let b = qubit_binary(1.0, [0.0, 0.0, -1.0]).unwrap();
        let search = find_joint_observable(&a, &b, &opts()).unwrap();
        assert_eq!(search.outcome.status, Status::Feasible);
        let m = search.product().unwrap();
        for x in [1, -1] {
            for y in [1, -1] {
                let expected = a.effect(&Label::single(x)).unwrap() * b.effect(&Label::single(y)).unwrap();
                let got = m.get(&Label::single(x), &Label::single(y)).unwrap();
                assert!(got.distance(&expected) < 1e-7);
            }
        }
    }

    #[test]
    fn boundary_pair_is_jointly_measurable() {
        let a = a_s(0.8).unwrap();
        let b = b_t_theta(0.6, FRAC_PI_2).unwrap();
        let search = find_joint_observable(&a, &b, &opts()).unwrap();
        assert_eq!(search.outcome.status, Status::Feasible);
        // at the boundary the joint observable is unique
        let m = search.product().unwrap();
        for i in [1, -1] {
            for j in [1, -1] {
                let v = [0.6 * j as f64 / 4.0, 0.0, 0.8 * i as f64 / 4.0];
                let expected = pauli::bloch_operator(0.25, v);
                let got = m.get(&Label::single(i), &Label::single(j)).unwrap();
                assert!(got.distance(&expected) < 1e-3, "{}", got.distance(&expected));
            }
        }
    }

    #[test]
    fn sharp_enough_orthogonal_pair_is_not() {
        let a = a_s(0.8).unwrap();
        let b = b_t_theta(0.7, FRAC_PI_2).unwrap();
        let search = find_joint_observable(&a, &b, &opts()).unwrap();
        assert_ne!(search.outcome.status, Status::Feasible);
        assert!(search.joint.is_none());
        assert!(search.outcome.residual > 1e-4);
    }

    #[test]
    fn observable_with_itself_is_feasible() {
        let a = a_s(0.5).unwrap();
        let search = find_joint_observable(&a, &a, &opts()).unwrap();
        assert!(search.outcome.is_feasible());
    }

    #[test]
    fn spin_triplet_window() {
        let (x, y, z) = noisy_spin_triplet(0.65).unwrap();
        for (p, q) in [(&x, &y), (&y, &z), (&x, &z)] {
            assert!(find_joint_observable(p, q, &opts()).unwrap().outcome.is_feasible());
        }
        let triple = find_joint_observables(&[&x, &y, &z], &opts()).unwrap();
        assert_ne!(triple.outcome.status, Status::Feasible);

        let (x, y, z) = noisy_spin_triplet(0.55).unwrap();
        let triple = find_joint_observables(&[&x, &y, &z], &opts()).unwrap();
        assert!(triple.outcome.is_feasible());
        assert_eq!(triple.joint.unwrap().len(), 8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = a_s(0.5).unwrap();
        let big = Povm::trivial(3);
        assert!(matches!(find_joint_observable(&a, &big, &opts()), Err(Error::DimensionMismatch(_))));
        assert!(matches!(
            find_joint_observables(&[&a, &a, &a, &a], &opts()),
            Err(Error::Unsupported(_))
        ));
        let t5 = Povm::trivial(5);
        assert!(matches!(
            find_joint_observables(&[&t5, &t5, &t5], &opts()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn multi_index_order() {
        assert_eq!(
            multi_indices(&[2, 3]),
            vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 1], vec![1, 2]]
        );
    }
}
