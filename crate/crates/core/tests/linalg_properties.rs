mod common;

use proptest::prelude::*;
use seqmeas::linalg::{herm_eig, partial_trace, sqrt_psd, tensor, ComplexMatrix, Factor, C64};

/// Kronecker product straight from the index formula.
fn tensor_oracle(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Four-index loop over m[(a,k),(b,l)].
fn partial_trace_oracle(m: &ComplexMatrix, d1: usize, d2: usize, traced: Factor) -> ComplexMatrix {
    match traced {
        Factor::Second => {
            let mut out = ComplexMatrix::zeros(d1, d1);
            for a in 0..d1 {
                for b in 0..d1 {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..d2 {
                        acc += m[(a * d2 + k, b * d2 + k)];
                    }
                    out[(a, b)] = acc;
                }
            }
            out
        }
        Factor::First => {
            let mut out = ComplexMatrix::zeros(d2, d2);
            for k in 0..d2 {
                for l in 0..d2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..d1 {
                        acc += m[(a * d2 + k, a * d2 + l)];
                    }
                    out[(k, l)] = acc;
                }
            }
            out
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_is_associative_on_integers(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4, d3 in 1usize..3) {
        let mut rng = common::rng(seed);
        let a = common::int_matrix(&mut rng, d1, d2);
        let b = common::int_matrix(&mut rng, d2, d3);
        let c = common::int_matrix(&mut rng, d3, d1);
        prop_assert_eq!(tensor(&tensor(&a, &b), &c), tensor(&a, &tensor(&b, &c)));
    }

    #[test]
    fn tensor_matches_index_formula(seed in any::<u64>(), r in 1usize..4, c in 1usize..4) {
        let mut rng = common::rng(seed);
        let a = common::matrix(&mut rng, r, c);
        let b = common::matrix(&mut rng, c, r);
        prop_assert!(tensor(&a, &b).distance(&tensor_oracle(&a, &b)) == 0.0);
    }

    #[test]
    fn partial_trace_of_product(seed in any::<u64>(), d1 in 1usize..5, d2 in 1usize..5) {
        let mut rng = common::rng(seed);
        let a = common::matrix(&mut rng, d1, d1);
        let b = common::matrix(&mut rng, d2, d2);
        let ab = tensor(&a, &b);
        let over_second = partial_trace(&ab, d1, d2, Factor::Second).unwrap();
        prop_assert!(over_second.distance(&a.scale(b.trace())) <= 1e-12);
        let over_first = partial_trace(&ab, d1, d2, Factor::First).unwrap();
        prop_assert!(over_first.distance(&b.scale(a.trace())) <= 1e-12);
    }

    #[test]
    fn partial_trace_matches_loop_oracle(seed in any::<u64>(), d1 in 1usize..5, d2 in 1usize..5) {
        let mut rng = common::rng(seed);
        let m = common::matrix(&mut rng, d1 * d2, d1 * d2);
        for f in [Factor::First, Factor::Second] {
            let got = partial_trace(&m, d1, d2, f).unwrap();
            prop_assert!(got.distance(&partial_trace_oracle(&m, d1, d2, f)) <= 1e-13);
        }
    }

    #[test]
    fn sqrt_squares_back(seed in any::<u64>(), d in 1usize..7, rank_cut in 0usize..3) {
        let mut rng = common::rng(seed);
        let rank = d.saturating_sub(rank_cut).max(1);
        let m = common::psd(&mut rng, d, rank);
        let r = sqrt_psd(&m, 1e-9).unwrap();
        prop_assert!((&r * &r).distance(&m) <= 1e-10 * m.frobenius_norm().max(1.0));
    }

    #[test]
    fn eigenvectors_are_unitary_and_reconstruct(seed in any::<u64>(), d in 1usize..7) {
        let mut rng = common::rng(seed);
        let h = common::hermitian(&mut rng, d);
        let eig = herm_eig(&h, 1e-12).unwrap();
        let u = &eig.eigenvectors;
        prop_assert!((&u.adjoint() * u).distance(&ComplexMatrix::identity(d)) <= 1e-10);
        prop_assert!(eig.reconstruct().distance(&h) <= 1e-10);
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let sum: f64 = eig.eigenvalues.iter().sum();
        prop_assert!((sum - h.trace().re).abs() <= 1e-10);
    }
}

#[test]
fn six_by_six_reconstruction() {
    let mut rng = common::rng(6);
    for _ in 0..20 {
        let h = common::hermitian(&mut rng, 6);
        let eig = herm_eig(&h, 1e-12).unwrap();
        assert!(eig.reconstruct().distance(&h) <= 1e-10);
        // each column is an eigenvector
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            assert!((&h * &v).distance(&v.scale_real(l)) <= 1e-10);
        }
    }
}
