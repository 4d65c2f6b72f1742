#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqmeas::channel::KrausChannel;
use seqmeas::linalg::{herm_eig, ComplexMatrix, C64};
use seqmeas::povm::{Label, Povm, ProductLabeledPovm};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn int_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.gen_range(-5..=5) as f64, rng.gen_range(-5..=5) as f64)
    })
}

pub fn hermitian(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    matrix(rng, d, d).hermitian_part()
}

/// G G† with G of the given column count, so rank ≤ `rank`.
pub fn psd(rng: &mut impl Rng, d: usize, rank: usize) -> ComplexMatrix {
    let g = matrix(rng, d, rank);
    &g * &g.adjoint()
}

pub fn state(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let rank = rng.gen_range(1..=d);
    let p = psd(rng, d, rank);
    let tr = p.trace().re;
    p.scale_real(1.0 / tr)
}

pub fn inv_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    herm_eig(m, 1e-9).unwrap().reconstruct_with(|l| 1.0 / l.sqrt())
}

/// Eigenvectors of a random Hermitian matrix.
pub fn unitary(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    herm_eig(&hermitian(rng, d), 1e-12).unwrap().eigenvectors
}

/// First `cols` columns of a random unitary.
pub fn isometry(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    unitary(rng, rows).block(0, 0, rows, cols)
}

/// Random CPTP map with at least `k` Kraus operators (more when needed to
/// fit an isometry), cut from one isometry.
pub fn channel(rng: &mut impl Rng, d_in: usize, d_out: usize, k: usize) -> KrausChannel {
    let k = k.max(d_in.div_ceil(d_out));
    let v = isometry(rng, d_out * k, d_in);
    let kraus = (0..k).map(|i| v.block(i * d_out, 0, d_out, d_in)).collect();
    KrausChannel::new(d_in, d_out, kraus).unwrap()
}

/// Normalizes PSD seeds H_i to S^{-1/2} H_i S^{-1/2}, S = Σ H_i.
pub fn normalize(seeds: Vec<ComplexMatrix>) -> Vec<ComplexMatrix> {
    let d = seeds[0].rows();
    let mut s = ComplexMatrix::zeros(d, d);
    for h in &seeds {
        s += h;
    }
    let w = inv_sqrt(&s);
    seeds.iter().map(|h| w.sandwich(h)).collect()
}

/// Random POVM with `n` outcomes labeled 0..n, effects of random rank.
/// The last seed has full rank so that the seeds sum to an invertible S.
pub fn povm(rng: &mut impl Rng, d: usize, n: usize) -> Povm {
    let seeds = (0..n)
        .map(|i| {
            let r = if i + 1 == n { d } else { rng.gen_range(1..=d) };
            psd(rng, d, r)
        })
        .collect();
    let effects = normalize(seeds);
    Povm::new(d, effects.into_iter().enumerate().map(|(i, e)| (Label::single(i as i32), e)).collect()).unwrap()
}

/// Random two-index observable with outcome sets of sizes nx, ny.
pub fn joint(rng: &mut impl Rng, d: usize, nx: usize, ny: usize) -> ProductLabeledPovm {
    pair_up(povm(rng, d, nx * ny), ny)
}

/// Like `joint`, but every entry has full rank.
pub fn full_rank_joint(rng: &mut impl Rng, d: usize, nx: usize, ny: usize) -> ProductLabeledPovm {
    let effects = normalize((0..nx * ny).map(|_| psd(rng, d, d)).collect());
    let labels = (0..nx * ny).map(|i| Label::single(i as i32));
    pair_up(Povm::new(d, labels.zip(effects).collect()).unwrap(), ny)
}

fn pair_up(p: Povm, ny: usize) -> ProductLabeledPovm {
    let d = p.dim();
    let entries = p
        .outcomes()
        .iter()
        .enumerate()
        .map(|(i, o)| ((Label::single((i / ny) as i32), Label::single((i % ny) as i32)), o.effect.clone()))
        .collect();
    ProductLabeledPovm::from_pairs(d, entries).unwrap()
}

/// Sharp observable: projectors onto groups of columns of a random unitary.
pub fn sharp(rng: &mut impl Rng, d: usize, n: usize) -> Povm {
    let u = unitary(rng, d);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in 0..d {
        groups[if c < n { c } else { rng.gen_range(0..n) }].push(c);
    }
    let effects = groups
        .into_iter()
        .enumerate()
        .map(|(i, cols)| {
            let w = u.select_columns(&cols);
            (Label::single(i as i32), &w * &w.adjoint())
        })
        .collect();
    Povm::new(d, effects).unwrap()
}

/// Real part of tr[a b].
pub fn tr_prod(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a * b).trace().re
}

pub fn sorted_spectrum(m: &ComplexMatrix) -> Vec<f64> {
    herm_eig(&m.hermitian_part(), f64::INFINITY).unwrap().eigenvalues
}

/// Nonzero eigenvalues (above `tol`), ascending.
pub fn nonzero_spectrum(m: &ComplexMatrix, tol: f64) -> Vec<f64> {
    sorted_spectrum(m).into_iter().filter(|l| *l > tol).collect()
}
