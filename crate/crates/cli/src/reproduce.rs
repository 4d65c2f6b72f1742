//! The qubit worked examples end to end: every check recomputes its numbers
//! from the core library and judges them at a fixed tolerance.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use seqmeas::channel::{luders, KrausChannel};
use seqmeas::dilation::{naimark_minimal, verify_dilation};
use seqmeas::feasibility::{
    busch_criterion, busch_margin, conjugate_is_b_channel, find_joint_observable, find_joint_observables,
    orthogonal_joint_observable, FeasibilityOutcome, JointSearch, SolverOptions, Status,
};
use seqmeas::linalg::{herm_eig, pauli, psd_rank, ComplexMatrix, Tolerances, C64};
use seqmeas::povm::{a_s, b_t_theta, noisy_spin_triplet, observable_c, Label, Povm, ProductLabeledPovm};
use seqmeas::universal::{sequential_residual, universal_channel, UniversalChannel};

use crate::io::{Artifacts, InputError, InputResult};
use crate::report::{Check, CheckStatus};

/// Check names in run order.
pub const CHECKS: [&str; 11] = [
    "busch-grid",
    "luders-implementation",
    "luders-non-universality",
    "universality",
    "sharp-reduction",
    "minimal-dilation",
    "triplet",
    "duality",
    "auxiliary-formula",
    "factorization",
    "witness-revalidation",
];

pub const DEFAULT_SEED: u64 = 1;

/// Witness tolerance of the random universality targets; the compensated
/// B′ inherits the marginal error of the joint observable.
const UNIVERSALITY_JOINT_TOL: f64 = 1e-11;

pub fn selected(only: &[String]) -> InputResult<Vec<&'static str>> {
    if only.is_empty() {
        return Ok(CHECKS.to_vec());
    }
    let wanted: Vec<&str> = only.iter().flat_map(|s| s.split(',')).map(str::trim).collect();
    if let Some(bad) = wanted.iter().find(|w| !CHECKS.contains(w)) {
        return Err(InputError(format!("unknown check {bad:?}; known checks: {}", CHECKS.join(", "))));
    }
    Ok(CHECKS.iter().copied().filter(|c| wanted.contains(c)).collect())
}

#[derive(Serialize)]
struct GridPoint {
    s: f64,
    t: f64,
    theta: f64,
    margin: f64,
    status: Status,
    residual: f64,
    iterations: usize,
}

struct Grid {
    points: Vec<GridPoint>,
    excluded: usize,
    mismatches: usize,
    min_floor: f64,
    max_feasible_residual: f64,
}

struct Target {
    name: String,
    b: Povm,
    joint: ProductLabeledPovm,
}

struct Universality {
    u: UniversalChannel,
    targets: Vec<Target>,
    b_primes: Vec<Povm>,
    sequential: f64,
    auxiliary: f64,
    factorization: f64,
    error: Option<String>,
}

struct Triplet {
    pairs: Vec<FeasibilityOutcome>,
    triple: FeasibilityOutcome,
    low: FeasibilityOutcome,
}

/// Tally of independently re-validated solver witnesses.
#[derive(Default)]
struct Witnesses {
    checked: usize,
    worst: f64,
    failed: Vec<String>,
}

impl Witnesses {
    fn record(&mut self, what: String, defect: f64, tol: f64) {
        self.checked += 1;
        self.worst = self.worst.max(defect);
        if defect.is_nan() || defect > tol {
            self.failed.push(what);
        }
    }
}

pub struct Harness {
    opts: SolverOptions,
    seed: u64,
    art: Artifacts,
    tols: Tolerances,
    grid: Option<Grid>,
    universality: Option<Universality>,
    triplet: Option<Triplet>,
    witnesses: Witnesses,
}

fn min_eig(m: &ComplexMatrix) -> f64 {
    herm_eig(&m.hermitian_part(), f64::INFINITY).map_or(f64::NAN, |e| e.min_eigenvalue())
}

/// Re-checks a joint witness from scratch: PSD entries, and each marginal
/// (sum over all other label positions) equal to its observable.
fn witness_defect(observables: &[&Povm], joint: &Povm) -> f64 {
    let d = joint.dim();
    let lens: Vec<usize> = observables.iter().map(|o| o.labels().next().map_or(0, |l| l.len())).collect();
    let mut sums: Vec<Vec<ComplexMatrix>> = observables.iter().map(|o| vec![ComplexMatrix::zeros(d, d); o.len()]).collect();
    let mut worst: f64 = 0.0;
    for o in joint.outcomes() {
        worst = worst.max(-min_eig(&o.effect));
        let mut at = 0;
        for (k, obs) in observables.iter().enumerate() {
            let part = Label(o.label.0[at..at + lens[k]].to_vec());
            at += lens[k];
            match obs.index_of(&part) {
                Some(i) => sums[k][i] += &o.effect,
                None => return f64::INFINITY,
            }
        }
    }
    for (obs, sum) in observables.iter().zip(&sums) {
        for (e, s) in obs.effects().zip(sum) {
            worst = worst.max(s.distance(e));
        }
    }
    worst
}

fn search_defect(observables: &[&Povm], search: &JointSearch) -> f64 {
    search.joint.as_ref().map_or(f64::INFINITY, |j| witness_defect(observables, j))
}

/// Σ_k K_k† X K_k, computed from the Kraus operators directly.
fn heisenberg(c: &KrausChannel, x: &ComplexMatrix) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(c.dim_in(), c.dim_in());
    for k in c.kraus() {
        acc += &(&(&k.adjoint() * x) * k);
    }
    acc
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    let h = random_matrix(rng, d, d).hermitian_part();
    herm_eig(&h, f64::INFINITY).expect("square").eigenvectors
}

/// CPTP map cut from the first d_in columns of a random unitary.
fn random_channel(rng: &mut ChaCha8Rng, d_in: usize, d_out: usize, k: usize) -> KrausChannel {
    let k = k.max(d_in.div_ceil(d_out));
    let v = random_unitary(rng, d_out * k).block(0, 0, d_out * k, d_in);
    let kraus = (0..k).map(|i| v.block(i * d_out, 0, d_out, d_in)).collect();
    KrausChannel::new(d_in, d_out, kraus).expect("isometry blocks")
}

fn random_state(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    let rank = rng.gen_range(1..=d);
    let g = random_matrix(rng, d, rank);
    let p = &g * &g.adjoint();
    let tr = p.trace().re;
    p.scale_real(1.0 / tr)
}

/// PSD with largest eigenvalue at most one.
fn random_effect(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    let g = random_matrix(rng, d, d);
    let p = &g * &g.adjoint();
    let top = herm_eig(&p, f64::INFINITY).expect("square").max_eigenvalue();
    p.scale_real(rng.gen_range(0.1..1.0) / top)
}

impl Harness {
    pub fn new(opts: SolverOptions, seed: u64, out_dir: Option<PathBuf>) -> Self {
        Self {
            opts,
            seed,
            art: Artifacts::new(out_dir),
            tols: Tolerances::default(),
            grid: None,
            universality: None,
            triplet: None,
            witnesses: Witnesses::default(),
        }
    }

    pub fn artifacts(&self) -> &Artifacts {
        &self.art
    }

    pub fn run(&mut self, name: &str) -> InputResult<Check> {
        let mut artifacts_error = None;
        let check = Check::timed(|| {
            let result = match name {
                "busch-grid" => self.busch_grid(),
                "luders-implementation" => self.luders_implementation(),
                "luders-non-universality" => self.luders_non_universality(),
                "universality" => self.universality_check(),
                "sharp-reduction" => self.sharp_reduction(),
                "minimal-dilation" => self.minimal_dilation(),
                "triplet" => self.triplet_check(),
                "duality" => Ok(self.duality()),
                "auxiliary-formula" => Ok(self.auxiliary_formula()),
                "factorization" => Ok(self.factorization()),
                "witness-revalidation" => Ok(self.witness_revalidation()),
                other => Err(InputError(format!("unknown check {other:?}"))),
            };
            result.unwrap_or_else(|e| {
                artifacts_error = Some(e);
                Check::new(name, "artifacts", 0.0)
            })
        });
        match artifacts_error {
            Some(e) => Err(e),
            None => Ok(check),
        }
    }

    fn grid(&mut self) -> &Grid {
        if self.grid.is_none() {
            let thetas = [0.0, FRAC_PI_8, 2.0 * FRAC_PI_8, 3.0 * FRAC_PI_8, FRAC_PI_2];
            let mut grid = Grid {
                points: Vec::new(),
                excluded: 0,
                mismatches: 0,
                min_floor: f64::INFINITY,
                max_feasible_residual: 0.0,
            };
            for i in 1..=20 {
                for j in 1..=20 {
                    for &theta in &thetas {
                        let (s, t) = (0.05 * i as f64, 0.05 * j as f64);
                        let margin = busch_margin(s, t, theta).expect("grid is in range");
                        if margin.abs() < 1e-3 {
                            grid.excluded += 1;
                            continue;
                        }
                        let holds = busch_criterion(s, t, theta).expect("grid is in range");
                        let (a, b) = (a_s(s).expect("s in range"), b_t_theta(t, theta).expect("t in range"));
                        let search = find_joint_observable(&a, &b, &self.opts).expect("valid qubit pair");
                        let out = &search.outcome;
                        let agrees = if holds {
                            grid.max_feasible_residual = grid.max_feasible_residual.max(out.residual);
                            self.witnesses.record(
                                format!("busch-grid ({s:.2},{t:.2},{theta:.3})"),
                                search_defect(&[&a, &b], &search),
                                self.opts.tol,
                            );
                            out.status == Status::Feasible && out.residual <= 1e-8
                        } else {
                            grid.min_floor = grid.min_floor.min(out.residual);
                            out.status != Status::Feasible && out.residual >= 1e-4
                        };
                        if !agrees {
                            grid.mismatches += 1;
                        }
                        grid.points.push(GridPoint {
                            s,
                            t,
                            theta,
                            margin,
                            status: out.status,
                            residual: out.residual,
                            iterations: out.iterations,
                        });
                    }
                }
            }
            self.grid = Some(grid);
        }
        self.grid.as_ref().expect("filled above")
    }

    fn busch_grid(&mut self) -> InputResult<Check> {
        let tol = self.opts.tol;
        self.grid();
        let grid = self.grid.as_ref().expect("computed");
        let check = Check::new("busch-grid", "find_joint_observable vs busch_criterion", tol)
            .passed_if(grid.mismatches == 0)
            .residual("max_feasible_residual", grid.max_feasible_residual)
            .residual("min_infeasible_floor", grid.min_floor)
            .detail(format!(
                "{} points, {} within 1e-3 of the boundary excluded, {} mismatches",
                grid.points.len(),
                grid.excluded,
                grid.mismatches
            ));
        self.art.write("busch-grid/points.json", &grid.points)?;
        Ok(check)
    }

    fn luders_implementation(&mut self) -> InputResult<Check> {
        #[derive(Serialize)]
        struct Implemented {
            theta: f64,
            t_imp: f64,
            theta_imp: f64,
            bias: f64,
            boundary_defect: f64,
        }
        let s = 0.8;
        let channel = luders(&a_s(s)?, &self.tols)?;
        let mut rows = Vec::new();
        for k in 1..=4 {
            let theta = k as f64 * FRAC_PI_8;
            let b = b_t_theta(1.0, theta)?;
            let plus = heisenberg(&channel, b.effect(&Label::single(1)).expect("±1 labels"));
            let v = [pauli::x(), pauli::y(), pauli::z()].map(|p| (&plus * &p).trace().re);
            let t_imp = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            let cos = v[2] / t_imp;
            let lhs = s * s + t_imp * t_imp - cos * cos * s * s * t_imp * t_imp;
            rows.push(Implemented {
                theta,
                t_imp,
                theta_imp: cos.clamp(-1.0, 1.0).acos(),
                bias: plus.trace().re - 1.0,
                boundary_defect: (lhs - 1.0).abs(),
            });
        }
        let worst = rows.iter().map(|r| r.boundary_defect.max(r.bias.abs())).fold(0.0, f64::max);
        self.art.write("luders-implementation/implemented.json", &rows)?;
        Ok(Check::new("luders-implementation", "heisenberg_apply(luders(A_0.8), B_1,θ)", 1e-10)
            .passed_if(worst <= 1e-10)
            .residual("boundary_defect", worst)
            .detail("implemented binaries lie on the joint measurability boundary"))
    }

    fn luders_non_universality(&mut self) -> InputResult<Check> {
        let a = a_s(0.8)?;
        let c = observable_c(0.8)?;
        let out = conjugate_is_b_channel(&luders(&a, &self.tols)?, &c, &self.opts)?;
        let marginal = ProductLabeledPovm::refinement(&c, 1)?.marginals().0;
        let marginal_dev = marginal
            .outcomes()
            .iter()
            .zip(a.outcomes())
            .map(|(m, e)| (&m.effect - &e.effect).max_abs())
            .fold(0.0, f64::max);
        let valid = c.validate(1e-12);
        self.art.write("luders-non-universality/outcome.json", &out)?;
        Ok(Check::new("luders-non-universality", "conjugate_is_b_channel(luders(A_0.8), C(0.8))", 1e-4)
            .passed_if(out.status != Status::Feasible && out.residual >= 1e-4 && valid && marginal_dev <= 1e-12)
            .residual("floor", out.residual)
            .residual("marginal_deviation", marginal_dev)
            .detail(format!("{} after {} iterations; C valid: {valid}", out.status, out.iterations)))
    }

    fn universality(&mut self) -> InputResult<&Universality> {
        if self.universality.is_none() {
            let a = a_s(0.8)?;
            let u = universal_channel(&a, &self.tols)?;
            let c = observable_c(0.8)?;
            let mut targets = vec![
                Target { name: "C(0.8)".into(), b: c.clone(), joint: ProductLabeledPovm::refinement(&c, 1)? },
                Target {
                    name: "B(0.6,pi/2)".into(),
                    b: b_t_theta(0.6, FRAC_PI_2)?,
                    joint: orthogonal_joint_observable(0.8, 0.6)?,
                },
            ];
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let opts = self.opts.clone().with_tol(UNIVERSALITY_JOINT_TOL);
            let mut error = None;
            let mut attempts = 0;
            while targets.len() < 7 && attempts < 100 {
                attempts += 1;
                let t: f64 = rng.gen_range(0.05..=1.0);
                let theta: f64 = rng.gen_range(0.0..=FRAC_PI_2);
                if busch_margin(0.8, t, theta)? < 1e-2 {
                    continue;
                }
                let b = b_t_theta(t, theta)?;
                let search = find_joint_observable(&a, &b, &opts)?;
                let name = format!("B({t:.4},{theta:.4})");
                self.witnesses.record(format!("universality {name}"), search_defect(&[&a, &b], &search), opts.tol);
                match search.product() {
                    Some(joint) if search.outcome.is_feasible() => targets.push(Target { name, b, joint }),
                    _ => {
                        error = Some(format!("no joint observable found for {name}: {}", search.outcome.status));
                        break;
                    }
                }
            }
            let mut res = Universality {
                u,
                targets,
                b_primes: Vec::new(),
                sequential: 0.0,
                auxiliary: 0.0,
                factorization: 0.0,
                error,
            };
            for target in &res.targets {
                match res.u.compensate(&target.joint, 1e-9, &self.tols) {
                    Ok(comp) => {
                        let seq = sequential_residual(&res.u.channel, &comp.b_prime, &target.b).unwrap_or(f64::INFINITY);
                        let seq = if comp.b_prime.validate(1e-9) { seq } else { f64::INFINITY };
                        res.sequential = res.sequential.max(seq);
                        res.auxiliary = res.auxiliary.max(res.u.auxiliary_residual(&target.joint, &comp).unwrap_or(0.0));
                        res.factorization = res
                            .factorization
                            .max(res.u.factorization_residual(&target.b, &comp.gamma, &self.tols).unwrap_or(f64::INFINITY));
                        res.b_primes.push(comp.b_prime);
                    }
                    Err(e) => {
                        res.error.get_or_insert(format!("{}: {e}", target.name));
                        res.sequential = f64::INFINITY;
                    }
                }
            }
            self.universality = Some(res);
        }
        Ok(self.universality.as_ref().expect("filled above"))
    }

    fn universality_check(&mut self) -> InputResult<Check> {
        self.universality()?;
        let res = self.universality.as_ref().expect("computed");
        let mut check = Check::new("universality", "modified_observable + verify_sequential", 1e-8)
            .passed_if(res.error.is_none() && res.sequential <= 1e-8)
            .residual("sequential", res.sequential)
            .detail(format!(
                "one Λ_A with dim_out {}, targets: {}",
                res.u.output_dim(),
                res.targets.iter().map(|t| t.name.as_str()).collect::<Vec<_>>().join(", ")
            ));
        if let Some(e) = &res.error {
            check = check.detail(e.clone());
        }
        self.art.write("universality/universal_channel.json", &res.u.channel)?;
        for (i, (target, bp)) in res.targets.iter().zip(&res.b_primes).enumerate() {
            self.art.write(&format!("universality/target_{i}.json"), &target.b)?;
            self.art.write(&format!("universality/joint_{i}.json"), target.joint.povm())?;
            self.art.write(&format!("universality/b_prime_{i}.json"), bp)?;
        }
        Ok(check)
    }

    fn sharp_reduction(&mut self) -> InputResult<Check> {
        let a = a_s(1.0)?;
        let u = universal_channel(&a, &self.tols)?;
        let rotated = u.channel.rotate_output(&u.dilation.v.adjoint())?;
        let lud = luders(&a, &self.tols)?;
        let dist = rotated.choi().matrix.distance(&lud.choi().matrix);
        self.art.write("sharp-reduction/universal_channel.json", &u.channel)?;
        self.art.write("sharp-reduction/luders_channel.json", &lud)?;
        Ok(Check::new("sharp-reduction", "choi(universal_channel) vs choi(luders)", 1e-10)
            .passed_if(dist <= 1e-10)
            .residual("choi_distance", dist)
            .detail("output identified with the input through V†"))
    }

    fn minimal_dilation(&mut self) -> InputResult<Check> {
        let cases = [("A_0.8", a_s(0.8)?, 4), ("C_0.8", observable_c(0.8)?, 5), ("sharp_z", a_s(1.0)?, 2)];
        let mut ok = true;
        let mut parts = Vec::new();
        for (name, a, expected) in cases {
            let d = naimark_minimal(&a, &self.tols)?;
            let ranks: usize = a.effects().map(|e| psd_rank(e, 1e-9)).collect::<Result<Vec<_>, _>>()?.iter().sum();
            ok &= d.dim_k == ranks && ranks == expected && verify_dilation(&a, &d, 1e-9) && d.is_minimal(1e-9);
            parts.push(format!("{name}: {} (rank sum {ranks})", d.dim_k));
            self.art.write(&format!("minimal-dilation/{name}.json"), &d)?;
        }
        Ok(Check::new("minimal-dilation", "naimark_minimal + verify_dilation", 1e-9)
            .passed_if(ok)
            .detail(parts.join(", ")))
    }

    fn triplet(&mut self) -> InputResult<&Triplet> {
        if self.triplet.is_none() {
            let (x, y, z) = noisy_spin_triplet(0.65)?;
            let mut pairs = Vec::new();
            for (name, p, q) in [("xy", &x, &y), ("yz", &y, &z), ("xz", &x, &z)] {
                let search = find_joint_observable(p, q, &self.opts)?;
                if search.outcome.is_feasible() {
                    self.witnesses.record(format!("triplet pair {name}"), search_defect(&[p, q], &search), self.opts.tol);
                }
                pairs.push(search.outcome);
            }
            let triple = find_joint_observables(&[&x, &y, &z], &self.opts)?.outcome;
            let (x, y, z) = noisy_spin_triplet(0.55)?;
            let low_search = find_joint_observables(&[&x, &y, &z], &self.opts)?;
            if low_search.outcome.is_feasible() {
                self.witnesses.record("triplet t=0.55".into(), search_defect(&[&x, &y, &z], &low_search), self.opts.tol);
            }
            self.triplet = Some(Triplet { pairs, triple, low: low_search.outcome });
        }
        Ok(self.triplet.as_ref().expect("filled above"))
    }

    fn triplet_check(&mut self) -> InputResult<Check> {
        self.triplet()?;
        let tr = self.triplet.as_ref().expect("computed");
        let pairs_ok = tr.pairs.iter().all(|p| p.is_feasible() && p.residual <= 1e-8);
        let ok = pairs_ok && !tr.triple.is_feasible() && tr.triple.residual >= 1e-4 && tr.low.is_feasible();
        self.art.write("triplet/pairs.json", &tr.pairs)?;
        self.art.write("triplet/triple_t065.json", &tr.triple)?;
        self.art.write("triplet/triple_t055.json", &tr.low)?;
        Ok(Check::new("triplet", "find_joint_observables", 1e-8)
            .passed_if(ok)
            .heuristic()
            .residual("triple_floor", tr.triple.residual)
            .detail(format!(
                "t=0.65: pairs feasible {pairs_ok}, triple {}; t=0.55: triple {}",
                tr.triple.status, tr.low.status
            )))
    }

    fn duality(&mut self) -> Check {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(1));
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let (d_in, d_out, k) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=3));
            let c = random_channel(&mut rng, d_in, d_out, k);
            let rho = random_state(&mut rng, d_in);
            let t = random_effect(&mut rng, d_out);
            let lhs = c.apply(&rho).map(|out| (&out * &t).trace());
            let rhs = c.heisenberg_apply(&t).map(|h| (&rho * &h).trace());
            let gap = match (lhs, rhs) {
                (Ok(l), Ok(r)) => (l - r).norm(),
                _ => f64::INFINITY,
            };
            worst = worst.max(gap);
        }
        Check::new("duality", "apply vs heisenberg_apply", 1e-10)
            .passed_if(worst <= 1e-10)
            .residual("max_gap", worst)
            .detail("100 random (channel, state, effect) triples")
    }

    fn universality_residual(&mut self, name: &str, operation: &str, pick: fn(&Universality) -> f64) -> Check {
        match self.universality() {
            Ok(res) => {
                let r = pick(res);
                Check::new(name, operation, 1e-9).passed_if(r <= 1e-9).residual(name, r)
            }
            Err(e) => Check::new(name, operation, 1e-9).status(CheckStatus::Fail).detail(e.0),
        }
    }

    fn auxiliary_formula(&mut self) -> Check {
        self.universality_residual("auxiliary-formula", "auxiliary_formula_residual", |u| u.auxiliary)
            .detail("all dilation pairs of the universality targets")
    }

    fn factorization(&mut self) -> Check {
        self.universality_residual("factorization", "factorization_residual", |u| u.factorization)
            .detail("max over matrix units of ‖Λ^B − Γ^B∘Λ_A‖_F")
    }

    fn witness_revalidation(&mut self) -> Check {
        let tol = self.opts.tol;
        // make sure every solver-backed check has contributed its witnesses
        let filled = (|| -> InputResult<()> {
            self.grid();
            self.universality()?;
            self.triplet()?;
            Ok(())
        })();
        let w = &self.witnesses;
        let mut check = Check::new("witness-revalidation", "independent marginal and PSD check", tol)
            .passed_if(filled.is_ok() && w.failed.is_empty() && w.checked > 0)
            .residual("worst_defect", w.worst)
            .detail(format!("{}/{} witnesses re-validated", w.checked - w.failed.len(), w.checked));
        if !w.failed.is_empty() {
            check = check.detail(format!("failed: {}", w.failed.join("; ")));
        }
        check
    }
}
