use std::path::{Path, PathBuf};

use seqmeas::channel::{luders, nondisturbing, KrausChannel};
use seqmeas::dilation::{naimark_canonical, naimark_minimal, verify_dilation};
use seqmeas::feasibility::{
    busch_criterion, busch_margin, conjugate_is_b_channel, find_joint_observable, recover_b_prime,
    FeasibilityOutcome, SolverOptions, Status,
};
use seqmeas::linalg::{herm_eig, psd_rank, ComplexMatrix, Tolerances};
use seqmeas::povm::{unbiased_qubit_vector, Povm, ProductLabeledPovm};
use seqmeas::universal::{sequential_residual, universal_channel, SequentialScheme};

use crate::io::{from_value, load, read_json, write_json, Artifacts, InputError, InputResult};
use crate::report::{Check, CheckStatus, InputDigest};

/// Shared state of one command invocation.
pub struct Ctx {
    pub opts: SolverOptions,
    pub inputs: Vec<InputDigest>,
}

impl Ctx {
    pub fn new(opts: SolverOptions) -> Self {
        Self { opts, inputs: Vec::new() }
    }

    pub fn tol(&self) -> f64 {
        self.opts.tol
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances::default()
    }

    /// Loads a POVM and rejects it unless it is a valid observable.
    fn observable(&mut self, path: &Path) -> InputResult<Povm> {
        let p: Povm = load(path, &mut self.inputs)?;
        match p.violation(self.tol()) {
            Some(msg) => Err(InputError(format!("{}: not a valid observable: {msg}", path.display()))),
            None => Ok(p),
        }
    }

    fn channel(&mut self, path: &Path) -> InputResult<KrausChannel> {
        let c: KrausChannel = load(path, &mut self.inputs)?;
        if !c.is_cptp(self.tol()) {
            return Err(InputError(format!(
                "{}: not trace preserving (‖Σ K†K − I‖_F = {:.3e})",
                path.display(),
                c.trace_preservation_error()
            )));
        }
        Ok(c)
    }
}

fn outcome_check(name: &str, operation: &str, tol: f64, out: &FeasibilityOutcome) -> Check {
    let mut check = Check::new(name, operation, tol)
        .status(out.status.into())
        .residual("residual", out.residual)
        .detail(format!("{} after {} iterations", out.status, out.iterations));
    if let Some(floor) = out.infeasibility_floor {
        check = check.residual("infeasibility_floor", floor);
    }
    check
}

fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    herm_eig(&m.hermitian_part(), f64::INFINITY).map_or(f64::NAN, |e| e.min_eigenvalue())
}

/// POVM or channel, told apart by their required keys.
pub fn validate(ctx: &mut Ctx, path: &Path) -> InputResult<Vec<Check>> {
    let loaded = read_json(path)?;
    ctx.inputs.push(loaded.digest);
    let origin = path.display().to_string();
    let tol = ctx.tol();
    let is_object_with = |key: &str| loaded.value.get(key).is_some();
    if is_object_with("kraus") {
        let c: KrausChannel = from_value(loaded.value, &origin)?;
        let choi = c.choi();
        let tp = c.trace_preservation_error();
        let min = min_eigenvalue(&choi.matrix);
        let ok = c.is_cptp(tol) && choi.is_valid(tol);
        let mut check = Check::new("channel", "is_cptp", tol)
            .passed_if(ok)
            .residual("trace_preservation", tp)
            .residual("choi_min_eigenvalue", min);
        if !ok {
            check = check.detail(if tp > tol {
                format!("trace preservation fails: ‖Σ K†K − I‖_F = {tp:.3e}")
            } else {
                format!("Choi matrix has eigenvalue {min:.3e}")
            });
        }
        Ok(vec![check])
    } else if is_object_with("outcomes") {
        let p: Povm = from_value(loaded.value, &origin)?;
        let normalization = p.effect_sum().distance(&ComplexMatrix::identity(p.dim()));
        let min = p.effects().map(min_eigenvalue).fold(f64::INFINITY, f64::min);
        let violation = p.violation(tol);
        let mut check = Check::new("povm", "validate", tol)
            .passed_if(violation.is_none())
            .residual("normalization", normalization)
            .residual("min_eigenvalue", min);
        if let Some(msg) = violation {
            check = check.detail(msg);
        }
        Ok(vec![check])
    } else {
        Err(InputError(format!("{origin}: at /: expected a POVM (\"outcomes\") or a channel (\"kraus\")")))
    }
}

/// Angle in [0, π/2] between the axes of two Bloch vectors.
fn axis_angle(u: [f64; 3], v: [f64; 3]) -> f64 {
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    let norm = |w: [f64; 3]| w.iter().map(|c| c * c).sum::<f64>().sqrt();
    (dot.abs() / (norm(u) * norm(v))).clamp(0.0, 1.0).acos()
}

pub fn joint(
    ctx: &mut Ctx,
    a_path: &Path,
    b_path: &Path,
    exact_qubit: bool,
    witness: Option<&Path>,
) -> InputResult<Vec<Check>> {
    let a = ctx.observable(a_path)?;
    let b = ctx.observable(b_path)?;
    if a.dim() != b.dim() {
        return Err(InputError(format!("observables act on dimensions {} and {}", a.dim(), b.dim())));
    }
    let tol = ctx.tol();
    let mut checks = Vec::new();
    if exact_qubit {
        match (unbiased_qubit_vector(&a, tol), unbiased_qubit_vector(&b, tol)) {
            (Some(u), Some(v)) => {
                let norm = |w: [f64; 3]| w.iter().map(|c| c * c).sum::<f64>().sqrt();
                let (s, t, theta) = (norm(u), norm(v), axis_angle(u, v));
                let check = Check::timed(|| {
                    let margin = busch_margin(s, t, theta);
                    let holds = busch_criterion(s, t, theta);
                    match (margin, holds) {
                        (Ok(m), Ok(h)) => Check::new("joint", "busch_criterion", tol)
                            .passed_if(h)
                            .residual("margin", m)
                            .detail(format!("s={s:.6} t={t:.6} θ={theta:.6}")),
                        (Err(e), _) | (_, Err(e)) => {
                            Check::new("joint", "busch_criterion", tol).status(CheckStatus::Fail).detail(e.to_string())
                        }
                    }
                });
                return Ok(vec![check]);
            }
            _ => checks.push(
                Check::new("exact-qubit", "unbiased_qubit_vector", tol)
                    .status(CheckStatus::Undecided)
                    .heuristic()
                    .detail("inputs are not unbiased binary qubit observables; using the solver"),
            ),
        }
    }
    if a.approx_eq(&b, tol) {
        let check = Check::timed(|| diagonal_joint(&a, tol));
        if let Some(path) = witness {
            write_json(path, &diagonal(&a)?)?;
        }
        checks.push(check);
        return Ok(checks);
    }
    let mut search = None;
    let check = Check::timed(|| {
        let s = find_joint_observable(&a, &b, &ctx.opts);
        match s {
            Ok(s) => {
                let c = outcome_check("joint", "find_joint_observable", tol, &s.outcome);
                search = Some(s);
                c
            }
            Err(e) => Check::new("joint", "find_joint_observable", tol).status(CheckStatus::Fail).detail(e.to_string()),
        }
    });
    checks.push(check);
    if let (Some(path), Some(joint)) = (witness, search.as_ref().and_then(|s| s.joint.as_ref())) {
        write_json(path, joint)?;
    }
    Ok(checks)
}

/// M(x, x′) = δ_{xx′} A(x), the joint observable of A with itself.
fn diagonal(a: &Povm) -> InputResult<Povm> {
    let zero = ComplexMatrix::zeros(a.dim(), a.dim());
    let mut entries = Vec::with_capacity(a.len() * a.len());
    for x in a.outcomes() {
        for y in a.outcomes() {
            let e = if x.label == y.label { x.effect.clone() } else { zero.clone() };
            entries.push((x.label.concat(&y.label), e));
        }
    }
    Ok(Povm::new(a.dim(), entries)?)
}

fn diagonal_joint(a: &Povm, tol: f64) -> Check {
    let check = Check::new("joint", "diagonal joint of identical observables", tol);
    match diagonal(a) {
        Ok(m) => {
            let first_len = a.labels().next().map_or(1, |l| l.len());
            let dev = ProductLabeledPovm::new(m, first_len)
                .map(|m| {
                    let (x, y) = m.marginals();
                    x.max_deviation(a).unwrap_or(f64::INFINITY).max(y.max_deviation(a).unwrap_or(f64::INFINITY))
                })
                .unwrap_or(f64::INFINITY);
            check.passed_if(dev <= tol).residual("residual", dev)
        }
        Err(e) => check.status(CheckStatus::Fail).detail(e.0),
    }
}

/// Joint observable for the universal construction: read from a file or
/// searched for at a hundredth of the tolerance, so the compensated B′
/// stays well inside it.
fn joint_for(ctx: &mut Ctx, a: &Povm, b: &Povm, joint_path: Option<&Path>) -> InputResult<(Option<ProductLabeledPovm>, Check)> {
    let tol = ctx.tol();
    if let Some(path) = joint_path {
        let p: Povm = load(path, &mut ctx.inputs)?;
        let first_len = a.labels().next().map_or(1, |l| l.len());
        let m = ProductLabeledPovm::new(p, first_len)?;
        let (first, second) = m.marginals();
        let dev = first.max_deviation(a).unwrap_or(f64::INFINITY).max(second.max_deviation(b).unwrap_or(f64::INFINITY));
        let ok = m.validate(tol) && dev <= tol;
        let check = Check::new("joint", "marginals", tol).passed_if(ok).residual("marginal_deviation", dev);
        return Ok((ok.then_some(m), check));
    }
    let opts = ctx.opts.clone().with_tol(tol * 1e-2);
    let search = find_joint_observable(a, b, &opts)?;
    let check = outcome_check("joint", "find_joint_observable", opts.tol, &search.outcome);
    Ok((search.product(), check))
}

pub fn universal(
    ctx: &mut Ctx,
    a_path: &Path,
    b_path: Option<&Path>,
    joint_path: Option<&Path>,
    out_dir: Option<PathBuf>,
) -> InputResult<Vec<Check>> {
    let a = ctx.observable(a_path)?;
    let tol = ctx.tol();
    let tols = ctx.tolerances();
    let mut art = Artifacts::new(out_dir);
    let start = std::time::Instant::now();
    let u = universal_channel(&a, &tols)?;
    let ranks: usize = a.effects().map(|e| psd_rank(e, tols.rank).unwrap_or(0)).sum();
    let branch_dev = u
        .channel
        .partition_observable()
        .ok()
        .and_then(|p| p.max_deviation(&a))
        .unwrap_or(f64::INFINITY);
    let mut ok = u.output_dim() == ranks && branch_dev <= tol && u.channel.is_cptp(tol);
    let mut check = Check::new("universal-channel", "universal_channel", tol)
        .residual("branch_deviation", branch_dev)
        .residual("trace_preservation", u.channel.trace_preservation_error())
        .detail(format!("dim_out {} (rank sum {ranks})", u.output_dim()));
    if a.is_sharp(tol) {
        // V is unitary here; identify the output with the input through V†
        let lud = luders(&a, &tols)?;
        let dist = u.channel.rotate_output(&u.dilation.v.adjoint())?.choi().matrix.distance(&lud.choi().matrix);
        ok &= dist <= tol;
        check = check.residual("luders_choi_distance", dist);
    }
    check = check.passed_if(ok);
    check.seconds = start.elapsed().as_secs_f64();
    let mut checks = vec![check];
    art.write("universal_channel.json", &u.channel)?;
    art.write("dilation.json", &u.dilation)?;

    let Some(b_path) = b_path else {
        return Ok(checks);
    };
    let b = ctx.observable(b_path)?;
    if b.dim() != a.dim() {
        return Err(InputError(format!("observables act on dimensions {} and {}", a.dim(), b.dim())));
    }
    let start = std::time::Instant::now();
    let (joint, mut joint_check) = joint_for(ctx, &a, &b, joint_path)?;
    joint_check.seconds = start.elapsed().as_secs_f64();
    checks.push(joint_check);
    let Some(joint) = joint else {
        return Ok(checks);
    };
    art.write("joint.json", joint.povm())?;
    let check = Check::timed(|| match u.compensate(&joint, tol, &tols) {
        Ok(comp) => {
            let residual = sequential_residual(&u.channel, &comp.b_prime, &b).unwrap_or(f64::INFINITY);
            let factorization = u.factorization_residual(&b, &comp.gamma, &tols).unwrap_or(f64::INFINITY);
            let mut c = Check::new("sequential", "verify_sequential", tol)
                .passed_if(residual <= tol && comp.b_prime.validate(tol))
                .residual("sequential", residual)
                .residual("factorization", factorization);
            if let Some(aux) = u.auxiliary_residual(&joint, &comp) {
                c = c.residual("auxiliary", aux);
            }
            let written = art.write("b_prime.json", &comp.b_prime).and_then(|_| {
                let scheme = SequentialScheme::new(a.clone(), u.channel.clone(), comp.b_prime.clone())?;
                art.write("scheme.json", &scheme.bundle())
            });
            if let Err(e) = written {
                c = c.status(CheckStatus::Fail).detail(e.0);
            }
            c
        }
        Err(e) => Check::new("sequential", "modified_observable", tol).status(CheckStatus::Fail).detail(e.to_string()),
    });
    checks.push(check);
    Ok(checks)
}

pub fn conjugate_test(ctx: &mut Ctx, channel_path: &Path, b_path: &Path, out_dir: Option<PathBuf>) -> InputResult<Vec<Check>> {
    let c = ctx.channel(channel_path)?;
    let b = ctx.observable(b_path)?;
    if b.dim() != c.dim_in() {
        return Err(InputError(format!("observable on dimension {} vs channel input {}", b.dim(), c.dim_in())));
    }
    let tol = ctx.tol();
    let mut art = Artifacts::new(out_dir);
    let mut status = Status::Undecided;
    let test = Check::timed(|| match conjugate_is_b_channel(&c, &b, &ctx.opts) {
        Ok(out) => {
            status = out.status;
            outcome_check("conjugate-b-channel", "conjugate_is_b_channel", tol, &out)
        }
        Err(e) => Check::new("conjugate-b-channel", "conjugate_is_b_channel", tol)
            .status(CheckStatus::Fail)
            .detail(e.to_string()),
    });
    let mut checks = vec![test];
    if status != Status::Feasible {
        return Ok(checks);
    }
    let mut recovered = None;
    checks.push(Check::timed(|| match recover_b_prime(&c, &b, &ctx.opts) {
        Ok(bp) => {
            let residual = sequential_residual(&c, &bp, &b).unwrap_or(f64::INFINITY);
            let check = Check::new("recover-b-prime", "recover_b_prime+verify_sequential", tol)
                .passed_if(residual <= tol)
                .residual("sequential", residual);
            recovered = Some(bp);
            check
        }
        Err(e) => Check::new("recover-b-prime", "recover_b_prime", tol).status(CheckStatus::Fail).detail(e.to_string()),
    }));
    if let Some(bp) = recovered {
        art.write("b_prime.json", &bp)?;
    }
    Ok(checks)
}

pub fn nondisturb(ctx: &mut Ctx, channel_path: &Path, b_path: &Path) -> InputResult<Vec<Check>> {
    let c = ctx.channel(channel_path)?;
    let b = ctx.observable(b_path)?;
    let tol = ctx.tol();
    let ok = nondisturbing(&c, &b, tol)?;
    let worst = b
        .effects()
        .map(|e| c.heisenberg_apply(e).map_or(f64::INFINITY, |h| h.distance(e)))
        .fold(0.0, f64::max);
    Ok(vec![Check::new("nondisturbance", "nondisturbing", tol).passed_if(ok).residual("max_deviation", worst)])
}

pub fn dilate(ctx: &mut Ctx, a_path: &Path, canonical: bool, out: Option<&Path>) -> InputResult<Vec<Check>> {
    let a = ctx.observable(a_path)?;
    let tol = ctx.tol();
    let tols = ctx.tolerances();
    let start = std::time::Instant::now();
    let d = if canonical { naimark_canonical(&a, &tols)? } else { naimark_minimal(&a, &tols)? };
    let ranks: usize = a.effects().map(|e| psd_rank(e, tols.rank).unwrap_or(0)).sum();
    let valid = verify_dilation(&a, &d, tol);
    let minimal = d.is_minimal(tols.rank);
    let ok = valid && (canonical || (minimal && d.dim_k == ranks));
    let mut check = Check::new("dilation", if canonical { "naimark_canonical" } else { "naimark_minimal" }, tol)
        .passed_if(ok)
        .detail(format!("dim_k {} (rank sum {ranks}), minimal {minimal}", d.dim_k));
    check.seconds = start.elapsed().as_secs_f64();
    if let Some(path) = out {
        write_json(path, &d)?;
    }
    Ok(vec![check])
}
