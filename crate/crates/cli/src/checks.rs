//! The invariant battery behind `lama verify`, also driven by the
//! acceptance tests with their own scenarios.

use std::fmt;

use lama::objective::{grad_f_x, grad_f_z, grad_phi_eps, phi_eps_value, f_value, Iterate, Problem, Smoothness};
use lama::regnet::{smoothed_gradient, smoothed_value, RegularizerNet, DEFAULT_ACTIVATION_KNEE};
use lama::solver::{
    check_branch_certificates, check_eps_schedule, check_fixed_eps_descent, check_stationarity_sum, reevaluate_record,
    IterationRecord, SolveResult, SolverConfig,
};
use lama::tomo::{self, Geometry, ViewSelector};
use lama::{Image, Result, Sinogram};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Relative error bound of the adjoint inner-product identity.
pub const ADJOINT_TOL: f64 = 1e-12;
/// Relative error bound of central differences against analytic gradients.
pub const GRADIENT_TOL: f64 = 1e-6;
/// Absolute error bound of the identity-net Huber reduction.
pub const HUBER_TOL: f64 = 1e-12;
/// Allowed rise of `Φ_ε` within a fixed-ε segment.
pub const DESCENT_TOL: f64 = 1e-10;
/// Central-difference step relative to `1 + max|y|`. Truncation and knee
/// crossings dominate above it, roundoff below.
pub const FD_STEP: f64 = 1e-6;
/// Smoothing levels the gradient checks cycle through.
pub const GRADIENT_EPS: [f64; 3] = [1.0, 0.1, 0.01];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        }
    }

    pub fn skipped(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Skip,
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// `⟨Ax, z⟩ = ⟨x, Aᵀz⟩` on `pairs` Gaussian pairs. With `corrupt` set the
/// back-projection is scaled by `1 + 1e-6`, which the check must catch.
pub fn adjoint_check(geo: &Geometry, pairs: usize, seed: u64, corrupt: bool) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, _) = geo.image_shape();
    let (v, d) = geo.sinogram_shape();
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x = Image::new(gaussian(&mut rng, n, n));
        let z = Sinogram::new(gaussian(&mut rng, v, d));
        let mut back = tomo::backproject(&z, geo)?;
        if corrupt {
            back = back.scaled(1.0 + 1e-6);
        }
        let lhs = tomo::project(&x, geo)?.dot(&z);
        let rhs = x.dot(&back);
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    Ok(CheckOutcome::new(
        "adjoint",
        worst < ADJOINT_TOL,
        format!(
            "max relative error {worst:.2e} over {pairs} pairs at {n}x{n}, {v} views, {d} detectors (bound {ADJOINT_TOL:e})"
        ),
    ))
}

/// `‖fd − g‖/‖g‖` for central differences of `value` around `y`.
fn fd_relative_error(y: &Array2<f64>, g: &Array2<f64>, value: impl Fn(&Array2<f64>) -> Result<f64>) -> Result<f64> {
    let h = FD_STEP * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut fd = Array2::zeros(y.raw_dim());
    let mut probe = y.clone();
    for idx in 0..y.len() {
        let at = (idx / y.ncols(), idx % y.ncols());
        probe[at] = y[at] + h;
        let up = value(&probe)?;
        probe[at] = y[at] - h;
        let down = value(&probe)?;
        probe[at] = y[at];
        fd[at] = (up - down) / (2.0 * h);
    }
    let diff = (&fd - g).mapv(|v| v * v).sum().sqrt();
    Ok(diff / g.mapv(|v| v * v).sum().sqrt())
}

/// Two `3×3` layers of widths 4 and 3.
fn random_net(seed: u64) -> Result<RegularizerNet> {
    RegularizerNet::random(&[4, 3], 3, DEFAULT_ACTIVATION_KNEE, seed)
}

/// Random `8×8` problem with 12 views (4 measured) and 2-layer regularizers.
fn random_problem(rng: &mut ChaCha8Rng) -> Result<(Problem, Image, Sinogram)> {
    let geo = Geometry::standard(8, 12)?;
    let sel = ViewSelector::new(3, 0, 12)?;
    let d = geo.n_detectors;
    let measured = Sinogram::new(gaussian(rng, 4, d));
    let x = Image::new(gaussian(rng, 8, 8));
    let z = Sinogram::new(gaussian(rng, 12, d));
    let lambda = rng.gen_range(0.5..2.0);
    let p = Problem::new(geo, sel, measured, lambda, random_net(rng.gen())?, random_net(rng.gen())?)?;
    Ok((p, x, z))
}

fn gradient_outcome(name: &str, errors: &[f64]) -> CheckOutcome {
    let worst = errors.iter().copied().fold(0.0, f64::max);
    CheckOutcome::new(
        name,
        worst < GRADIENT_TOL,
        format!(
            "max relative error {worst:.2e} over {} instances, eps in {GRADIENT_EPS:?} (bound {GRADIENT_TOL:e})",
            errors.len()
        ),
    )
}

/// Central differences against `smoothed_gradient`, `grad_f_x`, `grad_f_z`
/// and `grad_phi_eps` on `instances` random `8×8` inputs each.
pub fn gradient_checks(instances: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reg = Vec::new();
    let (mut fx, mut fz, mut phi) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..instances {
        let eps = GRADIENT_EPS[i % GRADIENT_EPS.len()];

        let net = random_net(rng.gen())?;
        let y = gaussian(&mut rng, 8, 8);
        let g = smoothed_gradient(&net, &y.view(), eps)?;
        reg.push(fd_relative_error(&y, &g, |v| smoothed_value(&net, &v.view(), eps))?);

        let (p, x, z) = random_problem(&mut rng)?;
        let image = |v: &Array2<f64>| Image::new(v.clone());
        let sino = |v: &Array2<f64>| Sinogram::new(v.clone());
        fx.push(fd_relative_error(&x.data, &grad_f_x(&p, &x, &z)?.data, |v| f_value(&p, &image(v), &z))?);
        fz.push(fd_relative_error(&z.data, &grad_f_z(&p, &x, &z)?.data, |v| f_value(&p, &x, &sino(v)))?);

        let it = Iterate::new(x.clone(), z.clone(), eps)?;
        let (gx, gz) = grad_phi_eps(&p, &it)?;
        let ex = fd_relative_error(&x.data, &gx.data, |v| phi_eps_value(&p, &Iterate::new(image(v), z.clone(), eps)?))?;
        let ez = fd_relative_error(&z.data, &gz.data, |v| phi_eps_value(&p, &Iterate::new(x.clone(), sino(v), eps)?))?;
        phi.push(ex.max(ez));
    }
    Ok(vec![
        gradient_outcome("gradient smoothed_gradient", &reg),
        gradient_outcome("gradient grad_f_x", &fx),
        gradient_outcome("gradient grad_f_z", &fz),
        gradient_outcome("gradient grad_phi_eps", &phi),
    ])
}

fn huber(t: f64, eps: f64) -> f64 {
    if t.abs() <= eps {
        t * t / (2.0 * eps)
    } else {
        t.abs() - eps / 2.0
    }
}

/// A single `1×1` identity layer turns the smoothed regularizer into the
/// pixelwise Huber sum.
pub fn huber_check(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = RegularizerNet::identity();
    let mut worst = 0.0f64;
    for i in 0..instances {
        let eps = GRADIENT_EPS[i % GRADIENT_EPS.len()];
        let y = gaussian(&mut rng, 8, 8).mapv(|v| 0.5 * v);
        let expected: f64 = y.iter().map(|&t| huber(t, eps)).sum();
        worst = worst.max((smoothed_value(&net, &y.view(), eps)? - expected).abs());
    }
    Ok(CheckOutcome::new(
        "huber reduction",
        worst < HUBER_TOL,
        format!("max absolute error {worst:.2e} over {instances} inputs (bound {HUBER_TOL:e})"),
    ))
}

/// Largest backtrack count minus the bound derived from `L̂_ε`; the check
/// passes when this never exceeds zero.
pub fn backtrack_check(trace: &[IterationRecord], cfg: &SolverConfig, smoothness: &Smoothness) -> CheckOutcome {
    let mut worst: Option<(usize, usize, usize)> = None;
    for r in trace {
        let bound = cfg.backtrack_bound(smoothness.bound(r.eps));
        let excess = r.backtracks as i64 - bound as i64;
        if worst.is_none_or(|(_, b, l)| excess > b as i64 - l as i64) {
            worst = Some((r.k, r.backtracks, bound));
        }
    }
    match worst {
        None => CheckOutcome::new("line-search bound", true, "empty trace"),
        Some((k, used, bound)) => {
            let max_used = trace.iter().map(|r| r.backtracks).max().unwrap_or(0);
            CheckOutcome::new(
                "line-search bound",
                used <= bound,
                format!("max backtracks {max_used}; tightest at iteration {k}: {used} vs bound {bound}"),
            )
        }
    }
}

/// Records recomputed from the stored iterates, or `None` when the solve
/// did not keep them.
pub fn reevaluated_trace(p: &Problem, result: &SolveResult) -> Result<Option<Vec<IterationRecord>>> {
    if result.iterates.len() != result.trace.len() + 1 {
        return Ok(None);
    }
    result
        .trace
        .iter()
        .enumerate()
        .map(|(i, rec)| reevaluate_record(p, rec, &result.iterates[i], &result.iterates[i + 1]))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn certificate_outcome(name: &str, verdict: std::result::Result<(), lama::solver::CertificateViolation>, n: usize) -> CheckOutcome {
    match verdict {
        Ok(()) => CheckOutcome::new(name, true, format!("{n} iterations")),
        Err(v) => CheckOutcome::new(name, false, v.to_string()),
    }
}

/// Branch inequalities, fixed-ε descent, the ε rule, the summed stationarity
/// bound and the backtrack bound on a finished solve. When the iterates were
/// kept, the branch inequalities are also checked on records recomputed from
/// them.
pub fn solve_checks(p: &Problem, cfg: &SolverConfig, result: &SolveResult, smoothness: &Smoothness) -> Result<Vec<CheckOutcome>> {
    let trace = &result.trace;
    let n = trace.len();
    let candidates = trace.iter().filter(|r| r.branch == lama::solver::Branch::CandidateAccepted).count();
    let mut out = vec![
        CheckOutcome::new(
            "solver run",
            true,
            format!("{n} iterations ({candidates} candidate, {} safeguard), stopped by {}", n - candidates, result.termination),
        ),
        certificate_outcome("branch certificates", check_branch_certificates(trace, cfg), n),
        certificate_outcome(
            &format!("fixed-eps descent (tol {DESCENT_TOL:e})"),
            check_fixed_eps_descent(trace, DESCENT_TOL),
            n,
        ),
        certificate_outcome("eps schedule", check_eps_schedule(trace, cfg), n),
        certificate_outcome(
            "summed stationarity",
            check_stationarity_sum(trace, cfg, |eps| smoothness.bound(eps)),
            n,
        ),
        backtrack_check(trace, cfg, smoothness),
    ];
    out.push(match reevaluated_trace(p, result)? {
        None => CheckOutcome::skipped("re-evaluated certificates", "iterates were not kept for this solve"),
        Some(again) => {
            let drift = trace
                .iter()
                .zip(&again)
                .map(|(a, b)| {
                    let rel = |u: f64, v: f64| (u - v).abs() / u.abs().max(v.abs()).max(f64::MIN_POSITIVE);
                    rel(a.phi, b.phi).max(rel(a.phi_prev, b.phi_prev)).max(rel(a.grad_norm, b.grad_norm))
                })
                .fold(0.0, f64::max);
            match check_branch_certificates(&again, cfg).and_then(|_| check_fixed_eps_descent(&again, DESCENT_TOL)) {
                Ok(()) => CheckOutcome::new(
                    "re-evaluated certificates",
                    true,
                    format!("{n} iterations recomputed from iterates, max drift from trace {drift:.1e}"),
                ),
                Err(v) => CheckOutcome::new("re-evaluated certificates", false, v.to_string()),
            }
        }
    });
    Ok(out)
}
