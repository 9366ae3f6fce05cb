//! Safeguarded linearized alternating minimization.
//!
//! Every outer iteration builds a cheap candidate by one linearized proximal
//! alternating step (z-block first, then x-block using the new z). The
//! candidate is kept only if it both decreases `Φ_ε` sufficiently and moves
//! at least proportionally to the current gradient; otherwise a plain
//! block-coordinate gradient step with backtracking is taken. The smoothing
//! level `ε` shrinks by `γ` whenever the gradient at the new iterate falls
//! below `σγε`.

mod certificates;
mod config;

pub use certificates::{
    check_branch_certificates, check_candidate_record, check_eps_schedule, check_fixed_eps_descent,
    check_safeguard_record, check_stationarity_sum, reduction_residuals, reevaluate_record,
    CertificateViolation,
};
pub use config::SolverConfig;

use std::fmt;

use crate::error::{Error, Result};
use crate::metrics;
use crate::objective::{stacked_norm, Iterate, Problem};
use crate::regnet;
use crate::tomo;
use crate::{Image, Sinogram};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    CandidateAccepted,
    Safeguard,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::CandidateAccepted => "candidate",
            Branch::Safeguard => "safeguard",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    EpsTolReached,
    MaxIters,
    Stationary,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::EpsTolReached => "eps_tol",
            Termination::MaxIters => "max_iters",
            Termination::Stationary => "stationary",
        })
    }
}

/// One outer iteration `k → k+1`. All objective values use `ε = eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub branch: Branch,
    pub backtracks: usize,
    /// Safeguard step on `z` (`ᾱρ^ℓ`); zero for accepted candidates.
    pub step_z: f64,
    /// Safeguard step on `x` (`β̄ρ^ℓ`); zero for accepted candidates.
    pub step_x: f64,
    /// `ε_k`
    pub eps: f64,
    /// `Φ_{ε_k}(x_k, z_k)`
    pub phi_prev: f64,
    /// `Φ_{ε_k}(x_{k+1}, z_{k+1})`
    pub phi: f64,
    /// `‖∇Φ_{ε_k}(x_k, z_k)‖`
    pub grad_norm_prev: f64,
    /// `‖∇Φ_{ε_k}(x_{k+1}, z_{k+1})‖`
    pub grad_norm: f64,
    pub eps_reduced: bool,
    /// `‖x_{k+1} − x_k‖`
    pub dx: f64,
    /// `‖z_{k+1} − z_k‖`
    pub dz: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Final `(x, z)` together with the smoothing level in effect after the
    /// last update.
    pub iterate: Iterate,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    /// `(x_k, z_k)` for `k = 0..=K` when `record_iterates` is set.
    pub iterates: Vec<(Image, Sinogram)>,
}

#[derive(Clone, Debug)]
pub struct LineSearchOutcome {
    pub x: Image,
    pub z: Sinogram,
    pub backtracks: usize,
    pub step_z: f64,
    pub step_x: f64,
}

/// Current iterate with everything the next step reuses.
struct State {
    x: Image,
    z: Sinogram,
    eps: f64,
    projection: Sinogram,
    phi: f64,
    grad_x: Image,
    grad_z: Sinogram,
}

impl State {
    fn new(p: &Problem, x: Image, z: Sinogram, eps: f64) -> Result<Self> {
        let eval = p.evaluate(&x, &z, eps)?;
        if !eval.phi.is_finite() {
            return Err(Error::NumericalFailure(format!("objective is {} at the iterate", eval.phi)));
        }
        let (grad_x, grad_z) = p.gradient(&x, &z, &eval.projection, eps)?;
        Ok(Self {
            x,
            z,
            eps,
            projection: eval.projection,
            phi: eval.phi,
            grad_x,
            grad_z,
        })
    }

    fn grad_norm(&self) -> f64 {
        stacked_norm(&self.grad_x, &self.grad_z)
    }
}

fn candidate_from(p: &Problem, x: &Image, z: &Sinogram, projection: &Sinogram, eps: f64, cfg: &SolverConfig) -> Result<(Image, Sinogram)> {
    // b = z − α∇_z f(x, z);  u_z = b − α̂∇Q_ε(b)
    let lifted = tomo::embed(&tomo::select(z, &p.selector)?.add_scaled(-1.0, &p.measured), &p.selector)?;
    let grad_fz = z.add_scaled(-1.0, projection).add_scaled(p.lambda, &lifted);
    let b = z.add_scaled(-cfg.alpha, &grad_fz);
    let u_z = Sinogram::new(&b.data - &(regnet::smoothed_gradient(&p.reg_z, &b.data.view(), eps)? * cfg.alpha_hat));
    // c = x − β∇_x f(x, u_z);  u_x = c − β̂∇R_ε(c)
    let grad_fx = tomo::backproject(&projection.add_scaled(-1.0, &u_z), &p.geometry)?;
    let c = x.add_scaled(-cfg.beta, &grad_fx);
    let u_x = Image::new(&c.data - &(regnet::smoothed_gradient(&p.reg_x, &c.data.view(), eps)? * cfg.beta_hat));
    Ok((u_x, u_z))
}

/// `v_z = z − ᾱ∇_zΦ_ε(x, z)`, `v_x = x − β̄(∇_x f(x, v_z) + ∇R_ε(x))`.
fn bcd_from(p: &Problem, state: &State, grad_reg_x: &Image, step_z: f64, step_x: f64) -> Result<(Image, Sinogram)> {
    let v_z = state.z.add_scaled(-step_z, &state.grad_z);
    let grad_fx = tomo::backproject(&state.projection.add_scaled(-1.0, &v_z), &p.geometry)?;
    let v_x = state.x.add_scaled(-step_x, &grad_fx.add_scaled(1.0, grad_reg_x));
    Ok((v_x, v_z))
}

/// Sufficient decrease `Φ(new) − Φ(old) ≤ −c·(dx² + dz²)`; ties accept.
fn sufficient_decrease(phi_new: f64, phi_old: f64, c: f64, dx: f64, dz: f64) -> bool {
    phi_new - phi_old <= -c * (dx * dx + dz * dz)
}

/// `‖∇Φ_ε(x, z)‖ ≤ (dx + dz)/η`; ties accept.
fn gradient_bounded(grad_norm: f64, eta: f64, dx: f64, dz: f64) -> bool {
    grad_norm <= (dx + dz) / eta
}

/// Candidate `(u_x, u_z)` from one linearized proximal alternating step at
/// `(it.x, it.z)` with smoothing `it.eps`.
pub fn palm_candidate(p: &Problem, it: &Iterate, cfg: &SolverConfig) -> Result<(Image, Sinogram)> {
    p.geometry.check_image(&it.x, "palm_candidate")?;
    p.geometry.check_sinogram(&it.z, "palm_candidate")?;
    let projection = tomo::project(&it.x, &p.geometry)?;
    candidate_from(p, &it.x, &it.z, &projection, it.eps, cfg)
}

/// Whether the candidate passes both the sufficient-decrease and the
/// gradient-bounded-by-displacement tests at smoothing `it.eps`.
pub fn safeguard_check(p: &Problem, it: &Iterate, u_x: &Image, u_z: &Sinogram, eta: f64) -> Result<bool> {
    let current = State::new(p, it.x.clone(), it.z.clone(), it.eps)?;
    let phi_u = p.evaluate(u_x, u_z, it.eps)?.phi;
    let (dx, dz) = (u_x.distance(&it.x), u_z.distance(&it.z));
    Ok(sufficient_decrease(phi_u, current.phi, eta, dx, dz) && gradient_bounded(current.grad_norm(), eta, dx, dz))
}

/// One block-coordinate gradient step with steps `ᾱ` (z) and `β̄` (x).
pub fn bcd_step(p: &Problem, it: &Iterate, alpha_bar: f64, beta_bar: f64) -> Result<(Image, Sinogram)> {
    let state = State::new(p, it.x.clone(), it.z.clone(), it.eps)?;
    let grad_reg_x = Image::new(regnet::smoothed_gradient(&p.reg_x, &it.x.data.view(), it.eps)?);
    bcd_from(p, &state, &grad_reg_x, alpha_bar, beta_bar)
}

fn line_search_from(p: &Problem, state: &State, cfg: &SolverConfig, iteration: usize, trace: &[IterationRecord]) -> Result<(LineSearchOutcome, Sinogram, f64)> {
    let grad_reg_x = Image::new(regnet::smoothed_gradient(&p.reg_x, &state.x.data.view(), state.eps)?);
    let (mut step_z, mut step_x) = (cfg.alpha_bar0, cfg.beta_bar0);
    for backtracks in 0..=cfg.max_backtracks {
        let (v_x, v_z) = bcd_from(p, state, &grad_reg_x, step_z, step_x)?;
        let eval = p.evaluate(&v_x, &v_z, state.eps)?;
        let (dx, dz) = (v_x.distance(&state.x), v_z.distance(&state.z));
        if sufficient_decrease(eval.phi, state.phi, cfg.delta, dx, dz) {
            let outcome = LineSearchOutcome {
                x: v_x,
                z: v_z,
                backtracks,
                step_z,
                step_x,
            };
            return Ok((outcome, eval.projection, eval.phi));
        }
        step_z *= cfg.rho;
        step_x *= cfg.rho;
    }
    Err(Error::LineSearchFailure {
        iteration,
        backtracks: cfg.max_backtracks,
        trace: trace.to_vec(),
    })
}

/// Backtracking block-coordinate step from `(ᾱ₀, β̄₀)` until the sufficient
/// decrease condition with constant `δ` holds.
pub fn line_search(p: &Problem, it: &Iterate, cfg: &SolverConfig) -> Result<LineSearchOutcome> {
    let state = State::new(p, it.x.clone(), it.z.clone(), it.eps)?;
    Ok(line_search_from(p, &state, cfg, 0, &[])?.0)
}

/// `γε` if `grad_norm < σγε`, else `ε`.
pub fn eps_update(grad_norm: f64, eps: f64, sigma: f64, gamma: f64) -> f64 {
    if grad_norm < sigma * gamma * eps {
        gamma * eps
    } else {
        eps
    }
}

pub fn lama_solve(p: &Problem, x0: Image, z0: Sinogram, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    p.geometry.check_image(&x0, "lama_solve")?;
    p.geometry.check_sinogram(&z0, "lama_solve")?;

    let mut state = State::new(p, x0, z0, cfg.eps0)?;
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    if cfg.record_iterates {
        iterates.push((state.x.clone(), state.z.clone()));
    }
    let finish = |state: State, trace, iterates, termination| -> Result<SolveResult> {
        Ok(SolveResult {
            iterate: Iterate::new(state.x, state.z, state.eps)?,
            trace,
            termination,
            iterates,
        })
    };

    if state.grad_norm() <= cfg.stationary_tol {
        return finish(state, trace, iterates, Termination::Stationary);
    }
    if state.eps <= cfg.eps_tol {
        return finish(state, trace, iterates, Termination::EpsTolReached);
    }

    for k in 0..cfg.max_iters {
        let eps = state.eps;
        let grad_norm_prev = state.grad_norm();
        let (u_x, u_z) = candidate_from(p, &state.x, &state.z, &state.projection, eps, cfg)?;
        let candidate = p.evaluate(&u_x, &u_z, eps)?;
        let (dx, dz) = (u_x.distance(&state.x), u_z.distance(&state.z));
        let accepted = sufficient_decrease(candidate.phi, state.phi, cfg.eta, dx, dz)
            && gradient_bounded(grad_norm_prev, cfg.eta, dx, dz);

        let (branch, x, z, projection, phi, backtracks, step_z, step_x) = if accepted {
            (Branch::CandidateAccepted, u_x, u_z, candidate.projection, candidate.phi, 0, 0.0, 0.0)
        } else {
            let (outcome, projection, phi) = line_search_from(p, &state, cfg, k, &trace)?;
            (
                Branch::Safeguard,
                outcome.x,
                outcome.z,
                projection,
                phi,
                outcome.backtracks,
                outcome.step_z,
                outcome.step_x,
            )
        };
        if !phi.is_finite() {
            return Err(Error::NumericalFailure(format!("objective became {phi} at iteration {k}")));
        }
        let (dx, dz) = (x.distance(&state.x), z.distance(&state.z));
        let (grad_x, grad_z) = p.gradient(&x, &z, &projection, eps)?;
        let grad_norm = stacked_norm(&grad_x, &grad_z);
        let next_eps = eps_update(grad_norm, eps, cfg.sigma, cfg.gamma);

        trace.push(IterationRecord {
            k,
            branch,
            backtracks,
            step_z,
            step_x,
            eps,
            phi_prev: state.phi,
            phi,
            grad_norm_prev,
            grad_norm,
            eps_reduced: next_eps < eps,
            dx,
            dz,
        });
        if cfg.record_iterates {
            iterates.push((x.clone(), z.clone()));
        }

        state = if next_eps < eps {
            State::new(p, x, z, next_eps)?
        } else {
            State {
                x,
                z,
                eps,
                projection,
                phi,
                grad_x,
                grad_z,
            }
        };

        if next_eps <= cfg.eps_tol {
            return finish(state, trace, iterates, Termination::EpsTolReached);
        }
        if grad_norm <= cfg.stationary_tol {
            return finish(state, trace, iterates, Termination::Stationary);
        }
    }
    finish(state, trace, iterates, Termination::MaxIters)
}

/// `‖x_K − x̂‖² + ‖z_K − Ax̂‖² + μ(1 − SSIM(x_K, x̂))`, with the SSIM range
/// taken from `ground_truth`.
pub fn loss_report(p: &Problem, result: &SolveResult, ground_truth: &Image, mu: f64) -> Result<f64> {
    let reference = tomo::project(ground_truth, &p.geometry)?;
    let image_term = result.iterate.x.distance(ground_truth).powi(2);
    let sino_term = result.iterate.z.distance(&reference).powi(2);
    let structural = if mu == 0.0 {
        0.0
    } else {
        let range = metrics::data_range(ground_truth);
        let range = if range > 0.0 { range } else { 1.0 };
        mu * (1.0 - metrics::ssim(&result.iterate.x, ground_truth, range)?)
    };
    Ok(image_term + sino_term + structural)
}

/// Default weight of the SSIM term in [`loss_report`].
pub const DEFAULT_SSIM_WEIGHT: f64 = 0.01;

#[cfg(test)]
mod tests;
