//! Post-hoc checks of a solver trace against the inequalities that drive
//! its branch decisions and convergence guarantees.

use std::fmt;

use crate::error::Result;
use crate::objective::{grad_phi_eps, phi_eps_value, stacked_norm, Iterate, Problem};
use crate::solver::{gradient_bounded, sufficient_decrease, Branch, IterationRecord, SolverConfig};
use crate::{Image, Sinogram};

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateViolation {
    pub k: usize,
    pub check: &'static str,
    pub detail: String,
}

impl fmt::Display for CertificateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "iteration {}: {} violated ({})", self.k, self.check, self.detail)
    }
}

fn violation(k: usize, check: &'static str, detail: String) -> CertificateViolation {
    CertificateViolation { k, check, detail }
}

/// Both candidate acceptance inequalities on the recorded quantities.
pub fn check_candidate_record(rec: &IterationRecord, eta: f64) -> Result<(), CertificateViolation> {
    if !sufficient_decrease(rec.phi, rec.phi_prev, eta, rec.dx, rec.dz) {
        return Err(violation(
            rec.k,
            "candidate sufficient decrease",
            format!("Φ change {:e} > −η·{:e}", rec.phi - rec.phi_prev, rec.dx * rec.dx + rec.dz * rec.dz),
        ));
    }
    if !gradient_bounded(rec.grad_norm_prev, eta, rec.dx, rec.dz) {
        return Err(violation(
            rec.k,
            "candidate gradient bound",
            format!("‖∇Φ‖ = {:e} > {:e}", rec.grad_norm_prev, (rec.dx + rec.dz) / eta),
        ));
    }
    Ok(())
}

/// Line-search sufficient decrease at the recorded steps, which must be
/// `(ᾱ₀ρ^ℓ, β̄₀ρ^ℓ)` for the recorded backtrack count `ℓ`.
pub fn check_safeguard_record(rec: &IterationRecord, cfg: &SolverConfig) -> Result<(), CertificateViolation> {
    let shrink = cfg.rho.powi(rec.backtracks as i32);
    let consistent = |recorded: f64, initial: f64| (recorded - initial * shrink).abs() <= 1e-12 * initial;
    if !consistent(rec.step_z, cfg.alpha_bar0) || !consistent(rec.step_x, cfg.beta_bar0) {
        return Err(violation(
            rec.k,
            "safeguard step sizes",
            format!("steps ({}, {}) after {} backtracks", rec.step_z, rec.step_x, rec.backtracks),
        ));
    }
    if rec.backtracks > cfg.max_backtracks {
        return Err(violation(rec.k, "safeguard backtrack limit", format!("{}", rec.backtracks)));
    }
    if !sufficient_decrease(rec.phi, rec.phi_prev, cfg.delta, rec.dx, rec.dz) {
        return Err(violation(
            rec.k,
            "safeguard sufficient decrease",
            format!("Φ change {:e} > −δ·{:e}", rec.phi - rec.phi_prev, rec.dx * rec.dx + rec.dz * rec.dz),
        ));
    }
    Ok(())
}

/// The branch-specific certificate of every record.
pub fn check_branch_certificates(trace: &[IterationRecord], cfg: &SolverConfig) -> Result<(), CertificateViolation> {
    trace.iter().try_for_each(|rec| match rec.branch {
        Branch::CandidateAccepted => check_candidate_record(rec, cfg.eta),
        Branch::Safeguard => check_safeguard_record(rec, cfg),
    })
}

/// `Φ_ε` never increases by more than `tol` while `ε` is fixed, and
/// consecutive records at the same `ε` chain exactly.
pub fn check_fixed_eps_descent(trace: &[IterationRecord], tol: f64) -> Result<(), CertificateViolation> {
    for (i, rec) in trace.iter().enumerate() {
        if rec.phi > rec.phi_prev + tol {
            return Err(violation(
                rec.k,
                "fixed-ε descent",
                format!("Φ rose from {:e} to {:e}", rec.phi_prev, rec.phi),
            ));
        }
        if let Some(next) = trace.get(i + 1) {
            if !rec.eps_reduced && next.phi_prev != rec.phi {
                return Err(violation(
                    next.k,
                    "fixed-ε continuity",
                    format!("Φ restarted at {:e} instead of {:e}", next.phi_prev, rec.phi),
                ));
            }
        }
    }
    Ok(())
}

/// `ε` is non-increasing, shrinks by exactly `γ` at reduction events, and a
/// reduction happens precisely when `‖∇Φ_{ε_k}(x_{k+1}, z_{k+1})‖ < σγε_k`.
pub fn check_eps_schedule(trace: &[IterationRecord], cfg: &SolverConfig) -> Result<(), CertificateViolation> {
    for (i, rec) in trace.iter().enumerate() {
        let threshold = cfg.sigma * cfg.gamma * rec.eps;
        let should_reduce = rec.grad_norm < threshold;
        if rec.eps_reduced != should_reduce {
            return Err(violation(
                rec.k,
                "ε reduction rule",
                format!("‖∇Φ‖ = {:e}, σγε = {:e}, reduced = {}", rec.grad_norm, threshold, rec.eps_reduced),
            ));
        }
        if let Some(next) = trace.get(i + 1) {
            let expected = if rec.eps_reduced { cfg.gamma * rec.eps } else { rec.eps };
            if next.eps != expected || next.eps > rec.eps {
                return Err(violation(
                    next.k,
                    "ε monotonicity",
                    format!("ε went from {:e} to {:e}", rec.eps, next.eps),
                ));
            }
        }
    }
    Ok(())
}

/// `(ε_k, ‖∇Φ_{ε_k}(x_{k+1}, z_{k+1})‖)` at every reduction event.
pub fn reduction_residuals(trace: &[IterationRecord]) -> Vec<(f64, f64)> {
    trace
        .iter()
        .filter(|r| r.eps_reduced)
        .map(|r| (r.eps, r.grad_norm))
        .collect()
}

/// Summed stationarity bound on every fixed-ε segment:
/// `Σ_k ‖∇Φ_ε(x_k, z_k)‖² ≤ C·(Φ_ε(x_start) − min Φ_ε)` with
/// `C = max(2/η³, (2/t² + 2L_ε²)/δ)`, where `t` is the smallest safeguard
/// step used in the segment and `L_ε = lipschitz(ε)`.
pub fn check_stationarity_sum(
    trace: &[IterationRecord],
    cfg: &SolverConfig,
    lipschitz: impl Fn(f64) -> f64,
) -> Result<(), CertificateViolation> {
    let mut start = 0;
    while start < trace.len() {
        let eps = trace[start].eps;
        let end = trace[start..]
            .iter()
            .position(|r| r.eps != eps)
            .map_or(trace.len(), |offset| start + offset);
        let segment = &trace[start..end];
        let min_step = segment
            .iter()
            .filter(|r| r.branch == Branch::Safeguard)
            .map(|r| r.step_z.min(r.step_x))
            .fold(f64::INFINITY, f64::min);
        let l = lipschitz(eps);
        let safeguard_c = if min_step.is_finite() {
            (2.0 / (min_step * min_step) + 2.0 * l * l) / cfg.delta
        } else {
            0.0
        };
        let c = (2.0 / cfg.eta.powi(3)).max(safeguard_c);
        let sum: f64 = segment.iter().map(|r| r.grad_norm_prev * r.grad_norm_prev).sum();
        let min_phi = segment.iter().map(|r| r.phi).fold(segment[0].phi_prev, f64::min);
        let budget = c * (segment[0].phi_prev - min_phi);
        if sum > budget * (1.0 + 1e-12) + 1e-300 {
            return Err(violation(
                segment[0].k,
                "summed stationarity bound",
                format!("Σ‖∇Φ‖² = {sum:e} > C·ΔΦ = {budget:e} (ε = {eps:e})"),
            ));
        }
        start = end;
    }
    Ok(())
}

/// Recomputes a record's objective values, gradient norms and displacements
/// from the stored iterates before and after the step.
pub fn reevaluate_record(
    p: &Problem,
    rec: &IterationRecord,
    before: &(Image, Sinogram),
    after: &(Image, Sinogram),
) -> Result<IterationRecord> {
    let old = Iterate::new(before.0.clone(), before.1.clone(), rec.eps)?;
    let new = Iterate::new(after.0.clone(), after.1.clone(), rec.eps)?;
    let (gx_old, gz_old) = grad_phi_eps(p, &old)?;
    let (gx_new, gz_new) = grad_phi_eps(p, &new)?;
    Ok(IterationRecord {
        phi_prev: phi_eps_value(p, &old)?,
        phi: phi_eps_value(p, &new)?,
        grad_norm_prev: stacked_norm(&gx_old, &gz_old),
        grad_norm: stacked_norm(&gx_new, &gz_new),
        dx: after.0.distance(&before.0),
        dz: after.1.distance(&before.1),
        ..*rec
    })
}
