use ndarray::{Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::regnet::{FeatureStack, RegularizerNet};

/// `Σ_i ‖g_i‖₂` over spatial positions.
pub fn l21_norm(fs: &FeatureStack) -> f64 {
    fs.position_norms().sum()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(format!("smoothing level must be positive, got {eps}")));
    }
    Ok(())
}

/// Per-position contribution to `r_ε`. Ties `‖g_i‖ = ε` use the quadratic branch.
fn smoothed_term(norm: f64, eps: f64) -> f64 {
    if norm <= eps {
        norm * norm / (2.0 * eps)
    } else {
        norm - eps / 2.0
    }
}

pub fn smoothed_value(net: &RegularizerNet, y: &ArrayView2<f64>, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if net.is_zero() {
        return Ok(0.0);
    }
    let features = net.forward_tape(y)?.output;
    Ok(features.position_norms().iter().map(|&n| smoothed_term(n, eps)).sum())
}

pub fn smoothed_gradient(net: &RegularizerNet, y: &ArrayView2<f64>, eps: f64) -> Result<Array2<f64>> {
    Ok(smoothed_value_and_gradient(net, y, eps)?.1)
}

/// `r_ε(y)` and `∇r_ε(y) = ∇g(y)ᵀ h` with `h_i = g_i/ε` where `‖g_i‖ ≤ ε`
/// and `h_i = g_i/‖g_i‖` elsewhere, from a single forward pass.
pub fn smoothed_value_and_gradient(net: &RegularizerNet, y: &ArrayView2<f64>, eps: f64) -> Result<(f64, Array2<f64>)> {
    check_eps(eps)?;
    if net.is_zero() {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("regularizer input must be finite"));
        }
        return Ok((0.0, Array2::zeros(y.dim())));
    }
    let tape = net.forward_tape(y)?;
    let norms = tape.output.position_norms();
    let value = norms.iter().map(|&n| smoothed_term(n, eps)).sum();
    let scale = norms.mapv(|n| if n <= eps { 1.0 / eps } else { 1.0 / n });
    let mut weights = tape.output.data.clone();
    for mut channel in weights.axis_iter_mut(Axis(0)) {
        Zip::from(&mut channel).and(&scale).for_each(|g, &s| *g *= s);
    }
    let grad = net.backward(&tape, &FeatureStack { data: weights })?;
    Ok((value, grad))
}
