//! C¹ smoothing of the ReLU with a quadratic knee of half-width `κ`:
//! `0` below `−κ`, `(t+κ)²/(4κ)` inside `(−κ, κ)` and `t` above `κ`.

pub fn activation(t: f64, knee: f64) -> f64 {
    if t <= -knee {
        0.0
    } else if t >= knee {
        t
    } else {
        (t + knee) * (t + knee) / (4.0 * knee)
    }
}

/// Derivative of [`activation`], with values in `[0, 1]`.
pub fn activation_derivative(t: f64, knee: f64) -> f64 {
    if t <= -knee {
        0.0
    } else if t >= knee {
        1.0
    } else {
        (t + knee) / (2.0 * knee)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuous_at_both_knees() {
        let k = 0.01;
        for t in [-k, k] {
            let below = activation(t - 1e-12, k);
            let above = activation(t + 1e-12, k);
            assert!((below - above).abs() < 1e-10);
            let d_below = activation_derivative(t - 1e-12, k);
            let d_above = activation_derivative(t + 1e-12, k);
            assert!((d_below - d_above).abs() < 1e-8);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let k = 0.05;
        for i in 0..41 {
            let t = -0.1 + i as f64 * 0.005 + 1e-4;
            let h = 1e-7;
            let fd = (activation(t + h, k) - activation(t - h, k)) / (2.0 * h);
            assert!((fd - activation_derivative(t, k)).abs() < 1e-6);
            assert!((0.0..=1.0).contains(&activation_derivative(t, k)));
        }
    }
}
