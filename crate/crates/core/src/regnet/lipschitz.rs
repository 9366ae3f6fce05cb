//! Empirical Lipschitz constant of `∇r_ε`: `√m·L_g + M²/ε`, with `M` the
//! largest `‖∇g(y)‖₂` seen at sampled points (power iteration on `∇gᵀ∇g`)
//! and `L_g` the largest sampled secant quotient of `∇g`. Not certified.

use ndarray::{Array3, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::regnet::net::random_array;
use crate::regnet::{FeatureStack, RegularizerNet};
use crate::spectral::power_iteration;

const PROBE_SEED: u64 = 0x6c69_7073;
const POWER_ITERATIONS: usize = 200;
const SECANT_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzEstimate {
    /// `M̂ ≈ sup ‖∇g(y)‖₂`
    pub jacobian_norm: f64,
    /// `L̂_g`, Lipschitz constant of `∇g`; zero for single-layer nets.
    pub jacobian_lipschitz: f64,
    /// Number of spatial positions `m`.
    pub positions: usize,
}

impl LipschitzEstimate {
    pub fn bound(&self, eps: f64) -> f64 {
        (self.positions as f64).sqrt() * self.jacobian_lipschitz + self.jacobian_norm.powi(2) / eps
    }
}

fn jacobian_norm_at(net: &RegularizerNet, y: &ArrayView2<f64>, rng: &mut ChaCha8Rng) -> Result<f64> {
    let tape = net.forward_tape(y)?;
    let (h, w) = y.dim();
    let mut failure = None;
    let top = power_iteration(&[h, w], POWER_ITERATIONS, rng, |v| {
        let v2 = v.view().into_dimensionality().expect("rank 2");
        let result = net
            .tangent(&tape, &v2)
            .and_then(|jv| net.backward(&tape, &FeatureStack { data: jv }));
        match result {
            Ok(out) => out.into_dyn(),
            Err(e) => {
                failure = Some(e);
                v.clone()
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(top.sqrt()),
    }
}

/// Samples `probes` points of the given spatial shape from `[-1, 1]`.
pub fn lipschitz_estimate(net: &RegularizerNet, shape: (usize, usize), probes: usize) -> Result<LipschitzEstimate> {
    if probes == 0 {
        return Err(Error::invalid("need at least one probe"));
    }
    let positions = shape.0 * shape.1;
    if net.is_zero() {
        return Ok(LipschitzEstimate {
            jacobian_norm: 0.0,
            jacobian_lipschitz: 0.0,
            positions,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    // ∇g is constant for a single convolution, so one point is exact.
    let point_count = if net.is_linear() { 1 } else { probes };
    let mut jacobian_norm = 0.0f64;
    for _ in 0..point_count {
        let y = random_array(shape, 1.0, &mut rng);
        jacobian_norm = jacobian_norm.max(jacobian_norm_at(net, &y.view(), &mut rng)?);
    }

    let mut jacobian_lipschitz = 0.0f64;
    if !net.is_linear() {
        let channels = net.output_channels();
        for _ in 0..probes {
            let y1 = random_array(shape, 1.0, &mut rng);
            let step = random_array(shape, SECANT_STEP, &mut rng);
            let y2 = &y1 + &step;
            let mut w = Array3::from_shape_fn((channels, shape.0, shape.1), |_| rng.gen_range(-1.0..1.0));
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            w /= norm;
            let w = FeatureStack { data: w };
            let g1 = net.backward(&net.forward_tape(&y1.view())?, &w)?;
            let g2 = net.backward(&net.forward_tape(&y2.view())?, &w)?;
            let diff = (&g1 - &g2).iter().map(|v| v * v).sum::<f64>().sqrt();
            let dist = step.iter().map(|v| v * v).sum::<f64>().sqrt();
            jacobian_lipschitz = jacobian_lipschitz.max(diff / dist);
        }
    }
    Ok(LipschitzEstimate {
        jacobian_norm,
        jacobian_lipschitz,
        positions,
    })
}

/// `L̂_ε` for inputs of the given spatial shape.
pub fn estimate_lipschitz(net: &RegularizerNet, shape: (usize, usize), eps: f64, probes: usize) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(format!("smoothing level must be positive, got {eps}")));
    }
    Ok(lipschitz_estimate(net, shape, probes)?.bound(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regnet::smoothed_gradient;

    #[test]
    fn identity_bound_is_inverse_eps() {
        for eps in [1.0, 0.1, 1e-3] {
            let l = estimate_lipschitz(&RegularizerNet::identity(), (6, 5), eps, 4).unwrap();
            assert!((l * eps - 1.0).abs() < 1e-12, "{l}");
        }
    }

    #[test]
    fn halving_eps_at_most_doubles_the_bound() {
        let net = RegularizerNet::random(&[4, 4], 3, 0.05, 5).unwrap();
        let est = lipschitz_estimate(&net, (8, 8), 4).unwrap();
        assert!(est.jacobian_lipschitz > 0.0);
        for eps in [1.0, 0.1, 0.01] {
            assert!(est.bound(eps / 2.0) <= 2.0 * est.bound(eps));
            assert!(est.bound(eps / 2.0) > est.bound(eps));
        }
        assert_eq!(
            estimate_lipschitz(&net, (8, 8), 0.1, 4).unwrap(),
            estimate_lipschitz(&net, (8, 8), 0.1, 4).unwrap()
        );
    }

    #[test]
    fn tv_norm_is_close_to_sqrt_eight() {
        let est = lipschitz_estimate(&RegularizerNet::tv_like(1.0), (32, 32), 1).unwrap();
        assert_eq!(est.jacobian_lipschitz, 0.0);
        assert!(est.jacobian_norm > 2.7 && est.jacobian_norm <= 8f64.sqrt() + 1e-12);
    }

    #[test]
    fn random_pairs_respect_the_bound() {
        let net = RegularizerNet::random(&[4, 3], 3, 0.05, 13).unwrap();
        let shape = (6, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for eps in [1.0, 0.1, 0.01] {
            let bound = estimate_lipschitz(&net, shape, eps, 8).unwrap();
            for _ in 0..1000 {
                let y1 = random_array(shape, 1.0, &mut rng);
                let y2 = &y1 + &random_array(shape, 0.05, &mut rng);
                let g1 = smoothed_gradient(&net, &y1.view(), eps).unwrap();
                let g2 = smoothed_gradient(&net, &y2.view(), eps).unwrap();
                let lhs = (&g1 - &g2).iter().map(|v| v * v).sum::<f64>().sqrt();
                let dist = (&y1 - &y2).iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(lhs <= bound * dist, "eps {eps}: {lhs} > {bound} * {dist}");
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(estimate_lipschitz(&RegularizerNet::identity(), (2, 2), 0.0, 1).is_err());
        assert!(estimate_lipschitz(&RegularizerNet::identity(), (2, 2), 1.0, 0).is_err());
    }
}
