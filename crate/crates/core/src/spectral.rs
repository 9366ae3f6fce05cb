//! Power iteration for symmetric positive semidefinite operators.

use ndarray::{ArrayD, IxDyn};
use rand::Rng;

/// Largest eigenvalue of the PSD operator `apply` acting on arrays of `shape`.
pub(crate) fn power_iteration<R: Rng>(
    shape: &[usize],
    iterations: usize,
    rng: &mut R,
    mut apply: impl FnMut(&ArrayD<f64>) -> ArrayD<f64>,
) -> f64 {
    let mut v = ArrayD::from_shape_fn(IxDyn(shape), |_| rng.gen_range(-1.0..1.0));
    let mut norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let w = apply(&v);
        norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm;
        v = w / norm;
    }
    estimate
}
