//! Convolutional feature extractors and the smoothed `L2,1` regularizer.
//!
//! A [`RegularizerNet`] maps a single-channel array `y` (image or sinogram)
//! to a feature stack `g(y)` with `d` channels at every spatial position. The
//! regularizer is `‖g(y)‖₂,₁`, the sum over positions of the Euclidean norm
//! across channels. Its smoothed version `r_ε` replaces each norm below `ε`
//! by the quadratic `‖g_i‖²/(2ε)` and shifts the rest by `ε/2`, which makes
//! it continuously differentiable with gradient `∇g(y)ᵀ h`.

mod activation;
mod conv;
mod lipschitz;
mod net;
mod smooth;

pub use activation::{activation, activation_derivative};
pub use conv::ConvLayer;
pub use lipschitz::{estimate_lipschitz, lipschitz_estimate, LipschitzEstimate};
pub use net::{
    feature_forward, jacobian_apply, jacobian_transpose_apply, FeatureStack, RegularizerNet,
    DEFAULT_ACTIVATION_KNEE,
};
pub use smooth::{l21_norm, smoothed_gradient, smoothed_value, smoothed_value_and_gradient};
