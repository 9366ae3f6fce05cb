//! Dual-domain sparse-view CT reconstruction.
//!
//! The crate jointly estimates an image `x` and a full-view sinogram `z` from
//! a subsampled set of parallel-beam projections by minimizing
//!
//! ```text
//! Φ(x, z) = ½‖Ax − z‖² + (λ/2)‖P₀z − s‖² + ‖g_R(x)‖₂,₁ + ‖g_Q(z)‖₂,₁
//! ```
//!
//! where `g_R` and `g_Q` are convolutional feature extractors. The nonsmooth
//! `‖·‖₂,₁` terms are replaced by smoothed surrogates whose smoothing level is
//! driven to zero by the solver.
//!
//! Modules:
//! - [`tomo`]: Radon transform, its exact adjoint, view selection, FBP, phantoms.
//! - [`regnet`]: convolutional feature extractors and the smoothed regularizer.
//! - [`objective`]: data fidelity, objective values and gradients.
//! - [`solver`]: the safeguarded linearized alternating minimization loop.
//! - [`initnet`]: sparse-to-full sinogram initialization.
//! - [`metrics`]: PSNR, SSIM and sinogram RMSE.
//! - [`io`]: tensor container, PGM and CSV exports.

pub mod error;
pub mod initnet;
pub mod io;
pub mod metrics;
pub mod objective;
pub mod regnet;
pub mod solver;
pub mod tomo;

mod array;
mod spectral;

pub use array::{Image, Sinogram};
pub use error::{Error, Result};
