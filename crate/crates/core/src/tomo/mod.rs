//! Parallel-beam tomography: geometry, the discrete Radon transform and its
//! adjoint, view subsampling, filtered back-projection and phantoms.

mod fbp;
mod geometry;
mod phantom;
mod projector;
mod views;

pub use fbp::{fbp, FilterKind};
pub use geometry::Geometry;
pub use phantom::{disk_phantom, shepp_logan, Ellipse, MODIFIED_SHEPP_LOGAN};
pub use projector::{backproject, project};
pub use views::{embed, select, ViewSelector};
