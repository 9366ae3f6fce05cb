//! Analytic phantoms sampled at pixel centers.

use crate::error::{Error, Result};
use crate::Image;

/// Ellipse in normalized coordinates `[-1, 1]²` (y pointing up).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Counter-clockwise rotation in degrees.
    pub angle_deg: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (sin, cos) = self.angle_deg.to_radians().sin_cos();
        let (dx, dy) = (x - self.center_x, y - self.center_y);
        let u = dx * cos + dy * sin;
        let v = -dx * sin + dy * cos;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }
}

const fn ellipse(intensity: f64, semi_x: f64, semi_y: f64, center_x: f64, center_y: f64, angle_deg: f64) -> Ellipse {
    Ellipse {
        intensity,
        semi_x,
        semi_y,
        center_x,
        center_y,
        angle_deg,
    }
}

/// The ten ellipses of the Shepp-Logan head phantom with the contrast-enhanced
/// (Toft) intensities, so that values stay in `[0, 1]`.
pub const MODIFIED_SHEPP_LOGAN: [Ellipse; 10] = [
    ellipse(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    ellipse(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    ellipse(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    ellipse(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    ellipse(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    ellipse(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    ellipse(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    ellipse(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    ellipse(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    ellipse(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

fn normalized_center(index: usize, n: usize) -> f64 {
    (index as f64 - (n as f64 - 1.0) / 2.0) / (n as f64 / 2.0)
}

fn rasterize(n: usize, ellipses: &[Ellipse]) -> Result<Image> {
    if n < 2 {
        return Err(Error::invalid(format!("phantom size must be >= 2, got {n}")));
    }
    let mut img = Image::zeros(n, n);
    for ((i, j), value) in img.data.indexed_iter_mut() {
        let x = normalized_center(j, n);
        let y = -normalized_center(i, n);
        let sum: f64 = ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity)
            .sum();
        *value = sum.clamp(0.0, 1.0);
    }
    Ok(img)
}

/// `n × n` Shepp-Logan phantom, clamped to `[0, 1]`.
pub fn shepp_logan(n: usize) -> Result<Image> {
    rasterize(n, &MODIFIED_SHEPP_LOGAN)
}

/// Centered disk of the given normalized radius and value.
pub fn disk_phantom(n: usize, radius: f64, value: f64) -> Result<Image> {
    if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
        return Err(Error::invalid("disk value must lie in [0, 1]"));
    }
    rasterize(n, &[ellipse(value, radius, radius, 0.0, 0.0, 0.0)])
}
