use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::{Image, Sinogram};

/// Parallel-beam scan over `n_views_full` evenly spaced angles in `[0, π)`.
///
/// Pixel centers sit at `(j − (n−1)/2)·pixel_spacing` horizontally and
/// `((n−1)/2 − i)·pixel_spacing` vertically; detector bin `d` is centered at
/// `(d − (D−1)/2)·detector_spacing`. View `v` measures along direction
/// `(cos ϑ_v, sin ϑ_v)` with `ϑ_v = vπ/V`.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub image_size: usize,
    pub n_detectors: usize,
    pub n_views_full: usize,
    pub detector_spacing: f64,
    pub pixel_spacing: f64,
}

impl Geometry {
    pub fn new(
        image_size: usize,
        n_detectors: usize,
        n_views_full: usize,
        detector_spacing: f64,
        pixel_spacing: f64,
    ) -> Result<Self> {
        let geo = Self {
            image_size,
            n_detectors,
            n_views_full,
            detector_spacing,
            pixel_spacing,
        };
        geo.validate()?;
        Ok(geo)
    }

    /// Unit field of view (`pixel_spacing = 1/n`), detector pitch equal to the
    /// pixel pitch and enough bins to cover the image diagonal.
    pub fn standard(image_size: usize, n_views_full: usize) -> Result<Self> {
        let n_detectors = (image_size as f64 * std::f64::consts::SQRT_2).ceil() as usize;
        let spacing = 1.0 / image_size.max(1) as f64;
        Self::new(image_size, n_detectors, n_views_full, spacing, spacing)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < 2 {
            return Err(Error::invalid(format!("image_size must be >= 2, got {}", self.image_size)));
        }
        if self.n_detectors < self.image_size {
            return Err(Error::invalid(format!(
                "n_detectors ({}) must be >= image_size ({})",
                self.n_detectors, self.image_size
            )));
        }
        if self.n_views_full < 2 {
            return Err(Error::invalid(format!("n_views_full must be >= 2, got {}", self.n_views_full)));
        }
        let spacing_ok = |s: f64| s.is_finite() && s > 0.0;
        if !spacing_ok(self.detector_spacing) || !spacing_ok(self.pixel_spacing) {
            return Err(Error::invalid("detector and pixel spacings must be positive"));
        }
        Ok(())
    }

    /// Same scan with a different number of evenly spaced views.
    pub fn with_views(&self, n_views: usize) -> Result<Self> {
        Self::new(
            self.image_size,
            self.n_detectors,
            n_views,
            self.detector_spacing,
            self.pixel_spacing,
        )
    }

    pub fn angle(&self, view: usize) -> f64 {
        view as f64 * PI / self.n_views_full as f64
    }

    pub fn detector_offset(&self, bin: usize) -> f64 {
        (bin as f64 - (self.n_detectors as f64 - 1.0) / 2.0) * self.detector_spacing
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.image_size, self.image_size)
    }

    pub fn sinogram_shape(&self) -> (usize, usize) {
        (self.n_views_full, self.n_detectors)
    }

    pub fn zero_image(&self) -> Image {
        Image::zeros(self.image_size, self.image_size)
    }

    pub fn zero_sinogram(&self) -> Sinogram {
        Sinogram::zeros(self.n_views_full, self.n_detectors)
    }

    pub fn check_image(&self, img: &Image, context: &'static str) -> Result<()> {
        if img.shape() != self.image_shape() {
            return Err(Error::shape(
                context,
                &[self.image_size, self.image_size],
                &[img.rows(), img.cols()],
            ));
        }
        Ok(())
    }

    pub fn check_sinogram(&self, sino: &Sinogram, context: &'static str) -> Result<()> {
        if sino.shape() != self.sinogram_shape() {
            return Err(Error::shape(
                context,
                &[self.n_views_full, self.n_detectors],
                &[sino.rows(), sino.cols()],
            ));
        }
        Ok(())
    }
}
