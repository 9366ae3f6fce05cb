//! Image and sinogram quality metrics.

use ndarray::{s, Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::{Image, Sinogram};

/// Side of the uniform SSIM window.
pub const SSIM_WINDOW: usize = 8;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_same(a: &ArrayView2<f64>, b: &ArrayView2<f64>, context: &'static str) -> Result<()> {
    if a.dim() != b.dim() {
        let (ra, ca) = a.dim();
        let (rb, cb) = b.dim();
        return Err(Error::shape(context, &[ra, ca], &[rb, cb]));
    }
    Ok(())
}

fn mse(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    let sum = Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + (x - y) * (x - y));
    sum / a.len() as f64
}

/// `10·log10(range² / MSE)`; `+∞` for identical inputs.
pub fn psnr(a: &Image, b: &Image, data_range: f64) -> Result<f64> {
    check_same(&a.data.view(), &b.data.view(), "psnr")?;
    if data_range.is_nan() || data_range <= 0.0 {
        return Err(Error::invalid("data_range must be positive"));
    }
    let err = mse(&a.data.view(), &b.data.view());
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (data_range * data_range / err).log10())
}

/// Mean SSIM over all `8×8` windows (stride 1) with uniform weights and
/// `C₁ = (0.01·range)²`, `C₂ = (0.03·range)²`.
pub fn ssim(a: &Image, b: &Image, data_range: f64) -> Result<f64> {
    ssim_arrays(&a.data.view(), &b.data.view(), data_range)
}

pub(crate) fn ssim_arrays(a: &ArrayView2<f64>, b: &ArrayView2<f64>, data_range: f64) -> Result<f64> {
    check_same(a, b, "ssim")?;
    if data_range.is_nan() || data_range <= 0.0 {
        return Err(Error::invalid("data_range must be positive"));
    }
    let (rows, cols) = a.dim();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {rows}x{cols}"
        )));
    }
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let count = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let windows = Array2::from_shape_fn((rows - SSIM_WINDOW + 1, cols - SSIM_WINDOW + 1), |(i, j)| {
        let wa = a.slice(s![i..i + SSIM_WINDOW, j..j + SSIM_WINDOW]);
        let wb = b.slice(s![i..i + SSIM_WINDOW, j..j + SSIM_WINDOW]);
        let mean_a = wa.sum() / count;
        let mean_b = wb.sum() / count;
        let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
        Zip::from(&wa).and(&wb).for_each(|&x, &y| {
            let (dx, dy) = (x - mean_a, y - mean_b);
            var_a += dx * dx;
            var_b += dy * dy;
            cov += dx * dy;
        });
        // Sample (N−1) normalization, as in the reference implementation.
        let norm = count - 1.0;
        let (var_a, var_b, cov) = (var_a / norm, var_b / norm, cov / norm);
        ((2.0 * mean_a * mean_b + c1) * (2.0 * cov + c2))
            / ((mean_a * mean_a + mean_b * mean_b + c1) * (var_a + var_b + c2))
    });
    Ok(windows.mean().unwrap_or(1.0))
}

/// Root-mean-square difference of two sinograms.
pub fn rmse_sinogram(z: &Sinogram, z_ref: &Sinogram) -> Result<f64> {
    check_same(&z.data.view(), &z_ref.data.view(), "rmse_sinogram")?;
    Ok(mse(&z.data.view(), &z_ref.data.view()).sqrt())
}

/// `max − min` of the reference image, the default PSNR/SSIM range.
pub fn data_range(reference: &Image) -> f64 {
    let (lo, hi) = reference
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub sino_rmse: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "psnr,ssim,sino_rmse";

    /// Evaluates `image` against `truth` and `sinogram` against `reference_sinogram`
    /// with the data range taken from `truth`.
    pub fn evaluate(
        image: &Image,
        truth: &Image,
        sinogram: &Sinogram,
        reference_sinogram: &Sinogram,
    ) -> Result<Self> {
        let range = data_range(truth);
        Ok(Self {
            psnr: psnr(image, truth, range)?,
            ssim: ssim(image, truth, range)?,
            sino_rmse: rmse_sinogram(sinogram, reference_sinogram)?,
        })
    }

    pub fn csv_row(&self) -> String {
        format!("{:.17e},{:.17e},{:.17e}", self.psnr, self.ssim, self.sino_rmse)
    }
}
