//! Joseph-style ray-driven projector.
//!
//! Every ray is sampled once per pixel row (or column, whichever axis it is
//! closer to) with linear interpolation between the two neighboring pixels.
//! `project` gathers through those weights and `backproject` scatters through
//! the very same weights, so the pair is an exact transpose up to rounding.
//!
//! Views closer to the column axis work on a transposed copy of the image so
//! that the inner loop over detector bins always walks one contiguous line.

use ndarray::Array2;

use crate::error::Result;
use crate::tomo::Geometry;
use crate::{Image, Sinogram};

/// Integer part and fraction of a sample position, or `None` when neither
/// neighbor lies inside `[0, upper)`. Casting truncates toward zero, which is
/// a floor once `pos > -1`; this avoids a libm call per sample.
#[inline(always)]
fn split(pos: f64, upper: f64) -> Option<(isize, f64)> {
    if !(pos > -1.0 && pos < upper) {
        return None;
    }
    let k = (pos + 1.0) as isize - 1;
    Some((k, pos - k as f64))
}

/// Sampling pattern of one view.
///
/// Along image line `line` (a row when `transposed` is false, else a column)
/// the ray of bin `b` is sampled at `base + line·slope + offsets[b]`, in pixel
/// units along the line, with weight `weight`.
struct ViewPlan {
    transposed: bool,
    weight: f64,
    slope: f64,
    base: f64,
    offsets: Vec<f64>,
}

impl ViewPlan {
    fn new(geo: &Geometry, view: usize) -> Self {
        let theta = geo.angle(view);
        let (cos, sin) = (theta.cos(), theta.sin());
        let center = (geo.image_size as f64 - 1.0) / 2.0;
        let spacing = geo.pixel_spacing;
        // Rows for mostly vertical rays, columns otherwise.
        let (transposed, along, across) = if cos.abs() >= sin.abs() {
            (false, cos, sin)
        } else {
            (true, sin, cos)
        };
        let slope = across / along;
        let sign = if transposed { -1.0 } else { 1.0 };
        let offsets = (0..geo.n_detectors)
            .map(|bin| sign * geo.detector_offset(bin) / (along * spacing))
            .collect();
        Self {
            transposed,
            weight: spacing / along.abs(),
            slope,
            base: center - center * slope,
            offsets,
        }
    }

    /// Calls `visit(bin, k, frac)` for every sample on image line `line` whose
    /// interpolation support `{k, k + 1}` meets the line.
    #[inline(always)]
    fn for_each_sample(&self, n: usize, line: usize, mut visit: impl FnMut(usize, isize, f64)) {
        let upper = n as f64;
        let line_base = self.base + line as f64 * self.slope;
        for (bin, &offset) in self.offsets.iter().enumerate() {
            if let Some((k, frac)) = split(line_base + offset, upper) {
                visit(bin, k, frac);
            }
        }
    }
}

fn plans(geo: &Geometry) -> Vec<ViewPlan> {
    (0..geo.n_views_full).map(|v| ViewPlan::new(geo, v)).collect()
}

/// Forward projection `Ax`.
pub fn project(img: &Image, geo: &Geometry) -> Result<Sinogram> {
    geo.check_image(img, "project")?;
    let n = geo.image_size;
    let last = n as isize - 1;
    let rows = img.data.as_standard_layout().into_owned();
    let cols = img.data.t().as_standard_layout().into_owned();
    let rows = rows.as_slice().expect("standard layout");
    let cols = cols.as_slice().expect("standard layout");
    let mut out = geo.zero_sinogram();
    for (mut sino_row, plan) in out.data.rows_mut().into_iter().zip(plans(geo)) {
        let pixels = if plan.transposed { cols } else { rows };
        let sino_row = sino_row.as_slice_mut().expect("standard layout");
        for (line, px) in pixels.chunks_exact(n).enumerate() {
            plan.for_each_sample(n, line, |bin, k, frac| {
                let mut acc = 0.0;
                if k >= 0 {
                    acc += (1.0 - frac) * px[k as usize];
                }
                if k < last {
                    acc += frac * px[(k + 1) as usize];
                }
                sino_row[bin] += plan.weight * acc;
            });
        }
    }
    Ok(out)
}

/// Adjoint projection `Aᵀz`.
pub fn backproject(sino: &Sinogram, geo: &Geometry) -> Result<Image> {
    geo.check_sinogram(sino, "backproject")?;
    let n = geo.image_size;
    let last = n as isize - 1;
    let mut rows = vec![0.0; n * n];
    let mut cols = vec![0.0; n * n];
    for (sino_row, plan) in sino.data.rows().into_iter().zip(plans(geo)) {
        let acc = if plan.transposed { &mut cols } else { &mut rows };
        let values: Vec<f64> = sino_row.iter().map(|&v| plan.weight * v).collect();
        for (line, px) in acc.chunks_exact_mut(n).enumerate() {
            plan.for_each_sample(n, line, |bin, k, frac| {
                if k >= 0 {
                    px[k as usize] += (1.0 - frac) * values[bin];
                }
                if k < last {
                    px[(k + 1) as usize] += frac * values[bin];
                }
            });
        }
    }
    let cols = Array2::from_shape_vec((n, n), cols).expect("n·n values");
    let mut img = Array2::from_shape_vec((n, n), rows).expect("n·n values");
    img += &cols.t();
    Ok(Image::new(img))
}
