//! Recurrent sinogram initializer.
//!
//! The measured views form partition 0. Partition `i` (absolute views
//! `i, i + p, i + 2p, …`) is predicted as `Ψ^i(s₀)` and all partitions are
//! interleaved into a full-view sinogram whose FBP starts the solver.

use ndarray::{s, Array2, Axis};

use crate::error::{Error, Result};
use crate::regnet::{feature_forward, RegularizerNet};
use crate::tomo::{self, FilterKind, Geometry, ViewSelector};
use crate::{Image, Sinogram};

#[derive(Clone, Debug, Default, PartialEq)]
pub enum ViewShiftOperator {
    /// `Ψ = id`: every missing view copies the preceding measured view.
    Nearest,
    /// Angular linear interpolation between neighboring measured views.
    #[default]
    LinearInterp,
    /// Residual step `Ψ(s) = s + g(s)` with a single-output conv stack `g`.
    Learned(RegularizerNet),
}

impl ViewShiftOperator {
    pub fn learned(net: RegularizerNet) -> Result<Self> {
        if net.output_channels() != 1 {
            return Err(Error::invalid(format!(
                "learned view shift needs 1 output channel, got {}",
                net.output_channels()
            )));
        }
        Ok(ViewShiftOperator::Learned(net))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ViewShiftOperator::Nearest => "nearest",
            ViewShiftOperator::LinearInterp => "linear-interp",
            ViewShiftOperator::Learned(_) => "learned",
        }
    }
}

/// Next measured view of every row. The successor of the last view is view 0
/// seen from angle `π`, i.e. with its detector axis reversed.
fn successor(s: &Sinogram) -> Sinogram {
    let v = s.view_count();
    let mut next = Array2::zeros(s.shape());
    next.slice_mut(s![..v - 1, ..]).assign(&s.data.slice(s![1.., ..]));
    next.row_mut(v - 1).assign(&s.data.row(0).slice(s![..;-1]));
    Sinogram::new(next)
}

/// `Ψ^offset(s)` for a sparse sinogram subsampled at `rate`.
///
/// For linear interpolation this is the blend `s + (offset/rate)·(succ(s) − s)`
/// evaluated directly. It is the exact interpolant at the intermediate angle
/// and not the `offset`-fold composition of a single step.
pub fn view_shift(op: &ViewShiftOperator, s: &Sinogram, offset: usize, rate: usize) -> Result<Sinogram> {
    if rate == 0 || offset >= rate {
        return Err(Error::invalid(format!("view offset {offset} must be < rate {rate}")));
    }
    if s.view_count() == 0 {
        return Err(Error::invalid("sinogram has no views"));
    }
    if offset == 0 {
        return Ok(s.clone());
    }
    match op {
        ViewShiftOperator::Nearest => Ok(s.clone()),
        ViewShiftOperator::LinearInterp => {
            // `s + w·(succ − s)` keeps equal neighbors bit-exact.
            let w = offset as f64 / rate as f64;
            let diff = Sinogram::new(&successor(s).data - &s.data);
            Ok(s.add_scaled(w, &diff))
        }
        ViewShiftOperator::Learned(net) => {
            let mut out = s.clone();
            for _ in 0..offset {
                let update = feature_forward(net, &out.data.view())?;
                if update.channels() != 1 {
                    return Err(Error::shape("learned view shift", &[1], &[update.channels()]));
                }
                out.data += &update.data.index_axis(Axis(0), 0);
            }
            Ok(out)
        }
    }
}

/// One application of `Ψ`: the estimate of the partition one view later.
pub fn interp_step(op: &ViewShiftOperator, s: &Sinogram, rate: usize) -> Result<Sinogram> {
    if rate == 1 {
        return Ok(s.clone());
    }
    view_shift(op, s, 1, rate)
}

/// Interleaves `[s₀, Ψ(s₀), …, Ψ^{p−1}(s₀)]` so that row `j·p + i` holds row
/// `j` of `Ψ^i(s₀)`. Measured rows are copied bit-exactly.
pub fn assemble_full(op: &ViewShiftOperator, s0: &Sinogram, sel: &ViewSelector) -> Result<Sinogram> {
    if sel.offset != 0 {
        return Err(Error::invalid("assembly expects the measured views at offset 0"));
    }
    if s0.view_count() != sel.sparse_view_count() {
        return Err(Error::shape("assemble_full", &[sel.sparse_view_count()], &[s0.view_count()]));
    }
    let p = sel.rate;
    let mut full = Array2::zeros((sel.full_view_count, s0.detector_count()));
    for i in 0..p {
        let part = view_shift(op, s0, i, p)?;
        full.slice_mut(s![i..;p, ..]).assign(&part.data);
    }
    Ok(Sinogram::new(full))
}

/// `(x₀, z₀)` with `z₀ = assemble_full(s₀)` and `x₀ = fbp(z₀)`.
pub fn init_reconstruct(
    op: &ViewShiftOperator,
    s0: &Sinogram,
    sel: &ViewSelector,
    geo: &Geometry,
) -> Result<(Image, Sinogram)> {
    if geo.n_views_full != sel.full_view_count {
        return Err(Error::shape("init_reconstruct", &[geo.n_views_full], &[sel.full_view_count]));
    }
    let z0 = assemble_full(op, s0, sel)?;
    let x0 = tomo::fbp(&z0, geo, FilterKind::RamLak)?;
    Ok((x0, z0))
}

/// FBP of the measured views with zeros in every missing view.
pub fn zero_filled_fbp(s0: &Sinogram, sel: &ViewSelector, geo: &Geometry) -> Result<Image> {
    tomo::fbp(&tomo::embed(s0, sel)?, geo, FilterKind::RamLak)
}
