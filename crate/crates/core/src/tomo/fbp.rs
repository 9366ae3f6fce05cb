//! Filtered back-projection.

use std::f64::consts::PI;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::tomo::Geometry;
use crate::{Image, Sinogram};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FilterKind {
    #[default]
    RamLak,
    Hann,
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ram-lak" | "ramlak" | "ramp" => Ok(FilterKind::RamLak),
            "hann" => Ok(FilterKind::Hann),
            other => Err(Error::invalid(format!("unknown filter {other:?}"))),
        }
    }
}

/// Frequency response of the band-limited ramp (doubled, so that the
/// back-projection weight is π/(2V)), built from the sampled spatial kernel
/// to avoid the DC offset of a naively sampled `|f|`.
fn ramp_response(len: usize, kind: FilterKind) -> Vec<f64> {
    let mut kernel = vec![Complex::new(0.0, 0.0); len];
    for (k, tap) in kernel.iter_mut().enumerate() {
        let offset = if k <= len / 2 { k as isize } else { k as isize - len as isize };
        let value = if offset == 0 {
            0.25
        } else if offset % 2 != 0 {
            -1.0 / (PI * offset as f64).powi(2)
        } else {
            0.0
        };
        *tap = Complex::new(2.0 * value, 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut kernel);
    kernel
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let window = match kind {
                FilterKind::RamLak => 1.0,
                FilterKind::Hann => {
                    let freq = k.min(len - k) as f64 / len as f64;
                    0.5 * (1.0 + (2.0 * PI * freq).cos())
                }
            };
            h.re * window
        })
        .collect()
}

/// Ramp-filters every view, then back-projects with linear interpolation
/// and weight π/(2V).
pub fn fbp(sino: &Sinogram, geo: &Geometry, filter_kind: FilterKind) -> Result<Image> {
    geo.check_sinogram(sino, "fbp")?;
    let views = sino.view_count();
    if views < 2 {
        return Err(Error::invalid("fbp needs at least two views"));
    }
    let bins = geo.n_detectors;
    let padded = (2 * bins).next_power_of_two();
    let response = ramp_response(padded, filter_kind);

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(padded);
    let inverse = planner.plan_fft_inverse(padded);
    let norm = 1.0 / (padded as f64 * geo.detector_spacing);

    let mut filtered = vec![0.0; views * bins];
    let mut buffer = vec![Complex::new(0.0, 0.0); padded];
    for (v, row) in sino.data.rows().into_iter().enumerate() {
        buffer.fill(Complex::new(0.0, 0.0));
        for (slot, &value) in buffer.iter_mut().zip(row.iter()) {
            slot.re = value;
        }
        forward.process(&mut buffer);
        for (slot, &h) in buffer.iter_mut().zip(&response) {
            *slot *= h;
        }
        inverse.process(&mut buffer);
        for (d, slot) in buffer.iter().take(bins).enumerate() {
            filtered[v * bins + d] = slot.re * norm;
        }
    }

    let n = geo.image_size;
    let center = (n as f64 - 1.0) / 2.0;
    let bin_center = (bins as f64 - 1.0) / 2.0;
    let mut out = geo.zero_image();
    for v in 0..views {
        let theta = geo.angle(v);
        let (cos, sin) = (theta.cos() * geo.pixel_spacing, theta.sin() * geo.pixel_spacing);
        let row = &filtered[v * bins..(v + 1) * bins];
        for ((i, j), value) in out.data.indexed_iter_mut() {
            let x = j as f64 - center;
            let y = center - i as f64;
            let pos = (x * cos + y * sin) / geo.detector_spacing + bin_center;
            let d0 = pos.floor();
            let frac = pos - d0;
            let d0 = d0 as isize;
            let mut sample = 0.0;
            if d0 >= 0 && (d0 as usize) < bins {
                sample += (1.0 - frac) * row[d0 as usize];
            }
            if d0 + 1 >= 0 && ((d0 + 1) as usize) < bins {
                sample += frac * row[(d0 + 1) as usize];
            }
            *value += sample;
        }
    }
    out.data *= PI / (2.0 * views as f64);
    Ok(out)
}
