//! Multi-channel "same" cross-correlation with zero padding, and its exact
//! transpose.

use ndarray::{s, Array3, Array4, ArrayView3};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    /// `[out_channels, in_channels, k, k]`
    kernels: Array4<f64>,
}

/// Output rows `[lo, hi)` whose input row `i + shift` stays inside `[0, len)`.
fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (len as isize - shift).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

impl ConvLayer {
    pub fn new(kernels: Array4<f64>) -> Result<Self> {
        let (out_c, in_c, kh, kw) = kernels.dim();
        if out_c == 0 || in_c == 0 {
            return Err(Error::invalid("convolution layer needs at least one channel"));
        }
        if kh != kw || kh % 2 == 0 {
            return Err(Error::invalid(format!("kernel must be square with odd size, got {kh}x{kw}")));
        }
        if kernels.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("kernel weights must be finite"));
        }
        Ok(Self { kernels })
    }

    pub fn kernels(&self) -> &Array4<f64> {
        &self.kernels
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.dim().0
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.dim().1
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.dim().2
    }

    /// Visits every nonzero tap as `(out, in, row_shift, col_shift, weight)`.
    fn for_each_tap(&self, mut visit: impl FnMut(usize, usize, isize, isize, f64)) {
        let radius = (self.kernel_size() / 2) as isize;
        for ((o, c, a, b), &w) in self.kernels.indexed_iter() {
            if w != 0.0 {
                visit(o, c, a as isize - radius, b as isize - radius, w);
            }
        }
    }

    /// `out[o, i, j] = Σ_c Σ_{a,b} K[o, c, a, b] · in[c, i + a − r, j + b − r]`
    pub fn forward(&self, input: &ArrayView3<f64>) -> Result<Array3<f64>> {
        let (channels, h, w) = input.dim();
        if channels != self.in_channels() {
            return Err(Error::shape("conv forward", &[self.in_channels()], &[channels]));
        }
        let mut out = Array3::zeros((self.out_channels(), h, w));
        self.for_each_tap(|o, c, di, dj, weight| {
            let (i0, i1) = valid_range(h, di);
            let (j0, j1) = valid_range(w, dj);
            if i0 >= i1 || j0 >= j1 {
                return;
            }
            let src = input.slice(s![
                c,
                (i0 as isize + di) as usize..(i1 as isize + di) as usize,
                (j0 as isize + dj) as usize..(j1 as isize + dj) as usize
            ]);
            out.slice_mut(s![o, i0..i1, j0..j1]).scaled_add(weight, &src);
        });
        Ok(out)
    }

    /// Transpose of [`forward`](Self::forward): scatters through the same taps.
    pub fn transpose(&self, grad: &ArrayView3<f64>) -> Result<Array3<f64>> {
        let (channels, h, w) = grad.dim();
        if channels != self.out_channels() {
            return Err(Error::shape("conv transpose", &[self.out_channels()], &[channels]));
        }
        let mut out = Array3::zeros((self.in_channels(), h, w));
        self.for_each_tap(|o, c, di, dj, weight| {
            let (i0, i1) = valid_range(h, di);
            let (j0, j1) = valid_range(w, dj);
            if i0 >= i1 || j0 >= j1 {
                return;
            }
            let src = grad.slice(s![o, i0..i1, j0..j1]);
            out.slice_mut(s![
                c,
                (i0 as isize + di) as usize..(i1 as isize + di) as usize,
                (j0 as isize + dj) as usize..(j1 as isize + dj) as usize
            ])
            .scaled_add(weight, &src);
        });
        Ok(out)
    }
}
