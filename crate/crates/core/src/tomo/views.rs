//! View subsampling `P_i` and its transpose.

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::Sinogram;

/// Keeps views `{offset, offset + rate, offset + 2·rate, …}` of a
/// `full_view_count`-view sinogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ViewSelector {
    pub rate: usize,
    pub offset: usize,
    pub full_view_count: usize,
}

impl ViewSelector {
    pub fn new(rate: usize, offset: usize, full_view_count: usize) -> Result<Self> {
        if rate == 0 {
            return Err(Error::invalid("downsample rate must be positive"));
        }
        if offset >= rate {
            return Err(Error::invalid(format!("offset {offset} must be < rate {rate}")));
        }
        if full_view_count == 0 || !full_view_count.is_multiple_of(rate) {
            return Err(Error::invalid(format!(
                "rate {rate} does not divide view count {full_view_count}"
            )));
        }
        Ok(Self {
            rate,
            offset,
            full_view_count,
        })
    }

    pub fn sparse_view_count(&self) -> usize {
        self.full_view_count / self.rate
    }

    /// The same subsampling shifted to another offset.
    pub fn with_offset(&self, offset: usize) -> Result<Self> {
        Self::new(self.rate, offset, self.full_view_count)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (self.offset..self.full_view_count).step_by(self.rate)
    }
}

/// `P_i s`: the selected rows, in order.
pub fn select(sino: &Sinogram, sel: &ViewSelector) -> Result<Sinogram> {
    if sino.view_count() != sel.full_view_count {
        return Err(Error::shape("select", &[sel.full_view_count], &[sino.view_count()]));
    }
    let rows = sino.data.slice(s![sel.offset..;sel.rate, ..]).to_owned();
    Ok(Sinogram::new(rows))
}

/// `P_iᵀ s`: scatters sparse rows into a zero full-view sinogram.
pub fn embed(sparse: &Sinogram, sel: &ViewSelector) -> Result<Sinogram> {
    if sparse.view_count() * sel.rate != sel.full_view_count {
        return Err(Error::shape(
            "embed",
            &[sel.sparse_view_count()],
            &[sparse.view_count()],
        ));
    }
    let mut full = Array2::zeros((sel.full_view_count, sparse.detector_count()));
    full.slice_mut(s![sel.offset..;sel.rate, ..]).assign(&sparse.data);
    Ok(Sinogram::new(full))
}
