//! Image and sinogram newtypes over dense row-major arrays.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};

macro_rules! field_type {
    ($(#[$meta:meta])* $name:ident, $rows:literal, $cols:literal) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            pub data: Array2<f64>,
        }

        impl $name {
            pub fn new(data: Array2<f64>) -> Self {
                Self { data }
            }

            pub fn zeros(rows: usize, cols: usize) -> Self {
                Self { data: Array2::zeros((rows, cols)) }
            }

            pub fn from_shape_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
                let len = values.len();
                Array2::from_shape_vec((rows, cols), values)
                    .map(Self::new)
                    .map_err(|_| Error::shape(stringify!($name), &[rows * cols], &[len]))
            }

            #[doc = concat!("Number of ", $rows, ".")]
            pub fn rows(&self) -> usize {
                self.data.nrows()
            }

            #[doc = concat!("Number of ", $cols, ".")]
            pub fn cols(&self) -> usize {
                self.data.ncols()
            }

            pub fn shape(&self) -> (usize, usize) {
                self.data.dim()
            }

            pub fn dot(&self, other: &Self) -> f64 {
                Zip::from(&self.data).and(&other.data).fold(0.0, |acc, a, b| acc + a * b)
            }

            pub fn norm_sq(&self) -> f64 {
                self.data.iter().map(|v| v * v).sum()
            }

            pub fn norm(&self) -> f64 {
                self.norm_sq().sqrt()
            }

            pub fn is_finite(&self) -> bool {
                self.data.iter().all(|v| v.is_finite())
            }

            /// `self + scale · other`
            pub fn add_scaled(&self, scale: f64, other: &Self) -> Self {
                let mut out = self.data.clone();
                out.scaled_add(scale, &other.data);
                Self::new(out)
            }

            pub fn scaled(&self, scale: f64) -> Self {
                Self::new(&self.data * scale)
            }

            /// `‖self − other‖`
            pub fn distance(&self, other: &Self) -> f64 {
                Zip::from(&self.data)
                    .and(&other.data)
                    .fold(0.0, |acc, a, b| acc + (a - b) * (a - b))
                    .sqrt()
            }
        }
    };
}

field_type!(
    /// Reconstruction variable: an `n × n` attenuation map, row 0 at the top.
    Image, "pixel rows", "pixel columns"
);

field_type!(
    /// Line-integral data: one row per view angle, one column per detector bin.
    Sinogram, "views", "detector bins"
);

impl Sinogram {
    pub fn view_count(&self) -> usize {
        self.rows()
    }

    pub fn detector_count(&self) -> usize {
        self.cols()
    }
}

impl Image {
    pub fn size(&self) -> usize {
        self.rows()
    }
}
