use ndarray::{Array2, Array3, Array4, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::regnet::{activation, activation_derivative, ConvLayer};
use crate::spectral::power_iteration;

pub const DEFAULT_ACTIVATION_KNEE: f64 = 0.01;

/// Feature extractor `g(y) = w_l * a(… a(w_2 * a(w_1 * y)))`; the last
/// convolution is not followed by an activation.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizerNet {
    layers: Vec<ConvLayer>,
    activation_knee: f64,
}

/// `g(y)` stored as `[channels, rows, cols]`; position `(r, c)` holds the
/// `channels`-vector `g_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack {
    pub data: Array3<f64>,
}

impl FeatureStack {
    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    /// Number of spatial positions `m`.
    pub fn positions(&self) -> usize {
        let (_, h, w) = self.data.dim();
        h * w
    }

    pub fn spatial_shape(&self) -> (usize, usize) {
        let (_, h, w) = self.data.dim();
        (h, w)
    }

    /// `‖g_i‖₂` at every position.
    pub fn position_norms(&self) -> Array2<f64> {
        self.data
            .map_axis(Axis(0), |v| v.iter().map(|x| x * x).sum::<f64>())
            .mapv(f64::sqrt)
    }
}

/// Intermediate values of a forward pass kept for the backward pass.
pub(crate) struct Tape {
    /// Pre-activation of every layer but the last.
    pre_activations: Vec<Array3<f64>>,
    pub(crate) output: FeatureStack,
}

impl RegularizerNet {
    pub fn new(layers: Vec<ConvLayer>, activation_knee: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a regularizer net needs at least one layer"));
        }
        if !(activation_knee.is_finite() && activation_knee > 0.0) {
            return Err(Error::invalid("activation_knee must be positive"));
        }
        let mut channels = 1;
        for (index, layer) in layers.iter().enumerate() {
            if layer.in_channels() != channels {
                return Err(Error::invalid(format!(
                    "layer {index} expects {} input channels but receives {channels}",
                    layer.in_channels()
                )));
            }
            channels = layer.out_channels();
        }
        Ok(Self {
            layers,
            activation_knee,
        })
    }

    /// One `1×1` layer with unit weight: `g(y) = y`.
    pub fn identity() -> Self {
        Self::single(Array4::from_elem((1, 1, 1, 1), 1.0))
    }

    /// `g ≡ 0`, which switches the regularizer off.
    pub fn zero() -> Self {
        Self::single(Array4::zeros((1, 1, 1, 1)))
    }

    /// Forward differences scaled by `weight`, giving `weight · TV(y)` as the
    /// `L2,1` norm (isotropic total variation with zero boundary).
    pub fn tv_like(weight: f64) -> Self {
        let mut k = Array4::zeros((2, 1, 3, 3));
        k[[0, 0, 1, 1]] = -weight;
        k[[0, 0, 1, 2]] = weight;
        k[[1, 0, 1, 1]] = -weight;
        k[[1, 0, 2, 1]] = weight;
        Self::single(k)
    }

    fn single(kernels: Array4<f64>) -> Self {
        Self::new(
            vec![ConvLayer::new(kernels).expect("valid preset")],
            DEFAULT_ACTIVATION_KNEE,
        )
        .expect("valid preset")
    }

    /// Seeded Gaussian initialization with every layer rescaled to unit
    /// operator norm, so that `sup ‖∇g‖ ≤ 1`.
    ///
    /// `widths` lists the output channels of each layer; inputs start at one
    /// channel.
    pub fn random(widths: &[usize], kernel_size: usize, activation_knee: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(widths.len());
        let mut in_channels = 1;
        for &out_channels in widths {
            let fan_in = (in_channels * kernel_size * kernel_size) as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
            let kernels = Array4::from_shape_fn((out_channels, in_channels, kernel_size, kernel_size), |_| {
                normal.sample(&mut rng)
            });
            let layer = ConvLayer::new(kernels)?;
            let norm = layer_norm(&layer, &mut rng);
            let layer = if norm > 0.0 {
                ConvLayer::new(layer.kernels() / norm)?
            } else {
                layer
            };
            layers.push(layer);
            in_channels = out_channels;
        }
        Self::new(layers, activation_knee)
    }

    /// Three `3×3` layers of width 16.
    pub fn default_random(seed: u64) -> Self {
        Self::random(&[16, 16, 16], 3, DEFAULT_ACTIVATION_KNEE, seed).expect("valid default architecture")
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn activation_knee(&self) -> f64 {
        self.activation_knee
    }

    /// Channel count `d` of `g(y)`.
    pub fn output_channels(&self) -> usize {
        self.layers.last().map_or(1, ConvLayer::out_channels)
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().any(|l| l.kernels().iter().all(|&w| w == 0.0))
    }

    /// Single layer, so `g` is linear and `∇g` constant.
    pub fn is_linear(&self) -> bool {
        self.layers.len() == 1
    }

    pub(crate) fn forward_tape(&self, y: &ArrayView2<f64>) -> Result<Tape> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("regularizer input must be finite"));
        }
        let (h, w) = y.dim();
        let mut hidden = y.to_owned().into_shape_with_order((1, h, w)).expect("same length");
        let mut pre_activations = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let last = self.layers.len() - 1;
        for (index, layer) in self.layers.iter().enumerate() {
            let pre = layer.forward(&hidden.view())?;
            if index == last {
                return Ok(Tape {
                    pre_activations,
                    output: FeatureStack { data: pre },
                });
            }
            hidden = pre.mapv(|t| activation(t, self.activation_knee));
            pre_activations.push(pre);
        }
        unreachable!("at least one layer")
    }

    pub(crate) fn backward(&self, tape: &Tape, w: &FeatureStack) -> Result<Array2<f64>> {
        if w.data.dim() != tape.output.data.dim() {
            let (c, h, wd) = tape.output.data.dim();
            let (c2, h2, w2) = w.data.dim();
            return Err(Error::shape("jacobian_transpose_apply", &[c, h, wd], &[c2, h2, w2]));
        }
        let mut delta = w.data.clone();
        for (index, layer) in self.layers.iter().enumerate().rev() {
            delta = layer.transpose(&delta.view())?;
            if index > 0 {
                Zip::from(&mut delta)
                    .and(&tape.pre_activations[index - 1])
                    .for_each(|d, &p| *d *= activation_derivative(p, self.activation_knee));
            }
        }
        let (_, h, wd) = delta.dim();
        Ok(delta.into_shape_with_order((h, wd)).expect("single channel"))
    }

    pub(crate) fn tangent(&self, tape: &Tape, v: &ArrayView2<f64>) -> Result<Array3<f64>> {
        let (h, w) = v.dim();
        let mut t = v.to_owned().into_shape_with_order((1, h, w)).expect("same length");
        for (index, layer) in self.layers.iter().enumerate() {
            if index > 0 {
                Zip::from(&mut t)
                    .and(&tape.pre_activations[index - 1])
                    .for_each(|d, &p| *d *= activation_derivative(p, self.activation_knee));
            }
            t = layer.forward(&t.view())?;
        }
        Ok(t)
    }
}

/// Operator norm of a single convolution layer on a 16×16 grid.
fn layer_norm(layer: &ConvLayer, rng: &mut ChaCha8Rng) -> f64 {
    let shape = [layer.in_channels(), 16, 16];
    power_iteration(&shape, 50, rng, |v| {
        let v3 = v.view().into_dimensionality().expect("rank 3");
        let fwd = layer.forward(&v3).expect("channels match");
        layer.transpose(&fwd.view()).expect("channels match").into_dyn()
    })
    .sqrt()
}

pub fn feature_forward(net: &RegularizerNet, y: &ArrayView2<f64>) -> Result<FeatureStack> {
    Ok(net.forward_tape(y)?.output)
}

/// `∇g(y)ᵀ w` by transposed convolutions interleaved with `a'(pre-activation)`.
pub fn jacobian_transpose_apply(net: &RegularizerNet, y: &ArrayView2<f64>, w: &FeatureStack) -> Result<Array2<f64>> {
    let tape = net.forward_tape(y)?;
    net.backward(&tape, w)
}

/// `∇g(y) v` (forward-mode directional derivative).
pub fn jacobian_apply(net: &RegularizerNet, y: &ArrayView2<f64>, v: &ArrayView2<f64>) -> Result<FeatureStack> {
    if v.dim() != y.dim() {
        let (a, b) = y.dim();
        let (c, d) = v.dim();
        return Err(Error::shape("jacobian_apply", &[a, b], &[c, d]));
    }
    let tape = net.forward_tape(y)?;
    Ok(FeatureStack {
        data: net.tangent(&tape, v)?,
    })
}

/// Uniform samples in `[-scale, scale]`, shared by tests and the Lipschitz probe.
pub(crate) fn random_array(shape: (usize, usize), scale: f64, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| rng.gen_range(-scale..scale))
}
