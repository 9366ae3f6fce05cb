//! Network weights as a container: `layer{i}` holds the `[out, in, k, k]`
//! kernels of layer `i` and `activation_knee` the scalar knee.

use std::path::Path;

use ndarray::Array4;

use super::container::{load, save, Tensor, TensorContainer};
use crate::error::{Error, Result};
use crate::regnet::{ConvLayer, RegularizerNet};

const KNEE: &str = "activation_knee";

pub fn net_to_container(net: &RegularizerNet) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    for (i, layer) in net.layers().iter().enumerate() {
        let k = layer.kernels();
        let tensor = Tensor::new(k.shape().to_vec(), k.iter().copied().collect())?;
        c.insert(format!("layer{i}"), tensor)?;
    }
    c.insert_scalar(KNEE, net.activation_knee())?;
    Ok(c)
}

pub fn net_from_container(c: &TensorContainer) -> Result<RegularizerNet> {
    let mut layers = Vec::new();
    while let Some(t) = c.get(&format!("layer{}", layers.len())) {
        let [o, i, kh, kw] = t.dims[..] else {
            return Err(Error::invalid(format!("layer{} has rank {}, expected 4", layers.len(), t.dims.len())));
        };
        let kernels = Array4::from_shape_vec((o, i, kh, kw), t.data.clone()).expect("validated length");
        layers.push(ConvLayer::new(kernels)?);
    }
    if layers.is_empty() {
        return Err(Error::MissingEntry("layer0".into()));
    }
    RegularizerNet::new(layers, c.scalar(KNEE)?)
}

pub fn save_net(path: impl AsRef<Path>, net: &RegularizerNet) -> Result<()> {
    save(path, &net_to_container(net)?)
}

pub fn load_net(path: impl AsRef<Path>) -> Result<RegularizerNet> {
    net_from_container(&load(path)?)
}
