use super::tape::{LayerSlot, NodeId, Tape};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Softplus,
    Sigmoid,
}

/// Fully connected layer. `weight` is `out_dim x in_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
            activation,
        }
    }

    /// Uniform fan-in init, `U(-sqrt(6 / in), sqrt(6 / in))`, zero bias.
    pub fn kaiming_uniform<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = (6.0 / in_dim.max(1) as f64).sqrt();
        let weight = (0..in_dim * out_dim)
            .map(|_| T::lit(rng.gen_range(-bound..bound)))
            .collect();
        Self {
            in_dim,
            out_dim,
            weight,
            bias: vec![T::zero(); out_dim],
            activation,
        }
    }

    #[inline]
    pub fn weight_row(&self, o: usize) -> &[T] {
        &self.weight[o * self.in_dim..(o + 1) * self.in_dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> MlpParams<T> {
    /// `sizes = [in, hidden.., out]`; hidden layers use `hidden`, the last `output`.
    pub fn new<R: Rng>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                Layer::kaiming_uniform(sizes[i], sizes[i + 1], act, rng)
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network without layers".into()));
        }
        for w in layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(Error::Shape(format!(
                    "layer widths do not compose: {} -> {}",
                    w[0].out_dim, w[1].in_dim
                )));
            }
        }
        for l in &layers {
            if l.weight.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::Shape("layer buffers disagree with dimensions".into()));
            }
        }
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// `(in, out, activation)` per layer.
    pub fn shape(&self) -> Vec<(usize, usize, Activation)> {
        self.layers.iter().map(|l| (l.in_dim, l.out_dim, l.activation)).collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Records the network on `tape`; `net` selects the gradient slot.
    pub fn forward_tape<'a>(&'a self, tape: &mut Tape<'a, T>, x: NodeId, net: usize) -> Result<NodeId> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = tape.layer(h, layer, LayerSlot { net, layer: i })?;
        }
        Ok(h)
    }
}

/// Evaluates the network on one input vector.
pub fn mlp_forward<T: Scalar>(params: &MlpParams<T>, input: &[T]) -> Result<Vec<T>> {
    if input.len() != params.in_dim() {
        return Err(Error::Shape(format!(
            "network expects {} inputs, got {}",
            params.in_dim(),
            input.len()
        )));
    }
    let mut h = input.to_vec();
    for layer in &params.layers {
        h = (0..layer.out_dim)
            .map(|o| layer.activation.apply(dot(&h, layer.weight_row(o)) + layer.bias[o]))
            .collect();
    }
    Ok(h)
}
