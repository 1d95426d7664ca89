use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::embed_into;
use crate::error::{Error, Result};

/// Width of one conformally embedded 3D point.
pub const EMBEDDED_POINT_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation and the activation
    /// value. ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => post * (1.0 - post),
            Activation::Tanh => 1.0 - post * post,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "none" => Ok(Activation::Identity),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}

/// How a layer embeds its input before the linear map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    /// Affine layer `W x + b` on the raw input.
    Dense,
    /// Input is a list of 3D points; each is embedded to `(x, -1, -|x|^2/2)`
    /// and the rows are concatenated. No bias.
    GeometricLinear,
    /// Input vector `z` is embedded as a whole to `(z, -1, -|z|^2/2)`. No bias.
    HypersphereLinear,
}

/// Shape of one layer. `in_dim` is the width after embedding, i.e. the row
/// length of the weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(
        kind: LayerKind,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
    ) -> Result<Self> {
        let spec = Self {
            kind,
            in_dim,
            out_dim,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_dim == 0 || self.in_dim == 0 {
            return Err(Error::InvalidConfig(
                "layer dimensions must be positive".into(),
            ));
        }
        match self.kind {
            LayerKind::GeometricLinear if !self.in_dim.is_multiple_of(EMBEDDED_POINT_DIM) => {
                Err(Error::InvalidConfig(format!(
                    "geometric layer input width {} is not a multiple of {EMBEDDED_POINT_DIM}",
                    self.in_dim
                )))
            }
            LayerKind::HypersphereLinear if self.in_dim < 3 => Err(Error::InvalidConfig(
                "hypersphere layer needs an input width of at least 3".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Width of the raw input the layer receives, before embedding.
    pub fn input_dim(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.in_dim,
            LayerKind::GeometricLinear => self.in_dim / EMBEDDED_POINT_DIM * 3,
            LayerKind::HypersphereLinear => self.in_dim - 2,
        }
    }

    pub fn has_bias(&self) -> bool {
        self.kind == LayerKind::Dense
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + if self.has_bias() { self.out_dim } else { 0 }
    }

    /// Writes the embedded form of `input` into `out` (`in_dim` values).
    #[inline]
    pub fn embed(&self, input: &[f64], out: &mut [f64]) {
        match self.kind {
            LayerKind::Dense => out.copy_from_slice(input),
            LayerKind::GeometricLinear => {
                for (x, e) in input
                    .chunks_exact(3)
                    .zip(out.chunks_exact_mut(EMBEDDED_POINT_DIM))
                {
                    embed_into(x, e);
                }
            }
            LayerKind::HypersphereLinear => embed_into(input, out),
        }
    }

    /// Pulls a gradient with respect to the embedded input back to the raw
    /// input: `d_input = J^T d_embedded`.
    #[inline]
    pub fn embed_backward(&self, input: &[f64], d_embedded: &[f64], d_input: &mut [f64]) {
        match self.kind {
            LayerKind::Dense => d_input.copy_from_slice(d_embedded),
            LayerKind::GeometricLinear => {
                for ((x, de), dx) in input
                    .chunks_exact(3)
                    .zip(d_embedded.chunks_exact(EMBEDDED_POINT_DIM))
                    .zip(d_input.chunks_exact_mut(3))
                {
                    for d in 0..3 {
                        dx[d] = de[d] - de[4] * x[d];
                    }
                }
            }
            LayerKind::HypersphereLinear => {
                let m = input.len();
                let d_sq = d_embedded[m + 1];
                for i in 0..m {
                    d_input[i] = d_embedded[i] - d_sq * input[i];
                }
            }
        }
    }
}

/// Parameters of one layer. Weights are row-major `out_dim x in_dim`; `bias`
/// is empty for layers without bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(spec: LayerSpec) -> Self {
        let bias_len = if spec.has_bias() { spec.out_dim } else { 0 };
        Self {
            spec,
            weights: vec![0.0; spec.in_dim * spec.out_dim],
            bias: vec![0.0; bias_len],
        }
    }

    /// Uniform initialization in `±1/sqrt(in_dim)` for weights and bias.
    pub fn init_uniform<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Self {
        let bound = 1.0 / (spec.in_dim as f64).sqrt();
        let mut layer = Self::zeros(spec);
        for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
        layer
    }

    pub fn weight_row(&self, unit: usize) -> &[f64] {
        let n = self.spec.in_dim;
        &self.weights[unit * n..(unit + 1) * n]
    }

    pub fn weight_row_mut(&mut self, unit: usize) -> &mut [f64] {
        let n = self.spec.in_dim;
        &mut self.weights[unit * n..(unit + 1) * n]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}
