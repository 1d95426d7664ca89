//! Feed-forward networks with conformal embedding layers, trained with exact
//! hand-derived gradients and Adam.
//!
//! Every layer first embeds its raw input (identity for [`LayerKind::Dense`],
//! point-wise for [`LayerKind::GeometricLinear`], vector-wise for
//! [`LayerKind::HypersphereLinear`]) and then applies a linear map and an
//! activation. The embeddings carry no parameters.

mod adam;
mod layer;
mod loss;

pub use adam::{Adam, AdamConfig};
pub use layer::{Activation, Layer, LayerKind, LayerSpec, EMBEDDED_POINT_DIM};
pub use loss::{argmax, softmax, softmax_cross_entropy, softmax_cross_entropy_into, softmax_into};

use rand::Rng;

use crate::conformal::dot;
use crate::error::{Error, Result};

/// Intermediate values of one forward pass, per layer.
#[derive(Debug, Clone, Default)]
pub struct ForwardTrace {
    /// Raw layer inputs, before embedding.
    pub inputs: Vec<Vec<f64>>,
    pub embedded: Vec<Vec<f64>>,
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
    // backward scratch
    d_pre: Vec<Vec<f64>>,
    d_embedded: Vec<Vec<f64>>,
    d_input: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn for_network(network: &Network) -> Self {
        let specs = network.layers.iter().map(|l| l.spec);
        let mk = |f: fn(&LayerSpec) -> usize| {
            specs.clone().map(|s| vec![0.0; f(&s)]).collect::<Vec<_>>()
        };
        Self {
            inputs: mk(|s| s.input_dim()),
            embedded: mk(|s| s.in_dim),
            pre_activations: mk(|s| s.out_dim),
            activations: mk(|s| s.out_dim),
            d_pre: mk(|s| s.out_dim),
            d_embedded: mk(|s| s.in_dim),
            d_input: mk(|s| s.input_dim()),
        }
    }

    pub fn logits(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }

    fn fits(&self, network: &Network) -> bool {
        self.inputs.len() == network.layers.len()
            && self
                .embedded
                .iter()
                .zip(&network.layers)
                .all(|(e, l)| e.len() == l.spec.in_dim)
            && self
                .activations
                .iter()
                .zip(&network.layers)
                .all(|(a, l)| a.len() == l.spec.out_dim)
    }
}

/// Gradients (or any per-parameter quantity) laid out like a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros(network: &Network) -> Self {
        Self {
            layers: network
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for v in self.iter_mut() {
            *v = 0.0;
        }
    }

    /// Values in parameter order: layer by layer, weights then bias.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().collect()
    }
}

/// A chain of layers; the output of layer `i` is the raw input of layer `i+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network has no layers".into()));
        }
        for layer in &layers {
            layer.spec.validate()?;
            let bias_len = if layer.spec.has_bias() {
                layer.spec.out_dim
            } else {
                0
            };
            if layer.weights.len() != layer.spec.in_dim * layer.spec.out_dim {
                return Err(Error::Shape {
                    expected: layer.spec.in_dim * layer.spec.out_dim,
                    actual: layer.weights.len(),
                });
            }
            if layer.bias.len() != bias_len {
                return Err(Error::Shape {
                    expected: bias_len,
                    actual: layer.bias.len(),
                });
            }
        }
        for pair in layers.windows(2) {
            if pair[0].spec.out_dim != pair[1].spec.input_dim() {
                return Err(Error::Shape {
                    expected: pair[1].spec.input_dim(),
                    actual: pair[0].spec.out_dim,
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn from_specs_uniform<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        Self::new(specs.iter().map(|&s| Layer::init_uniform(s, rng)).collect())
    }

    pub fn from_specs_zeros(specs: &[LayerSpec]) -> Result<Self> {
        Self::new(specs.iter().map(|&s| Layer::zeros(s)).collect())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Parameters in the same order as [`Gradients::iter`].
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
        let mut trace = ForwardTrace::for_network(self);
        self.forward_into(input, &mut trace)?;
        Ok((trace.logits().to_vec(), trace))
    }

    /// Forward pass reusing the buffers of `trace`. The outputs of the last
    /// layer end up in `trace.logits()`.
    pub fn forward_into(&self, input: &[f64], trace: &mut ForwardTrace) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        if !trace.fits(self) {
            *trace = ForwardTrace::for_network(self);
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if l == 0 {
                trace.inputs[0].copy_from_slice(input);
            } else {
                trace.inputs[l].copy_from_slice(&trace.activations[l - 1]);
            }
            let spec = &layer.spec;
            spec.embed(&trace.inputs[l], &mut trace.embedded[l]);
            let embedded = &trace.embedded[l];
            let pre = &mut trace.pre_activations[l];
            let post = &mut trace.activations[l];
            for o in 0..spec.out_dim {
                let mut z = dot(layer.weight_row(o), embedded);
                if spec.has_bias() {
                    z += layer.bias[o];
                }
                pre[o] = z;
                post[o] = spec.activation.apply(z);
            }
        }
        Ok(())
    }

    /// Accumulates (adds) the parameter gradients for the upstream gradient
    /// `d_logits` at the forward pass recorded in `trace`.
    pub fn backward(&self, trace: &mut ForwardTrace, d_logits: &[f64], grads: &mut Gradients) {
        let n = self.layers.len();
        debug_assert_eq!(d_logits.len(), self.output_dim());
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let spec = &layer.spec;
            {
                let upstream: &[f64] = if l == n - 1 {
                    d_logits
                } else {
                    &trace.d_input[l + 1]
                };
                let pre = &trace.pre_activations[l];
                let post = &trace.activations[l];
                let d_pre = &mut trace.d_pre[l];
                for o in 0..spec.out_dim {
                    d_pre[o] = upstream[o] * spec.activation.derivative(pre[o], post[o]);
                }
            }
            let d_pre = &trace.d_pre[l];
            let embedded = &trace.embedded[l];
            let g = &mut grads.layers[l];
            for o in 0..spec.out_dim {
                let d = d_pre[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut g.weights[o * spec.in_dim..(o + 1) * spec.in_dim];
                for (gw, &e) in row.iter_mut().zip(embedded) {
                    *gw += d * e;
                }
                if spec.has_bias() {
                    g.bias[o] += d;
                }
            }
            if l == 0 {
                // the raw input carries no parameters
                break;
            }
            let d_emb = &mut trace.d_embedded[l];
            d_emb.fill(0.0);
            for o in 0..spec.out_dim {
                let d = d_pre[o];
                if d == 0.0 {
                    continue;
                }
                for (de, &w) in d_emb.iter_mut().zip(layer.weight_row(o)) {
                    *de += d * w;
                }
            }
            spec.embed_backward(
                &trace.inputs[l],
                &trace.d_embedded[l],
                &mut trace.d_input[l],
            );
        }
    }

    /// Mean softmax cross-entropy over a batch. `inputs` holds the samples
    /// row-major; gradients of the mean loss are written to `grads`
    /// (overwriting previous content).
    pub fn mean_loss_and_gradients(
        &self,
        inputs: &[f64],
        labels: &[usize],
        grads: &mut Gradients,
        trace: &mut ForwardTrace,
    ) -> Result<f64> {
        let dim = self.input_dim();
        if inputs.len() != labels.len() * dim {
            return Err(Error::Shape {
                expected: labels.len() * dim,
                actual: inputs.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        grads.fill_zero();
        let scale = 1.0 / labels.len() as f64;
        let mut d_logits = vec![0.0; self.output_dim()];
        let mut total = 0.0;
        for (x, &y) in inputs.chunks_exact(dim).zip(labels) {
            self.forward_into(x, trace)?;
            total += softmax_cross_entropy_into(trace.logits(), y, &mut d_logits);
            for d in &mut d_logits {
                *d *= scale;
            }
            self.backward(trace, &d_logits, grads);
        }
        Ok(total * scale)
    }

    pub fn mean_loss(&self, inputs: &[f64], labels: &[usize]) -> Result<f64> {
        let dim = self.input_dim();
        let mut trace = ForwardTrace::for_network(self);
        let mut scratch = vec![0.0; self.output_dim()];
        let mut total = 0.0;
        for (x, &y) in inputs.chunks_exact(dim).zip(labels) {
            self.forward_into(x, &mut trace)?;
            total += softmax_cross_entropy_into(trace.logits(), y, &mut scratch);
        }
        Ok(total / labels.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(kind: LayerKind, i: usize, o: usize, a: Activation) -> LayerSpec {
        LayerSpec::new(kind, i, o, a).unwrap()
    }

    #[test]
    fn chain_dimensions_checked() {
        let a = Layer::zeros(spec(
            LayerKind::GeometricLinear,
            20,
            4,
            Activation::Identity,
        ));
        let b = Layer::zeros(spec(
            LayerKind::HypersphereLinear,
            7,
            8,
            Activation::Identity,
        ));
        assert!(matches!(Network::new(vec![a, b]), Err(Error::Shape { .. })));
    }

    #[test]
    fn input_width_checked() {
        let net = Network::from_specs_zeros(&[spec(LayerKind::Dense, 12, 8, Activation::Identity)])
            .unwrap();
        assert!(matches!(net.forward(&[0.0; 11]), Err(Error::Shape { .. })));
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let net = Network::from_specs_zeros(&[
            spec(LayerKind::GeometricLinear, 20, 4, Activation::Identity),
            spec(LayerKind::HypersphereLinear, 6, 8, Activation::Identity),
        ])
        .unwrap();
        let (logits, _) = net.forward(&[0.7; 12]).unwrap();
        assert_eq!(logits, vec![0.0; 8]);
    }

    #[test]
    fn identity_chain_is_linear_in_embedded_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Network::from_specs_uniform(
            &[
                spec(LayerKind::Dense, 12, 6, Activation::Identity),
                spec(LayerKind::Dense, 6, 8, Activation::Identity),
            ],
            &mut rng,
        )
        .unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let (logits, _) = net.forward(&x).unwrap();
        // direct evaluation of W2 (W1 x + b1) + b2
        let (l1, l2) = (&net.layers[0], &net.layers[1]);
        let h: Vec<f64> = (0..6)
            .map(|o| (0..12).map(|i| l1.weights[o * 12 + i] * x[i]).sum::<f64>() + l1.bias[o])
            .collect();
        for o in 0..8 {
            let z = (0..6).map(|i| l2.weights[o * 6 + i] * h[i]).sum::<f64>() + l2.bias[o];
            assert!((z - logits[o]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Network::from_specs_uniform(
            &[
                spec(LayerKind::GeometricLinear, 20, 4, Activation::Tanh),
                spec(LayerKind::HypersphereLinear, 6, 8, Activation::Identity),
            ],
            &mut rng,
        )
        .unwrap();
        let (_, mut trace) = net.forward(&[0.5; 12]).unwrap();
        let mut grads = Gradients::zeros(&net);
        net.backward(&mut trace, &[0.0; 8], &mut grads);
        assert!(grads.iter().all(|g| g == 0.0));
    }

    /// Textbook one-hidden-layer gradient, written out in matrix form.
    #[test]
    fn dense_gradient_matches_textbook_derivation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Network::from_specs_uniform(
            &[
                spec(LayerKind::Dense, 12, 6, Activation::Relu),
                spec(LayerKind::Dense, 6, 8, Activation::Identity),
            ],
            &mut rng,
        )
        .unwrap();
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = 3;
        let mut grads = Gradients::zeros(&net);
        let mut trace = ForwardTrace::for_network(&net);
        net.mean_loss_and_gradients(&x, &[label], &mut grads, &mut trace)
            .unwrap();

        let (w1, b1) = (&net.layers[0].weights, &net.layers[0].bias);
        let (w2, b2) = (&net.layers[1].weights, &net.layers[1].bias);
        let a1: Vec<f64> = (0..6)
            .map(|j| (0..12).map(|i| w1[j * 12 + i] * x[i]).sum::<f64>() + b1[j])
            .collect();
        let h: Vec<f64> = a1.iter().map(|v| v.max(0.0)).collect();
        let z: Vec<f64> = (0..8)
            .map(|k| (0..6).map(|j| w2[k * 6 + j] * h[j]).sum::<f64>() + b2[k])
            .collect();
        let zmax = z.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
        let s: f64 = e.iter().sum();
        let delta2: Vec<f64> = (0..8)
            .map(|k| e[k] / s - if k == label { 1.0 } else { 0.0 })
            .collect();
        let delta1: Vec<f64> = (0..6)
            .map(|j| {
                let back: f64 = (0..8).map(|k| w2[k * 6 + j] * delta2[k]).sum();
                if a1[j] > 0.0 {
                    back
                } else {
                    0.0
                }
            })
            .collect();

        let g = &grads.layers;
        for k in 0..8 {
            assert!((g[1].bias[k] - delta2[k]).abs() < 1e-14);
            for j in 0..6 {
                assert!((g[1].weights[k * 6 + j] - delta2[k] * h[j]).abs() < 1e-14);
            }
        }
        for j in 0..6 {
            assert!((g[0].bias[j] - delta1[j]).abs() < 1e-14);
            for i in 0..12 {
                assert!((g[0].weights[j * 12 + i] - delta1[j] * x[i]).abs() < 1e-14);
            }
        }
    }

    fn two_param_net() -> Network {
        // one Dense 1->1 unit: exactly two parameters (weight, bias)
        Network::from_specs_zeros(&[spec(LayerKind::Dense, 1, 1, Activation::Identity)]).unwrap()
    }

    #[test]
    fn adam_matches_reference_trace() {
        // f(p) = (p0 - 1)^2 + 3 (p1 + 2)^2 from p = 0, lr = 0.1.
        // Reference computed independently with numpy.
        let reference = [
            (0.0999999995, -0.09999999991666668),
            (0.19958777130820715, -0.1998335142212267),
            (0.29841372705396974, -0.2993766084639673),
            (0.3960609394262539, -0.3984951053973204),
            (0.49203634073565794, -0.49704421957030387),
            (0.585763544006338, -0.5948682708853926),
            (0.6765792950608979, -0.691800505612626),
            (0.7637362754789581, -0.7876630582796402),
            (0.8464154399296363, -0.8822670926230968),
            (0.9237508443930877, -0.975413163939639),
        ];
        let mut net = two_param_net();
        let mut adam = Adam::new(
            AdamConfig {
                lr: 0.1,
                ..AdamConfig::default()
            },
            &net,
        );
        let mut grads = Gradients::zeros(&net);
        for (step, (r0, r1)) in reference.iter().enumerate() {
            let p: Vec<f64> = net.params().collect();
            grads.layers[0].weights[0] = 2.0 * (p[0] - 1.0);
            grads.layers[0].bias[0] = 6.0 * (p[1] + 2.0);
            adam.step(&mut net, &grads);
            let p: Vec<f64> = net.params().collect();
            assert!((p[0] - r0).abs() < 1e-14, "step {step}: {} vs {r0}", p[0]);
            assert!((p[1] - r1).abs() < 1e-14, "step {step}: {} vs {r1}", p[1]);
        }
        assert_eq!(adam.step_count(), 10);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let mut net = two_param_net();
        let mut adam = Adam::new(AdamConfig::default(), &net);
        let mut grads = Gradients::zeros(&net);
        grads.layers[0].weights[0] = 0.37;
        grads.layers[0].bias[0] = -250.0;
        adam.step(&mut net, &grads);
        let p: Vec<f64> = net.params().collect();
        assert!((p[0] + 1e-3).abs() < 1e-10);
        assert!((p[1] - 1e-3).abs() < 1e-10);
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::from_specs_uniform(
            &[spec(LayerKind::Dense, 3, 2, Activation::Identity)],
            &mut rng,
        )
        .unwrap();
        let before = net.clone();
        let mut adam = Adam::new(AdamConfig::default(), &net);
        let grads = Gradients::zeros(&net);
        for _ in 0..100 {
            adam.step(&mut net, &grads);
        }
        assert_eq!(net, before);
        assert_eq!(adam.step_count(), 100);
    }
}
