use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense layer, `weights` row-major with shape `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Multilayer perceptron with `tanh` hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations recorded by [`Mlp::trace`], kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input; `activations[i + 1]` the output of layer `i`.
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace always holds the input")
    }
}

impl Mlp {
    /// Random network with weights and biases uniform in `±1/sqrt(fan_in)`.
    ///
    /// # Panics
    /// If fewer than two layer sizes are given or any size is zero.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_init(layer_sizes, |fan_in| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            rng.gen_range(-bound..=bound)
        })
    }

    pub fn zeros(layer_sizes: &[usize]) -> Self {
        Self::with_init(layer_sizes, |_| 0.0)
    }

    fn with_init(layer_sizes: &[usize], mut init: impl FnMut(usize) -> f64) -> Self {
        assert!(layer_sizes.len() >= 2, "need at least input and output sizes");
        assert!(layer_sizes.iter().all(|&n| n > 0), "layer sizes must be positive");
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                Layer {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs).map(|_| init(inputs)).collect(),
                    bias: (0..outputs).map(|_| init(inputs)).collect(),
                }
            })
            .collect();
        Self { layers }
    }

    /// Builds a network from explicit layers, checking shape consistency.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension {
                expected: 1,
                actual: 0,
            });
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.inputs * layer.outputs {
                return Err(Error::Dimension {
                    expected: layer.inputs * layer.outputs,
                    actual: layer.weights.len(),
                });
            }
            if layer.bias.len() != layer.outputs {
                return Err(Error::Dimension {
                    expected: layer.outputs,
                    actual: layer.bias.len(),
                });
            }
            if i > 0 && layers[i - 1].outputs != layer.inputs {
                return Err(Error::Dimension {
                    expected: layers[i - 1].outputs,
                    actual: layer.inputs,
                });
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteData);
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Flattened parameters: per layer, weights row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params(), "parameter vector length");
        let mut at = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(Error::Dimension {
                expected: self.input_size(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    /// Scalar output of a single-output network. Panics on shape mismatch.
    pub fn eval_scalar(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(self.output_size(), 1);
        self.forward_unchecked(x)[0]
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut current = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            current = affine(layer, &current);
            if i < last {
                current.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        current
    }

    /// Forward pass keeping every activation.
    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        Ok(self.trace_unchecked(x))
    }

    pub(crate) fn trace_unchecked(&self, x: &[f64]) -> Trace {
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, activations.last().unwrap());
            if i < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        Trace { activations }
    }

    /// Reverse-mode pass. Given `dL/dy` in `out_grad`, adds `dL/dθ` into
    /// `param_grad` (when provided, laid out as [`Mlp::params`]) and returns
    /// `dL/dx`.
    pub fn backward(&self, trace: &Trace, out_grad: &[f64], mut param_grad: Option<&mut [f64]>) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut delta = out_grad.to_vec();
        // offsets of each layer's parameter block
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for layer in &self.layers {
            offsets.push(at);
            at += layer.num_params();
        }
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let out = &trace.activations[i + 1];
            if i < last {
                for (d, &a) in delta.iter_mut().zip(out) {
                    *d *= 1.0 - a * a;
                }
            }
            let input = &trace.activations[i];
            if let Some(grad) = param_grad.as_deref_mut() {
                let base = offsets[i];
                for r in 0..layer.outputs {
                    let d = delta[r];
                    let row = &mut grad[base + r * layer.inputs..base + (r + 1) * layer.inputs];
                    for (g, &xv) in row.iter_mut().zip(input) {
                        *g += d * xv;
                    }
                    grad[base + layer.weights.len() + r] += d;
                }
            }
            let mut prev = vec![0.0; layer.inputs];
            for (&d, row) in delta.iter().zip(layer.weights.chunks_exact(layer.inputs)) {
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            delta = prev;
        }
        delta
    }

    /// Gradient of `0.5 * ||y - target||^2` with respect to all parameters.
    pub fn gradient(&self, x: &[f64], target: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if target.len() != self.output_size() {
            return Err(Error::Dimension {
                expected: self.output_size(),
                actual: target.len(),
            });
        }
        let trace = self.trace_unchecked(x);
        let residual: Vec<f64> = trace.output().iter().zip(target).map(|(y, t)| y - t).collect();
        let mut grad = vec![0.0; self.num_params()];
        self.backward(&trace, &residual, Some(&mut grad));
        Ok(grad)
    }

    /// Scalar output together with its gradient with respect to the inputs.
    pub fn eval_with_input_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let trace = self.trace_unchecked(x);
        let y = trace.output()[0];
        let dx = self.backward(&trace, &[1.0], None);
        (y, dx)
    }
}

fn affine(layer: &Layer, x: &[f64]) -> Vec<f64> {
    (0..layer.outputs)
        .map(|r| {
            let row = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
            row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + layer.bias[r]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 6, 2]);
        assert_eq!(net.forward(&[1.0, -2.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_affine_layer() {
        let net = Mlp::from_layers(vec![Layer {
            inputs: 1,
            outputs: 1,
            weights: vec![2.0],
            bias: vec![1.0],
        }])
        .unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = Mlp::new(&[8, 6, 1], 1);
        assert!(matches!(net.forward(&[0.0; 7]), Err(Error::Dimension { expected: 8, actual: 7 })));
        assert!(net.gradient(&[0.0; 8], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn linear_unit_gradient_by_hand() {
        // L = 0.5 (w x + b - t)^2 with w = 1, b = 0, x = 1, t = 0
        let net = Mlp::from_layers(vec![Layer {
            inputs: 1,
            outputs: 1,
            weights: vec![1.0],
            bias: vec![0.0],
        }])
        .unwrap();
        assert_eq!(net.gradient(&[1.0], &[0.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn exact_fit_has_zero_gradient() {
        let net = Mlp::new(&[4, 6, 2], 9);
        let x = [0.1, -0.4, 0.3, 0.9];
        let y = net.forward(&x).unwrap();
        assert!(net.gradient(&x, &y).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let net = Mlp::new(&[16, 6, 1], 3);
        let bound = 1.0 / 4.0;
        assert!(net.layers()[0].weights.iter().all(|w| w.abs() <= bound));
        assert_eq!(net.layer_sizes(), vec![16, 6, 1]);
    }

    #[test]
    fn params_round_trip() {
        let net = Mlp::new(&[3, 5, 2], 4);
        let mut other = Mlp::zeros(&[3, 5, 2]);
        other.set_params(&net.params());
        assert_eq!(net, other);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let net = Mlp::new(&[5, 6, 1], 11);
        let x = [0.2, -0.7, 0.5, 0.05, -0.3];
        let (_, dx) = net.eval_with_input_grad(&x);
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (net.eval_scalar(&xp) - net.eval_scalar(&xm)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-8, "input {i}: {fd} vs {}", dx[i]);
        }
    }
}
