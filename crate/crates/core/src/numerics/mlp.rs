use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{relu, sigmoid};
use super::matrix::DenseMatrix;
use super::params::ParamSet;
use crate::error::{shape_err, Result};

/// Hidden layer widths used by every MLP in the pipeline.
pub const DEFAULT_HIDDEN: [usize; 3] = [128, 64, 32];

/// Half-width of the uniform initialization range.
pub const INIT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

/// Feed-forward network: ReLU hidden layers followed by a single logistic output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

/// Activations recorded by [`mlp_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input fed to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    output: f64,
}

impl MlpCache {
    /// Appends the sign of every hidden pre-activation to `out`.
    pub fn relu_pattern(&self, out: &mut Vec<bool>) {
        let hidden = self.pre.len().saturating_sub(1);
        out.extend(self.pre[..hidden].iter().flatten().map(|&v| v > 0.0));
    }

    pub fn output(&self) -> f64 {
        self.output
    }

    /// Pre-sigmoid value of the output unit.
    pub fn logit(&self) -> f64 {
        self.pre.last().map_or(0.0, |z| z[0])
    }
}

fn layer_dims(input_dim: usize, hidden: &[usize]) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(hidden.len() + 1);
    let mut prev = input_dim;
    for &h in hidden.iter().chain(std::iter::once(&1)) {
        dims.push((h, prev));
        prev = h;
    }
    dims
}

impl MlpParams {
    /// Random init, uniform on `[-INIT_SCALE, INIT_SCALE]`.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let layers = layer_dims(input_dim, hidden)
            .into_iter()
            .map(|(out, inp)| DenseLayer {
                weight: DenseMatrix::uniform(out, inp, INIT_SCALE, rng),
                bias: (0..out)
                    .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
                    .collect(),
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let layers = layer_dims(input_dim, hidden)
            .into_iter()
            .map(|(out, inp)| DenseLayer {
                weight: DenseMatrix::zeros(out, inp),
                bias: vec![0.0; out],
            })
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), &self.hidden_dims())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        let n = self.layers.len();
        self.layers[..n - 1].iter().map(|l| l.bias.len()).collect()
    }
}

impl ParamSet for MlpParams {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

/// Runs the network on one input, returning the output probability and a cache.
pub fn mlp_forward(params: &MlpParams, input: &[f64]) -> Result<(f64, MlpCache)> {
    if input.len() != params.input_dim() {
        return shape_err(format!(
            "mlp input has length {}, expected {}",
            input.len(),
            params.input_dim()
        ));
    }
    let n = params.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut current = input.to_vec();
    for (idx, layer) in params.layers.iter().enumerate() {
        let mut z = layer.bias.clone();
        layer.weight.matvec_acc(&current, &mut z);
        let next: Vec<f64> = if idx + 1 < n {
            z.iter().map(|&v| relu(v)).collect()
        } else {
            Vec::new()
        };
        inputs.push(std::mem::replace(&mut current, next));
        pre.push(z);
    }
    let output = sigmoid(pre[n - 1][0]);
    Ok((
        output,
        MlpCache {
            inputs,
            pre,
            output,
        },
    ))
}

/// Inference-only forward pass.
pub fn mlp_predict(params: &MlpParams, input: &[f64]) -> Result<f64> {
    mlp_forward(params, input).map(|(p, _)| p)
}

/// Backpropagates `upstream = dL/d(output)` through the network.
///
/// Parameter gradients are accumulated into `grads`; the gradient with respect
/// to the network input is returned.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &MlpCache,
    upstream: f64,
    grads: &mut MlpParams,
) -> Result<Vec<f64>> {
    let n = params.layers.len();
    if cache.pre.len() != n
        || grads.layers.len() != n
        || cache.inputs[0].len() != params.input_dim()
        || grads.shape_signature() != params.shape_signature()
    {
        return shape_err("mlp cache or gradient buffer does not match parameters");
    }
    let p = cache.output;
    let mut delta = vec![upstream * p * (1.0 - p)];
    for idx in (0..n).rev() {
        let layer = &params.layers[idx];
        let g = &mut grads.layers[idx];
        g.weight.add_outer(&delta, &cache.inputs[idx]);
        for (gb, d) in g.bias.iter_mut().zip(&delta) {
            *gb += d;
        }
        let mut d_in = vec![0.0; layer.weight.cols()];
        layer.weight.matvec_t_acc(&delta, &mut d_in);
        if idx > 0 {
            for (d, z) in d_in.iter_mut().zip(&cache.pre[idx - 1]) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        delta = d_in;
    }
    Ok(delta)
}
