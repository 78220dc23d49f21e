//! Dense MLP with analytic forward/backward passes.
//!
//! Layers compute `z = x W + b` with ReLU between layers and a linear final
//! layer. Batches are row-major: one sample per row. Weights for layer `l`
//! are stored as `layer{l}.weight` with shape `[in, out]` and
//! `layer{l}.bias` with shape `[out]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::snapshot::ParamSnapshot;

/// Activation between layers. ReLU is the only supported nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

/// Shape description of a dense MLP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        MlpSpec {
            input_dim,
            hidden_dims,
            output_dim,
            activation: Activation::Relu,
        }
    }

    /// Layer widths including input and output: `[in, h0, ..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_dims.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden_dims);
        d.push(self.output_dim);
        d
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::config("mlp dimensions must all be >= 1".to_string()));
        }
        Ok(())
    }

    /// Checks that `params` has exactly the entries this spec requires.
    pub fn check_params(&self, params: &ParamSnapshot) -> Result<()> {
        let dims = self.dims();
        let mut want = Vec::new();
        for l in 0..self.num_layers() {
            want.push((format!("layer{l}.weight"), vec![dims[l], dims[l + 1]]));
            want.push((format!("layer{l}.bias"), vec![dims[l + 1]]));
        }
        if params.entries().len() != want.len() {
            return Err(Error::config(format!(
                "params have {} entries, spec needs {}",
                params.entries().len(),
                want.len()
            )));
        }
        for (e, (name, shape)) in params.entries().iter().zip(&want) {
            if &e.name != name || &e.shape != shape {
                return Err(Error::config(format!(
                    "param entry '{}' {:?} does not match expected '{}' {:?}",
                    e.name, e.shape, name, shape
                )));
            }
        }
        Ok(())
    }
}

/// Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer,
/// applied to both weights and biases.
pub fn init_params<R: Rng>(spec: &MlpSpec, rng: &mut R) -> Result<ParamSnapshot> {
    spec.validate()?;
    let dims = spec.dims();
    let mut snap = ParamSnapshot::new();
    for l in 0..spec.num_layers() {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        let bias: Vec<f64> = (0..fan_out).map(|_| rng.gen_range(-bound..=bound)).collect();
        snap.push(format!("layer{l}.weight"), vec![fan_in, fan_out], weight)?;
        snap.push(format!("layer{l}.bias"), vec![fan_out], bias)?;
    }
    Ok(snap)
}

/// Activation record kept by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    /// Pre-activation output of each layer.
    pre_acts: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.pre_acts.last().expect("cache of a network with no layers")
    }
}

fn affine(x: &Matrix, weight: &[f64], bias: &[f64], in_dim: usize, out_dim: usize) -> Matrix {
    let mut z = Matrix::zeros(x.rows(), out_dim);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let zr = z.row_mut(r);
        zr.copy_from_slice(bias);
        for i in 0..in_dim {
            let xv = xr[i];
            if xv == 0.0 {
                continue;
            }
            let wrow = &weight[i * out_dim..(i + 1) * out_dim];
            for o in 0..out_dim {
                zr[o] += xv * wrow[o];
            }
        }
    }
    z
}

/// Runs the network on a batch. Returns the output (linear final layer) and
/// the activation cache needed by [`mlp_backward`].
pub fn mlp_forward(
    spec: &MlpSpec,
    params: &ParamSnapshot,
    batch: &Matrix,
) -> Result<(Matrix, ForwardCache)> {
    spec.check_params(params)?;
    if batch.cols() != spec.input_dim {
        return Err(Error::config(format!(
            "batch has {} columns, spec input_dim is {}",
            batch.cols(),
            spec.input_dim
        )));
    }
    let dims = spec.dims();
    let mut inputs = Vec::with_capacity(spec.num_layers());
    let mut pre_acts = Vec::with_capacity(spec.num_layers());
    let mut x = batch.clone();
    for l in 0..spec.num_layers() {
        let weight = &params.entries()[2 * l].values;
        let bias = &params.entries()[2 * l + 1].values;
        let z = affine(&x, weight, bias, dims[l], dims[l + 1]);
        inputs.push(x);
        // ReLU on all but the final layer.
        x = if l + 1 < spec.num_layers() {
            let mut a = z.clone();
            for v in a.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            a
        } else {
            z.clone()
        };
        pre_acts.push(z);
    }
    Ok((x, ForwardCache { inputs, pre_acts }))
}

/// Backpropagates `upstream` (gradient of the loss w.r.t. the forward
/// output) through the cached activations. Returns parameter gradients
/// shape-congruent with the params and the gradient w.r.t. the input batch.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &ParamSnapshot,
    cache: &ForwardCache,
    upstream: &Matrix,
) -> Result<(ParamSnapshot, Matrix)> {
    spec.check_params(params)?;
    let out = cache.output();
    if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
        return Err(Error::config(format!(
            "upstream gradient is {}x{}, forward output was {}x{}",
            upstream.rows(),
            upstream.cols(),
            out.rows(),
            out.cols()
        )));
    }
    let dims = spec.dims();
    let mut grads = params.zeros_like();
    let mut g = upstream.clone();
    for l in (0..spec.num_layers()).rev() {
        let x = &cache.inputs[l];
        let (in_dim, out_dim) = (dims[l], dims[l + 1]);
        {
            let entries = grads.entries_mut();
            // dW[i][o] = sum_r x[r][i] * g[r][o]; db[o] = sum_r g[r][o]
            let (wslot, bslot) = {
                let (a, b) = entries.split_at_mut(2 * l + 1);
                (&mut a[2 * l].values, &mut b[0].values)
            };
            for r in 0..g.rows() {
                let xr = x.row(r);
                let gr = g.row(r);
                for i in 0..in_dim {
                    let xv = xr[i];
                    if xv == 0.0 {
                        continue;
                    }
                    let wrow = &mut wslot[i * out_dim..(i + 1) * out_dim];
                    for o in 0..out_dim {
                        wrow[o] += xv * gr[o];
                    }
                }
                for o in 0..out_dim {
                    bslot[o] += gr[o];
                }
            }
        }
        // dx = g W^T, masked by ReLU' of the previous layer's pre-activation.
        let weight = &params.entries()[2 * l].values;
        let mut gx = Matrix::zeros(g.rows(), in_dim);
        for r in 0..g.rows() {
            let gr = g.row(r);
            let gxr = gx.row_mut(r);
            for i in 0..in_dim {
                let wrow = &weight[i * out_dim..(i + 1) * out_dim];
                let mut s = 0.0;
                for o in 0..out_dim {
                    s += gr[o] * wrow[o];
                }
                gxr[i] = s;
            }
        }
        if l > 0 {
            let pre = &cache.pre_acts[l - 1];
            for r in 0..gx.rows() {
                let gxr = gx.row_mut(r);
                let pr = pre.row(r);
                for i in 0..in_dim {
                    if pr[i] <= 0.0 {
                        gxr[i] = 0.0;
                    }
                }
            }
        }
        g = gx;
    }
    Ok((grads, g))
}
