use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::xavier_uniform;
use super::{Gradients, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Declarative description of one layer, as written in model configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
    },
    MaxPool1d {
        size: usize,
        /// Defaults to `size` (non-overlapping windows).
        #[serde(default)]
        stride: Option<usize>,
    },
    Dense {
        units: usize,
    },
    Relu,
    Flatten,
    Softmax,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1d {
        weight: ParamId,
        bias: ParamId,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    MaxPool1d {
        size: usize,
        stride: usize,
    },
    Dense {
        weight: ParamId,
        bias: ParamId,
        inputs: usize,
        units: usize,
    },
    Relu,
    Flatten,
    Softmax,
}

impl Layer {
    pub fn params(&self) -> Vec<ParamId> {
        match self {
            Layer::Conv1d { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                vec![*weight, *bias]
            }
            _ => Vec::new(),
        }
    }
}

/// Values a layer keeps from its forward pass for the backward pass.
#[derive(Debug, Clone)]
pub enum Cache {
    Input(Tensor),
    Argmax { indices: Vec<usize>, input_shape: Vec<usize> },
    Shape(Vec<usize>),
    Output(Tensor),
}

pub fn conv1d_output_len(len: usize, kernel: usize, stride: usize) -> Option<usize> {
    (kernel >= 1 && stride >= 1 && kernel <= len).then(|| (len - kernel) / stride + 1)
}

/// Dot product with four independent accumulators so the compiler can
/// vectorize the reduction.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Valid-padding cross-correlation of `input [C_in × L]` with
/// `weights [C_out × C_in × K]`.
pub fn conv1d_forward(input: &Tensor, weights: &Tensor, bias: &Tensor, stride: usize) -> Result<Tensor> {
    let (c_in, len) = match input.shape() {
        [c, l] => (*c, *l),
        other => {
            return Err(Error::InvalidShape(format!(
                "conv1d input must be [channels × length], got {other:?}"
            )))
        }
    };
    let (c_out, kernel) = match weights.shape() {
        [o, i, k] if *i == c_in => (*o, *k),
        other => {
            return Err(Error::InvalidShape(format!(
                "conv1d input {:?} incompatible with weights {other:?}",
                input.shape()
            )))
        }
    };
    bias.ensure_shape(&[c_out])?;
    let out_len = conv1d_output_len(len, kernel, stride).ok_or_else(|| {
        Error::InvalidShape(format!(
            "conv1d input {:?} shorter than weights {:?} (stride {stride})",
            input.shape(),
            weights.shape()
        ))
    })?;

    let x = input.data();
    let w = weights.data();
    let mut out = vec![0.0; c_out * out_len];
    for o in 0..c_out {
        let row = &mut out[o * out_len..(o + 1) * out_len];
        row.fill(bias.data()[o]);
        for i in 0..c_in {
            let wk = &w[(o * c_in + i) * kernel..(o * c_in + i + 1) * kernel];
            let xi = &x[i * len..(i + 1) * len];
            for (t, acc) in row.iter_mut().enumerate() {
                let window = &xi[t * stride..t * stride + kernel];
                *acc += dot(wk, window);
            }
        }
    }
    Tensor::new(vec![c_out, out_len], out)
}

fn conv1d_backward(
    input: &Tensor,
    weights: &Tensor,
    stride: usize,
    grad_out: &Tensor,
    grad_w: &mut Tensor,
    grad_b: &mut Tensor,
) -> Tensor {
    let (c_in, len) = (input.shape()[0], input.shape()[1]);
    let (c_out, kernel) = (weights.shape()[0], weights.shape()[2]);
    let out_len = grad_out.shape()[1];
    let x = input.data();
    let w = weights.data();
    let g = grad_out.data();
    let mut grad_in = vec![0.0; c_in * len];
    let gw = grad_w.data_mut();
    for o in 0..c_out {
        let go = &g[o * out_len..(o + 1) * out_len];
        grad_b.data_mut()[o] += go.iter().sum::<f64>();
        for i in 0..c_in {
            let base = (o * c_in + i) * kernel;
            let xi = &x[i * len..(i + 1) * len];
            let gi = &mut grad_in[i * len..(i + 1) * len];
            let wk = &w[base..base + kernel];
            let gwk = &mut gw[base..base + kernel];
            for (t, &gt) in go.iter().enumerate() {
                if gt == 0.0 {
                    continue;
                }
                let start = t * stride;
                for k in 0..kernel {
                    gwk[k] += gt * xi[start + k];
                    gi[start + k] += gt * wk[k];
                }
            }
        }
    }
    Tensor::new(vec![c_in, len], grad_in).expect("input shape")
}

/// Max-pooling over the last axis; ties go to the lowest index.
pub fn maxpool1d_forward(input: &Tensor, size: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let (c, len) = match input.shape() {
        [c, l] => (*c, *l),
        other => {
            return Err(Error::InvalidShape(format!(
                "maxpool input must be [channels × length], got {other:?}"
            )))
        }
    };
    let out_len = conv1d_output_len(len, size, stride).ok_or_else(|| {
        Error::InvalidShape(format!("pool size {size} exceeds length {len}"))
    })?;
    let x = input.data();
    let mut out = Vec::with_capacity(c * out_len);
    let mut idx = Vec::with_capacity(c * out_len);
    for ch in 0..c {
        for t in 0..out_len {
            let start = ch * len + t * stride;
            let mut best = start;
            for j in start + 1..start + size {
                if x[j] > x[best] {
                    best = j;
                }
            }
            out.push(x[best]);
            idx.push(best);
        }
    }
    Ok((Tensor::new(vec![c, out_len], out)?, idx))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl Layer {
    fn build<R: Rng>(
        spec: &LayerSpec,
        input_shape: &[usize],
        store: &mut ParamStore,
        name: &str,
        rng: &mut R,
    ) -> Result<(Layer, Vec<usize>)> {
        match spec {
            LayerSpec::Conv1d {
                out_channels,
                kernel,
                stride,
            } => {
                let (c_in, len) = match input_shape {
                    [c, l] => (*c, *l),
                    other => {
                        return Err(Error::InvalidShape(format!(
                            "{name}: conv1d expects [channels × length] input, got {other:?}"
                        )))
                    }
                };
                let out_len = conv1d_output_len(len, *kernel, *stride).ok_or_else(|| {
                    Error::InvalidShape(format!(
                        "{name}: kernel {kernel} / stride {stride} invalid for length {len}"
                    ))
                })?;
                if *out_channels == 0 {
                    return Err(Error::InvalidShape(format!("{name}: zero output channels")));
                }
                let w = xavier_uniform(&[*out_channels, c_in, *kernel], rng)?;
                let weight = store.add(format!("{name}.weight"), w)?;
                let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[*out_channels]))?;
                Ok((
                    Layer::Conv1d {
                        weight,
                        bias,
                        in_channels: c_in,
                        out_channels: *out_channels,
                        kernel: *kernel,
                        stride: *stride,
                    },
                    vec![*out_channels, out_len],
                ))
            }
            LayerSpec::MaxPool1d { size, stride } => {
                let stride = stride.unwrap_or(*size);
                let (c, len) = match input_shape {
                    [c, l] => (*c, *l),
                    other => {
                        return Err(Error::InvalidShape(format!(
                            "{name}: maxpool expects [channels × length] input, got {other:?}"
                        )))
                    }
                };
                let out_len = conv1d_output_len(len, *size, stride).ok_or_else(|| {
                    Error::InvalidShape(format!("{name}: pool {size} invalid for length {len}"))
                })?;
                Ok((Layer::MaxPool1d { size: *size, stride }, vec![c, out_len]))
            }
            LayerSpec::Dense { units } => {
                let inputs = match input_shape {
                    [n] => *n,
                    other => {
                        return Err(Error::InvalidShape(format!(
                            "{name}: dense expects a flat input, got {other:?}"
                        )))
                    }
                };
                if *units == 0 {
                    return Err(Error::InvalidShape(format!("{name}: zero units")));
                }
                let w = xavier_uniform(&[*units, inputs], rng)?;
                let weight = store.add(format!("{name}.weight"), w)?;
                let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[*units]))?;
                Ok((
                    Layer::Dense {
                        weight,
                        bias,
                        inputs,
                        units: *units,
                    },
                    vec![*units],
                ))
            }
            LayerSpec::Relu => Ok((Layer::Relu, input_shape.to_vec())),
            LayerSpec::Flatten => Ok((Layer::Flatten, vec![input_shape.iter().product()])),
            LayerSpec::Softmax => match input_shape {
                [_] => Ok((Layer::Softmax, input_shape.to_vec())),
                other => Err(Error::InvalidShape(format!(
                    "{name}: softmax expects a flat input, got {other:?}"
                ))),
            },
        }
    }

    pub fn forward(&self, store: &ParamStore, input: &Tensor) -> Result<(Tensor, Cache)> {
        match self {
            Layer::Conv1d {
                weight,
                bias,
                stride,
                ..
            } => {
                let out = conv1d_forward(input, store.value(*weight), store.value(*bias), *stride)?;
                Ok((out, Cache::Input(input.clone())))
            }
            Layer::MaxPool1d { size, stride } => {
                let (out, indices) = maxpool1d_forward(input, *size, *stride)?;
                Ok((
                    out,
                    Cache::Argmax {
                        indices,
                        input_shape: input.shape().to_vec(),
                    },
                ))
            }
            Layer::Dense {
                weight,
                bias,
                inputs,
                units,
            } => {
                input.ensure_shape(&[*inputs])?;
                let w = store.value(*weight).data();
                let b = store.value(*bias).data();
                let x = input.data();
                let out = (0..*units)
                    .map(|o| b[o] + dot(&w[o * inputs..(o + 1) * inputs], x))
                    .collect();
                Ok((Tensor::vector(out), Cache::Input(input.clone())))
            }
            Layer::Relu => {
                let mut out = input.clone();
                out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                Ok((out, Cache::Input(input.clone())))
            }
            Layer::Flatten => {
                let shape = input.shape().to_vec();
                let n = input.len();
                Ok((input.clone().reshape(&[n])?, Cache::Shape(shape)))
            }
            Layer::Softmax => {
                if input.shape().len() != 1 {
                    return Err(Error::InvalidShape(format!(
                        "softmax expects a flat input, got {:?}",
                        input.shape()
                    )));
                }
                let out = Tensor::vector(softmax(input.data()));
                Ok((out.clone(), Cache::Output(out)))
            }
        }
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the layer input.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &Cache,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor> {
        match (self, cache) {
            (
                Layer::Conv1d {
                    weight,
                    bias,
                    stride,
                    ..
                },
                Cache::Input(input),
            ) => {
                let w = store.value(*weight);
                let mut gw = std::mem::replace(grads.get_mut(*weight), Tensor::zeros(&[1]));
                let mut gb = std::mem::replace(grads.get_mut(*bias), Tensor::zeros(&[1]));
                let gi = conv1d_backward(input, w, *stride, grad_out, &mut gw, &mut gb);
                *grads.get_mut(*weight) = gw;
                *grads.get_mut(*bias) = gb;
                Ok(gi)
            }
            (Layer::MaxPool1d { .. }, Cache::Argmax { indices, input_shape }) => {
                let mut gi = Tensor::zeros(input_shape);
                for (&idx, &g) in indices.iter().zip(grad_out.data()) {
                    gi.data_mut()[idx] += g;
                }
                Ok(gi)
            }
            (
                Layer::Dense {
                    weight,
                    bias,
                    inputs,
                    units,
                },
                Cache::Input(input),
            ) => {
                let w = store.value(*weight).data();
                let x = input.data();
                let g = grad_out.data();
                let mut gi = vec![0.0; *inputs];
                {
                    let gw = grads.get_mut(*weight).data_mut();
                    for o in 0..*units {
                        let go = g[o];
                        if go == 0.0 {
                            continue;
                        }
                        let wrow = &w[o * inputs..(o + 1) * inputs];
                        let gwrow = &mut gw[o * inputs..(o + 1) * inputs];
                        for j in 0..*inputs {
                            gwrow[j] += go * x[j];
                            gi[j] += go * wrow[j];
                        }
                    }
                }
                let gb = grads.get_mut(*bias).data_mut();
                for o in 0..*units {
                    gb[o] += g[o];
                }
                Ok(Tensor::vector(gi))
            }
            (Layer::Relu, Cache::Input(input)) => {
                let mut gi = grad_out.clone();
                for (g, x) in gi.data_mut().iter_mut().zip(input.data()) {
                    if *x <= 0.0 {
                        *g = 0.0;
                    }
                }
                Ok(gi)
            }
            (Layer::Flatten, Cache::Shape(shape)) => grad_out.clone().reshape(shape),
            (Layer::Softmax, Cache::Output(p)) => {
                let p = p.data();
                let g = grad_out.data();
                let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
                Ok(Tensor::vector(
                    p.iter().zip(g).map(|(pi, gi)| pi * (gi - dot)).collect(),
                ))
            }
            _ => Err(Error::State("layer cache does not match layer kind".into())),
        }
    }
}

/// A straight stack of layers sharing one [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential {
    layers: Vec<Layer>,
    names: Vec<String>,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
}

/// Forward-pass record for one sample through a [`Sequential`].
#[derive(Debug, Clone)]
pub struct Trace {
    caches: Vec<Cache>,
}

impl Sequential {
    /// Builds the stack, registering parameters as `{prefix}.{kind}{k}.weight|bias`
    /// where `k` counts layers of that kind within the stack.
    pub fn build<R: Rng>(
        specs: &[LayerSpec],
        input_shape: &[usize],
        store: &mut ParamStore,
        prefix: &str,
        rng: &mut R,
    ) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        let mut names = Vec::with_capacity(specs.len());
        let mut counts = [0usize; 6];
        for spec in specs {
            let (slot, kind) = match spec {
                LayerSpec::Conv1d { .. } => (0, "conv"),
                LayerSpec::MaxPool1d { .. } => (1, "pool"),
                LayerSpec::Dense { .. } => (2, "dense"),
                LayerSpec::Relu => (3, "relu"),
                LayerSpec::Flatten => (4, "flatten"),
                LayerSpec::Softmax => (5, "softmax"),
            };
            let name = format!("{prefix}.{kind}{}", counts[slot]);
            counts[slot] += 1;
            let (layer, out) = Layer::build(spec, &shape, store, &name, rng)?;
            layers.push(layer);
            names.push(name);
            shape = out;
        }
        Ok(Self {
            layers,
            names,
            input_shape: input_shape.to_vec(),
            output_shape: shape,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_names(&self) -> &[String] {
        &self.names
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn forward(&self, store: &ParamStore, input: &Tensor) -> Result<(Tensor, Trace)> {
        input.ensure_shape(&self.input_shape)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward(store, &x)?;
            caches.push(cache);
            x = y;
        }
        Ok((x, Trace { caches }))
    }

    pub fn infer(&self, store: &ParamStore, input: &Tensor) -> Result<Tensor> {
        self.forward(store, input).map(|(y, _)| y)
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        trace: &Trace,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor> {
        if trace.caches.len() != self.layers.len() {
            return Err(Error::State("trace does not belong to this stack".into()));
        }
        grad_out.ensure_shape(&self.output_shape)?;
        let mut g = grad_out.clone();
        for (layer, cache) in self.layers.iter().zip(&trace.caches).rev() {
            g = layer.backward(store, cache, &g, grads)?;
        }
        Ok(g)
    }
}
