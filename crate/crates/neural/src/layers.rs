//! Layer primitives with explicit forward and backward passes.
//!
//! Every layer works on a batch tensor whose leading axis is the example
//! index. Forward returns the output plus whatever the backward pass needs;
//! parameters are only read, so inference is a pure function of the weights.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, sigmoid, Tensor};
use crate::{Error, Result};

pub const DEFAULT_BN_MOMENTUM: f64 = 0.99;
pub const DEFAULT_BN_EPS: f64 = 1e-5;
pub const DEFAULT_PRELU_ALPHA: f64 = 0.25;
pub const EMBEDDING_INIT: f64 = 0.05;

/// `Train` samples dropout masks and uses batch statistics; `Infer` is
/// deterministic with running statistics; `Check` keeps batch statistics
/// but disables every random mask, for finite-difference checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Infer,
    Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Embedding {
        vocab_size: usize,
        dim: usize,
        trainable: bool,
    },
    Lstm {
        input_dim: usize,
        units: usize,
        recurrent_dropout: f64,
    },
    /// Per-step affine map followed by ReLU.
    TimeDistributedDense { input_dim: usize, units: usize },
    LambdaSum,
    /// Same-padded 1-D convolution followed by ReLU.
    Conv1d {
        input_dim: usize,
        filters: usize,
        kernel: usize,
    },
    GlobalMaxPool,
    Dense { input_dim: usize, units: usize },
    BatchNorm { width: usize, momentum: f64, eps: f64 },
    Prelu { width: usize },
    Dropout { rate: f64 },
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

fn param(name: &str, shape: Vec<usize>, trainable: bool) -> ParamShape {
    ParamShape {
        name: name.into(),
        shape,
        trainable,
    }
}

fn shape_err(kind: &str, expected: &str, got: &[usize]) -> Error {
    Error::Shape(format!("{kind} expects {expected} per example, got {got:?}"))
}

impl LayerSpec {
    pub fn batch_norm(width: usize) -> Self {
        LayerSpec::BatchNorm {
            width,
            momentum: DEFAULT_BN_MOMENTUM,
            eps: DEFAULT_BN_EPS,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Embedding { .. } => "embedding",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::TimeDistributedDense { .. } => "time_distributed_dense",
            LayerSpec::LambdaSum => "lambda_sum",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::GlobalMaxPool => "global_max_pool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::BatchNorm { .. } => "batch_norm",
            LayerSpec::Prelu { .. } => "prelu",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Sigmoid => "sigmoid",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Invalid(format!("{}: {name} must be at least 1", self.kind())))
            } else {
                Ok(())
            }
        };
        let rate = |name: &str, r: f64| {
            if (0.0..1.0).contains(&r) {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{}: {name} {r} is outside [0, 1)", self.kind())))
            }
        };
        match *self {
            LayerSpec::Embedding { vocab_size, dim, .. } => {
                positive("vocab_size", vocab_size)?;
                positive("dim", dim)
            }
            LayerSpec::Lstm {
                input_dim,
                units,
                recurrent_dropout,
            } => {
                positive("input_dim", input_dim)?;
                positive("units", units)?;
                rate("recurrent_dropout", recurrent_dropout)
            }
            LayerSpec::TimeDistributedDense { input_dim, units } | LayerSpec::Dense { input_dim, units } => {
                positive("input_dim", input_dim)?;
                positive("units", units)
            }
            LayerSpec::Conv1d {
                input_dim,
                filters,
                kernel,
            } => {
                positive("input_dim", input_dim)?;
                positive("filters", filters)?;
                positive("kernel", kernel)
            }
            LayerSpec::BatchNorm { width, momentum, eps } => {
                positive("width", width)?;
                rate("momentum", momentum)?;
                if eps > 0.0 && eps.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Invalid(format!("batch_norm: eps {eps} must be positive")))
                }
            }
            LayerSpec::Prelu { width } => positive("width", width),
            LayerSpec::Dropout { rate: r } => rate("rate", r),
            LayerSpec::LambdaSum | LayerSpec::GlobalMaxPool | LayerSpec::Sigmoid => Ok(()),
        }
    }

    /// Per-example output shape for a per-example input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let kind = self.kind();
        match *self {
            LayerSpec::Embedding { dim, .. } => match input {
                [t] => Ok(vec![*t, dim]),
                _ => Err(shape_err(kind, "[steps]", input)),
            },
            LayerSpec::Lstm { input_dim, units, .. } => match input {
                [t, d] if *d == input_dim && *t > 0 => Ok(vec![units]),
                _ => Err(shape_err(kind, &format!("[steps, {input_dim}]"), input)),
            },
            LayerSpec::TimeDistributedDense { input_dim, units } => match input {
                [t, d] if *d == input_dim => Ok(vec![*t, units]),
                _ => Err(shape_err(kind, &format!("[steps, {input_dim}]"), input)),
            },
            LayerSpec::Conv1d { input_dim, filters, .. } => match input {
                [t, d] if *d == input_dim => Ok(vec![*t, filters]),
                _ => Err(shape_err(kind, &format!("[steps, {input_dim}]"), input)),
            },
            LayerSpec::LambdaSum => match input {
                [_, w] => Ok(vec![*w]),
                _ => Err(shape_err(kind, "[steps, width]", input)),
            },
            LayerSpec::GlobalMaxPool => match input {
                [t, w] if *t > 0 => Ok(vec![*w]),
                _ => Err(shape_err(kind, "[steps, width]", input)),
            },
            LayerSpec::Dense { input_dim, units } => match input {
                [d] if *d == input_dim => Ok(vec![units]),
                _ => Err(shape_err(kind, &format!("[{input_dim}]"), input)),
            },
            LayerSpec::BatchNorm { width, .. } | LayerSpec::Prelu { width } => match input {
                [w] if *w == width => Ok(vec![width]),
                _ => Err(shape_err(kind, &format!("[{width}]"), input)),
            },
            LayerSpec::Dropout { .. } | LayerSpec::Sigmoid => Ok(input.to_vec()),
        }
    }

    pub fn param_shapes(&self) -> Vec<ParamShape> {
        match *self {
            LayerSpec::Embedding {
                vocab_size,
                dim,
                trainable,
            } => vec![param("weight", vec![vocab_size, dim], trainable)],
            LayerSpec::Lstm { input_dim, units, .. } => vec![
                param("kernel", vec![input_dim, 4 * units], true),
                param("recurrent_kernel", vec![units, 4 * units], true),
                param("bias", vec![4 * units], true),
            ],
            LayerSpec::TimeDistributedDense { input_dim, units } | LayerSpec::Dense { input_dim, units } => vec![
                param("kernel", vec![input_dim, units], true),
                param("bias", vec![units], true),
            ],
            LayerSpec::Conv1d {
                input_dim,
                filters,
                kernel,
            } => vec![
                param("kernel", vec![kernel, input_dim, filters], true),
                param("bias", vec![filters], true),
            ],
            LayerSpec::BatchNorm { width, .. } => vec![
                param("gamma", vec![width], true),
                param("beta", vec![width], true),
                param("moving_mean", vec![width], false),
                param("moving_variance", vec![width], false),
            ],
            LayerSpec::Prelu { width } => vec![param("alpha", vec![width], true)],
            LayerSpec::LambdaSum | LayerSpec::GlobalMaxPool | LayerSpec::Dropout { .. } | LayerSpec::Sigmoid => {
                Vec::new()
            }
        }
    }

    /// `(trainable, non_trainable)` scalar counts.
    pub fn param_count(&self) -> (usize, usize) {
        self.param_shapes().iter().fold((0, 0), |(t, f), p| {
            let n: usize = p.shape.iter().product();
            if p.trainable {
                (t + n, f)
            } else {
                (t, f + n)
            }
        })
    }
}

fn glorot(rng: &mut ChaCha8Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..=limit)).collect()
}

/// A layer specification together with its parameter tensors, in the order
/// of [`LayerSpec::param_shapes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    params: Vec<Tensor>,
}

pub(crate) enum Cache {
    None,
    Embedding(Vec<usize>),
    Lstm(LstmCache),
    /// Layer input and post-activation output.
    Affine { input: Tensor, output: Tensor },
    Conv { cols: Vec<f64>, output: Tensor },
    MaxPool { argmax: Vec<usize>, steps: usize },
    BatchNorm { xhat: Vec<f64>, inv_std: Vec<f64>, batch: Option<(Vec<f64>, Vec<f64>)> },
    Prelu(Tensor),
    Mask(Vec<f64>),
    Sigmoid(Tensor),
}

pub(crate) struct LstmCache {
    input: Tensor,
    mask: Option<Vec<f64>>,
    /// Per step: masked previous hidden state, previous cell, activated
    /// gates `[i f g o]`, new cell state and its tanh.
    steps: Vec<LstmStep>,
}

struct LstmStep {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn dropout_mask(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

impl Layer {
    pub fn new(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let mut params: Vec<Tensor> = spec
            .param_shapes()
            .into_iter()
            .map(|p| Tensor::zeros(p.shape))
            .collect();
        match spec {
            LayerSpec::Embedding { .. } => {
                for v in params[0].data_mut() {
                    *v = rng.gen_range(-EMBEDDING_INIT..=EMBEDDING_INIT);
                }
            }
            LayerSpec::Lstm { input_dim, units, .. } => {
                let k = glorot(rng, input_dim * 4 * units, input_dim, 4 * units);
                let r = glorot(rng, units * 4 * units, units, 4 * units);
                params[0].data_mut().copy_from_slice(&k);
                params[1].data_mut().copy_from_slice(&r);
                params[2].data_mut()[units..2 * units].fill(1.0);
            }
            LayerSpec::TimeDistributedDense { input_dim, units } | LayerSpec::Dense { input_dim, units } => {
                let k = glorot(rng, input_dim * units, input_dim, units);
                params[0].data_mut().copy_from_slice(&k);
            }
            LayerSpec::Conv1d {
                input_dim,
                filters,
                kernel,
            } => {
                let k = glorot(rng, kernel * input_dim * filters, kernel * input_dim, kernel * filters);
                params[0].data_mut().copy_from_slice(&k);
            }
            LayerSpec::BatchNorm { .. } => {
                params[0].data_mut().fill(1.0);
                params[3].data_mut().fill(1.0);
            }
            LayerSpec::Prelu { .. } => params[0].data_mut().fill(DEFAULT_PRELU_ALPHA),
            LayerSpec::LambdaSum | LayerSpec::GlobalMaxPool | LayerSpec::Dropout { .. } | LayerSpec::Sigmoid => {}
        }
        Ok(Layer { spec, params })
    }

    pub(crate) fn zeroed(spec: LayerSpec) -> Result<Self> {
        spec.validate()?;
        let params = spec
            .param_shapes()
            .into_iter()
            .map(|p| Tensor::zeros(p.shape))
            .collect();
        Ok(Layer { spec, params })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub(crate) fn forward(&self, x: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<(Tensor, Cache)> {
        let b = x.rows();
        let out_shape = {
            let mut s = vec![b];
            s.extend(self.spec.output_shape(&x.shape()[1..])?);
            s
        };
        Ok(match self.spec {
            LayerSpec::Embedding { vocab_size, dim, .. } => {
                let w = self.params[0].data();
                let mut idx = Vec::with_capacity(x.len());
                for &v in x.data() {
                    if v < 0.0 || v.fract() != 0.0 || v >= vocab_size as f64 {
                        return Err(Error::Shape(format!(
                            "token index {v} is not an integer below vocab size {vocab_size}"
                        )));
                    }
                    idx.push(v as usize);
                }
                let mut out = Vec::with_capacity(idx.len() * dim);
                for &i in &idx {
                    out.extend_from_slice(&w[i * dim..(i + 1) * dim]);
                }
                (Tensor::new(out_shape, out)?, Cache::Embedding(idx))
            }
            LayerSpec::Lstm {
                input_dim: d,
                units: u,
                recurrent_dropout,
            } => {
                let steps = x.shape()[1];
                let mask = (mode == Mode::Train && recurrent_dropout > 0.0)
                    .then(|| dropout_mask(rng, b * u, recurrent_dropout));
                let (kern, rec, bias) = (self.params[0].data(), self.params[1].data(), self.params[2].data());
                let mut h = vec![0.0; b * u];
                let mut c = vec![0.0; b * u];
                let mut cache = Vec::with_capacity(steps);
                let mut xt = vec![0.0; b * d];
                for t in 0..steps {
                    for bi in 0..b {
                        let src = (bi * steps + t) * d;
                        xt[bi * d..(bi + 1) * d].copy_from_slice(&x.data()[src..src + d]);
                    }
                    let h_prev = match &mask {
                        Some(m) => h.iter().zip(m).map(|(a, m)| a * m).collect(),
                        None => h.clone(),
                    };
                    let mut z: Vec<f64> = (0..b).flat_map(|_| bias.iter().copied()).collect();
                    matmul_acc(&mut z, &xt, kern, b, d, 4 * u);
                    matmul_acc(&mut z, &h_prev, rec, b, u, 4 * u);
                    let mut tanh_c = vec![0.0; b * u];
                    let c_prev = c.clone();
                    for bi in 0..b {
                        let g = &mut z[bi * 4 * u..(bi + 1) * 4 * u];
                        for j in 0..u {
                            g[j] = sigmoid(g[j]);
                            g[u + j] = sigmoid(g[u + j]);
                            g[2 * u + j] = g[2 * u + j].tanh();
                            g[3 * u + j] = sigmoid(g[3 * u + j]);
                            let k = bi * u + j;
                            c[k] = g[u + j] * c_prev[k] + g[j] * g[2 * u + j];
                            tanh_c[k] = c[k].tanh();
                            h[k] = g[3 * u + j] * tanh_c[k];
                        }
                    }
                    cache.push(LstmStep {
                        h_prev,
                        c_prev,
                        gates: z,
                        tanh_c,
                    });
                }
                (
                    Tensor::new(out_shape, h)?,
                    Cache::Lstm(LstmCache {
                        input: x.clone(),
                        mask,
                        steps: cache,
                    }),
                )
            }
            LayerSpec::TimeDistributedDense { input_dim, units } => {
                let rows = x.len() / input_dim;
                let mut out = affine(x.data(), &self.params, rows, input_dim, units);
                out.iter_mut().for_each(|v| *v = v.max(0.0));
                let output = Tensor::new(out_shape, out)?;
                (
                    output.clone(),
                    Cache::Affine {
                        input: x.clone(),
                        output,
                    },
                )
            }
            LayerSpec::Dense { input_dim, units } => {
                let out = affine(x.data(), &self.params, b, input_dim, units);
                let output = Tensor::new(out_shape, out)?;
                (
                    output.clone(),
                    Cache::Affine {
                        input: x.clone(),
                        output,
                    },
                )
            }
            LayerSpec::LambdaSum => {
                let (steps, w) = (x.shape()[1], x.shape()[2]);
                let mut out = vec![0.0; b * w];
                for bi in 0..b {
                    for t in 0..steps {
                        let src = &x.data()[(bi * steps + t) * w..(bi * steps + t + 1) * w];
                        for (o, v) in out[bi * w..(bi + 1) * w].iter_mut().zip(src) {
                            *o += v;
                        }
                    }
                }
                (Tensor::new(out_shape, out)?, Cache::None)
            }
            LayerSpec::Conv1d {
                input_dim: d,
                filters,
                kernel,
            } => {
                let steps = x.shape()[1];
                let cols = im2col(x.data(), b, steps, d, kernel);
                let mut out = vec![0.0; b * steps * filters];
                for row in out.chunks_mut(filters) {
                    row.copy_from_slice(self.params[1].data());
                }
                matmul_acc(&mut out, &cols, self.params[0].data(), b * steps, kernel * d, filters);
                out.iter_mut().for_each(|v| *v = v.max(0.0));
                let output = Tensor::new(out_shape, out)?;
                (output.clone(), Cache::Conv { cols, output })
            }
            LayerSpec::GlobalMaxPool => {
                let (steps, w) = (x.shape()[1], x.shape()[2]);
                let mut out = vec![f64::NEG_INFINITY; b * w];
                let mut argmax = vec![0; b * w];
                for bi in 0..b {
                    for t in 0..steps {
                        for j in 0..w {
                            let v = x.data()[(bi * steps + t) * w + j];
                            if v > out[bi * w + j] {
                                out[bi * w + j] = v;
                                argmax[bi * w + j] = t;
                            }
                        }
                    }
                }
                (Tensor::new(out_shape, out)?, Cache::MaxPool { argmax, steps })
            }
            LayerSpec::BatchNorm { width: w, eps, .. } => {
                let (gamma, beta) = (self.params[0].data(), self.params[1].data());
                let (mean, var, batch) = if mode == Mode::Infer {
                    (self.params[2].data().to_vec(), self.params[3].data().to_vec(), false)
                } else {
                    let (m, v) = batch_moments(x.data(), b, w);
                    (m, v, true)
                };
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
                let mut xhat = vec![0.0; b * w];
                let mut out = vec![0.0; b * w];
                for bi in 0..b {
                    for j in 0..w {
                        let k = bi * w + j;
                        xhat[k] = (x.data()[k] - mean[j]) * inv_std[j];
                        out[k] = gamma[j] * xhat[k] + beta[j];
                    }
                }
                (
                    Tensor::new(out_shape, out)?,
                    Cache::BatchNorm {
                        xhat,
                        inv_std,
                        batch: batch.then_some((mean, var)),
                    },
                )
            }
            LayerSpec::Prelu { width: w } => {
                let alpha = self.params[0].data();
                let out = x
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| if v > 0.0 { v } else { alpha[k % w] * v })
                    .collect();
                (Tensor::new(out_shape, out)?, Cache::Prelu(x.clone()))
            }
            LayerSpec::Dropout { rate } => {
                if mode == Mode::Train && rate > 0.0 {
                    let mask = dropout_mask(rng, x.len(), rate);
                    let out = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
                    (Tensor::new(out_shape, out)?, Cache::Mask(mask))
                } else {
                    (x.clone(), Cache::None)
                }
            }
            LayerSpec::Sigmoid => {
                let out = Tensor::new(out_shape, x.data().iter().map(|&v| sigmoid(v)).collect())?;
                (out.clone(), Cache::Sigmoid(out))
            }
        })
    }

    /// Gradient with respect to the layer input; parameter gradients are
    /// accumulated into `grads` (same layout as the parameters).
    pub(crate) fn backward(&self, cache: &Cache, input_shape: &[usize], dy: &Tensor, grads: &mut [Tensor]) -> Tensor {
        let b = input_shape[0];
        let mut dx = Tensor::zeros(input_shape.to_vec());
        match (&self.spec, cache) {
            (LayerSpec::Embedding { dim, trainable, .. }, Cache::Embedding(idx)) => {
                if *trainable {
                    let g = grads[0].data_mut();
                    for (p, &i) in idx.iter().enumerate() {
                        for (gv, dv) in g[i * dim..(i + 1) * dim].iter_mut().zip(&dy.data()[p * dim..(p + 1) * dim]) {
                            *gv += dv;
                        }
                    }
                }
            }
            (LayerSpec::Lstm { input_dim: d, units: u, .. }, Cache::Lstm(lc)) => {
                let (d, u) = (*d, *u);
                let steps = lc.steps.len();
                let (kern, rec) = (self.params[0].data(), self.params[1].data());
                let mut dh = dy.data().to_vec();
                let mut dc = vec![0.0; b * u];
                let mut dz = vec![0.0; b * 4 * u];
                let mut xt = vec![0.0; b * d];
                for t in (0..steps).rev() {
                    let s = &lc.steps[t];
                    for bi in 0..b {
                        for j in 0..u {
                            let k = bi * u + j;
                            let g = &s.gates[bi * 4 * u..(bi + 1) * 4 * u];
                            let (i, f, c_hat, o) = (g[j], g[u + j], g[2 * u + j], g[3 * u + j]);
                            let tc = s.tanh_c[k];
                            let d_o = dh[k] * tc;
                            dc[k] += dh[k] * o * (1.0 - tc * tc);
                            let zrow = &mut dz[bi * 4 * u..(bi + 1) * 4 * u];
                            zrow[j] = dc[k] * c_hat * i * (1.0 - i);
                            zrow[u + j] = dc[k] * s.c_prev[k] * f * (1.0 - f);
                            zrow[2 * u + j] = dc[k] * i * (1.0 - c_hat * c_hat);
                            zrow[3 * u + j] = d_o * o * (1.0 - o);
                            dc[k] *= f;
                        }
                    }
                    for bi in 0..b {
                        let src = (bi * steps + t) * d;
                        xt[bi * d..(bi + 1) * d].copy_from_slice(&lc.input.data()[src..src + d]);
                    }
                    matmul_at_acc(grads[0].data_mut(), &xt, &dz, b, d, 4 * u);
                    matmul_at_acc(grads[1].data_mut(), &s.h_prev, &dz, b, u, 4 * u);
                    let gb = grads[2].data_mut();
                    for row in dz.chunks(4 * u) {
                        for (gv, v) in gb.iter_mut().zip(row) {
                            *gv += v;
                        }
                    }
                    let mut dxt = vec![0.0; b * d];
                    matmul_bt_acc(&mut dxt, &dz, kern, b, 4 * u, d);
                    for bi in 0..b {
                        let dst = (bi * steps + t) * d;
                        dx.data_mut()[dst..dst + d].copy_from_slice(&dxt[bi * d..(bi + 1) * d]);
                    }
                    let mut dh_prev = vec![0.0; b * u];
                    matmul_bt_acc(&mut dh_prev, &dz, rec, b, 4 * u, u);
                    if let Some(m) = &lc.mask {
                        dh_prev.iter_mut().zip(m).for_each(|(v, m)| *v *= m);
                    }
                    dh = dh_prev;
                }
            }
            (LayerSpec::TimeDistributedDense { input_dim, units }, Cache::Affine { input, output }) => {
                let dz: Vec<f64> = dy
                    .data()
                    .iter()
                    .zip(output.data())
                    .map(|(g, &o)| if o > 0.0 { *g } else { 0.0 })
                    .collect();
                let rows = input.len() / input_dim;
                affine_backward(input.data(), &dz, &self.params, grads, dx.data_mut(), rows, *input_dim, *units);
            }
            (LayerSpec::Dense { input_dim, units }, Cache::Affine { input, .. }) => {
                affine_backward(input.data(), dy.data(), &self.params, grads, dx.data_mut(), b, *input_dim, *units);
            }
            (LayerSpec::LambdaSum, Cache::None) => {
                let (steps, w) = (input_shape[1], input_shape[2]);
                for bi in 0..b {
                    let g = &dy.data()[bi * w..(bi + 1) * w];
                    for t in 0..steps {
                        dx.data_mut()[(bi * steps + t) * w..(bi * steps + t + 1) * w].copy_from_slice(g);
                    }
                }
            }
            (
                LayerSpec::Conv1d {
                    input_dim: d,
                    filters,
                    kernel,
                },
                Cache::Conv { cols, output },
            ) => {
                let steps = input_shape[1];
                let dz: Vec<f64> = dy
                    .data()
                    .iter()
                    .zip(output.data())
                    .map(|(g, &o)| if o > 0.0 { *g } else { 0.0 })
                    .collect();
                let kd = kernel * d;
                matmul_at_acc(grads[0].data_mut(), cols, &dz, b * steps, kd, *filters);
                for row in dz.chunks(*filters) {
                    for (gv, v) in grads[1].data_mut().iter_mut().zip(row) {
                        *gv += v;
                    }
                }
                let mut dcols = vec![0.0; b * steps * kd];
                matmul_bt_acc(&mut dcols, &dz, self.params[0].data(), b * steps, *filters, kd);
                col2im(&dcols, dx.data_mut(), b, steps, *d, *kernel);
            }
            (LayerSpec::GlobalMaxPool, Cache::MaxPool { argmax, steps }) => {
                let w = input_shape[2];
                for (k, (&t, g)) in argmax.iter().zip(dy.data()).enumerate() {
                    let (bi, j) = (k / w, k % w);
                    dx.data_mut()[(bi * steps + t) * w + j] += g;
                }
            }
            (LayerSpec::BatchNorm { width: w, .. }, Cache::BatchNorm { xhat, inv_std, batch }) => {
                let w = *w;
                let gamma = self.params[0].data();
                let mut sum_d = vec![0.0; w];
                let mut sum_dx = vec![0.0; w];
                for bi in 0..b {
                    for j in 0..w {
                        let k = bi * w + j;
                        let g = dy.data()[k];
                        grads[0].data_mut()[j] += g * xhat[k];
                        grads[1].data_mut()[j] += g;
                        sum_d[j] += g * gamma[j];
                        sum_dx[j] += g * gamma[j] * xhat[k];
                    }
                }
                let n = b as f64;
                for bi in 0..b {
                    for j in 0..w {
                        let k = bi * w + j;
                        let dxhat = dy.data()[k] * gamma[j];
                        dx.data_mut()[k] = if batch.is_some() {
                            inv_std[j] / n * (n * dxhat - sum_d[j] - xhat[k] * sum_dx[j])
                        } else {
                            dxhat * inv_std[j]
                        };
                    }
                }
            }
            (LayerSpec::Prelu { width: w }, Cache::Prelu(input)) => {
                let alpha = self.params[0].data();
                for (k, (&v, &g)) in input.data().iter().zip(dy.data()).enumerate() {
                    if v > 0.0 {
                        dx.data_mut()[k] = g;
                    } else {
                        dx.data_mut()[k] = g * alpha[k % w];
                        grads[0].data_mut()[k % w] += g * v;
                    }
                }
            }
            (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => {
                for ((o, g), m) in dx.data_mut().iter_mut().zip(dy.data()).zip(mask) {
                    *o = g * m;
                }
            }
            (LayerSpec::Dropout { .. }, Cache::None) => dx.data_mut().copy_from_slice(dy.data()),
            (LayerSpec::Sigmoid, Cache::Sigmoid(out)) => {
                for ((o, g), &y) in dx.data_mut().iter_mut().zip(dy.data()).zip(out.data()) {
                    *o = g * y * (1.0 - y);
                }
            }
            _ => unreachable!("cache does not belong to a {} layer", self.spec.kind()),
        }
        dx
    }

    /// Folds the batch statistics from a training forward pass into the
    /// running estimates.
    pub(crate) fn update_running(&mut self, cache: &Cache) {
        if let (LayerSpec::BatchNorm { momentum, .. }, Cache::BatchNorm { batch: Some((mean, var)), .. }) =
            (&self.spec, cache)
        {
            let m = *momentum;
            for (r, v) in self.params[2].data_mut().iter_mut().zip(mean) {
                *r = m * *r + (1.0 - m) * v;
            }
            for (r, v) in self.params[3].data_mut().iter_mut().zip(var) {
                *r = m * *r + (1.0 - m) * v;
            }
        }
    }
}

fn affine(x: &[f64], params: &[Tensor], rows: usize, n_in: usize, n_out: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * n_out);
    for _ in 0..rows {
        out.extend_from_slice(params[1].data());
    }
    matmul_acc(&mut out, x, params[0].data(), rows, n_in, n_out);
    out
}

#[allow(clippy::too_many_arguments)]
fn affine_backward(
    x: &[f64],
    dz: &[f64],
    params: &[Tensor],
    grads: &mut [Tensor],
    dx: &mut [f64],
    rows: usize,
    n_in: usize,
    n_out: usize,
) {
    matmul_at_acc(grads[0].data_mut(), x, dz, rows, n_in, n_out);
    for row in dz.chunks(n_out) {
        for (g, v) in grads[1].data_mut().iter_mut().zip(row) {
            *g += v;
        }
    }
    matmul_bt_acc(dx, dz, params[0].data(), rows, n_out, n_in);
}

/// Biased per-column mean and variance of a `[rows, w]` block.
fn batch_moments(x: &[f64], rows: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows as f64;
    let mut mean = vec![0.0; w];
    for row in x.chunks(w) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; w];
    for row in x.chunks(w) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

fn pad_left(kernel: usize) -> usize {
    (kernel - 1) / 2
}

/// Unfolds same-padded windows: row `(b, t)` holds `x[b, t + k - left, :]`
/// for `k` in `0..kernel`, zero outside the sequence.
fn im2col(x: &[f64], b: usize, steps: usize, d: usize, kernel: usize) -> Vec<f64> {
    let left = pad_left(kernel);
    let mut cols = vec![0.0; b * steps * kernel * d];
    for bi in 0..b {
        for t in 0..steps {
            let row = (bi * steps + t) * kernel * d;
            for k in 0..kernel {
                let Some(src_t) = (t + k).checked_sub(left).filter(|&s| s < steps) else {
                    continue;
                };
                let src = (bi * steps + src_t) * d;
                cols[row + k * d..row + (k + 1) * d].copy_from_slice(&x[src..src + d]);
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], dx: &mut [f64], b: usize, steps: usize, d: usize, kernel: usize) {
    let left = pad_left(kernel);
    for bi in 0..b {
        for t in 0..steps {
            let row = (bi * steps + t) * kernel * d;
            for k in 0..kernel {
                let Some(src_t) = (t + k).checked_sub(left).filter(|&s| s < steps) else {
                    continue;
                };
                let dst = (bi * steps + src_t) * d;
                for (o, v) in dx[dst..dst + d].iter_mut().zip(&cols[row + k * d..row + (k + 1) * d]) {
                    *o += v;
                }
            }
        }
    }
}
