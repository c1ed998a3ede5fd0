//! Multi-branch networks: one layer stack per input branch, concatenation,
//! then a head ending in `Dense(1) → Sigmoid`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::layers::{Cache, Layer, LayerSpec, Mode};
use crate::tensor::{sigmoid, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    /// Which network input feeds this branch.
    pub input: usize,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Per-example shape of every network input.
    pub inputs: Vec<Vec<usize>>,
    pub branches: Vec<BranchSpec>,
    pub head: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub trainable: usize,
    pub non_trainable: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.trainable + self.non_trainable
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    /// Branch layers in branch order, then head layers.
    layers: Vec<Layer>,
    branch_widths: Vec<usize>,
}

/// Everything a backward pass needs from one forward pass.
pub struct Trace {
    caches: Vec<Cache>,
    /// Input shape (with batch axis) of every layer.
    shapes: Vec<Vec<usize>>,
}

/// Per-layer parameter gradients, shaped like [`Layer::params`].
pub type Gradients = Vec<Vec<Tensor>>;

impl NetworkSpec {
    /// Checks the graph and returns each branch's output width.
    pub fn validate(&self) -> Result<Vec<usize>> {
        if self.branches.is_empty() {
            return Err(Error::Invalid("a network needs at least one branch".into()));
        }
        let mut widths = Vec::with_capacity(self.branches.len());
        for (i, branch) in self.branches.iter().enumerate() {
            let mut shape = self
                .inputs
                .get(branch.input)
                .ok_or_else(|| Error::Invalid(format!("branch {i} reads missing input {}", branch.input)))?
                .clone();
            for layer in &branch.layers {
                layer.validate()?;
                shape = layer.output_shape(&shape)?;
            }
            match shape[..] {
                [w] => widths.push(w),
                _ => {
                    return Err(Error::Shape(format!(
                        "branch {i} ends with shape {shape:?}; branches must end flat"
                    )))
                }
            }
        }
        if widths.iter().any(|&w| w != widths[0]) {
            return Err(Error::Shape(format!("branch widths differ at the merge: {widths:?}")));
        }
        let mut shape = vec![widths.iter().sum()];
        for layer in &self.head {
            layer.validate()?;
            shape = layer.output_shape(&shape)?;
        }
        let n = self.head.len();
        let ends_right = n >= 2
            && matches!(self.head[n - 2], LayerSpec::Dense { units: 1, .. })
            && self.head[n - 1] == LayerSpec::Sigmoid;
        if !ends_right {
            return Err(Error::Invalid("the head must end with dense(1) then sigmoid".into()));
        }
        Ok(widths)
    }

    fn all_layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.branches.iter().flat_map(|b| b.layers.iter()).chain(&self.head)
    }

    /// Layer kinds in evaluation order, with the merge shown as `concat`.
    pub fn layer_kinds(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = self.branches.iter().flat_map(|b| b.layers.iter().map(LayerSpec::kind)).collect();
        out.push("concat");
        out.extend(self.head.iter().map(LayerSpec::kind));
        out
    }
}

impl Network {
    /// Builds the network with seeded parameter initialisation.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let branch_widths = spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .all_layers()
            .map(|l| Layer::new(l.clone(), &mut rng))
            .collect::<Result<_>>()?;
        Ok(Network {
            spec,
            layers,
            branch_widths,
        })
    }

    pub(crate) fn zeroed(spec: NetworkSpec) -> Result<Self> {
        let branch_widths = spec.validate()?;
        let layers = spec.all_layers().map(|l| Layer::zeroed(l.clone())).collect::<Result<_>>()?;
        Ok(Network {
            spec,
            layers,
            branch_widths,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn n_inputs(&self) -> usize {
        self.spec.inputs.len()
    }

    pub fn n_branches(&self) -> usize {
        self.spec.branches.len()
    }

    pub fn merge_width(&self) -> usize {
        self.branch_widths.iter().sum()
    }

    pub fn param_count(&self) -> ParamCount {
        let (trainable, non_trainable) = self
            .spec
            .all_layers()
            .map(LayerSpec::param_count)
            .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        ParamCount {
            trainable,
            non_trainable,
        }
    }

    fn check_inputs(&self, inputs: &[Tensor]) -> Result<usize> {
        if inputs.len() != self.n_inputs() {
            return Err(Error::Shape(format!(
                "network takes {} inputs, got {}",
                self.n_inputs(),
                inputs.len()
            )));
        }
        let batch = inputs[0].rows();
        for (i, (x, expected)) in inputs.iter().zip(&self.spec.inputs).enumerate() {
            if x.shape().len() != expected.len() + 1 || &x.shape()[1..] != expected.as_slice() || x.rows() != batch {
                return Err(Error::Shape(format!(
                    "input {i} has shape {:?}, expected [{batch}, {}]",
                    x.shape(),
                    expected.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
                )));
            }
        }
        if batch == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        Ok(batch)
    }

    /// Logits (pre-sigmoid outputs) and the trace for a backward pass.
    pub fn forward_trace(&self, inputs: &[Tensor], mode: Mode, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Trace)> {
        let batch = self.check_inputs(inputs)?;
        let mut trace = Trace {
            caches: Vec::with_capacity(self.layers.len()),
            shapes: Vec::with_capacity(self.layers.len()),
        };
        let mut at = 0;
        let mut merged = vec![0.0; batch * self.merge_width()];
        let mut offset = 0;
        for (branch, &width) in self.spec.branches.iter().zip(&self.branch_widths) {
            let mut x = inputs[branch.input].clone();
            for layer in &self.layers[at..at + branch.layers.len()] {
                trace.shapes.push(x.shape().to_vec());
                let (y, cache) = layer.forward(&x, mode, rng)?;
                trace.caches.push(cache);
                x = y;
            }
            at += branch.layers.len();
            let total = self.merge_width();
            for b in 0..batch {
                merged[b * total + offset..b * total + offset + width].copy_from_slice(&x.data()[b * width..(b + 1) * width]);
            }
            offset += width;
        }
        let mut x = Tensor::new(vec![batch, self.merge_width()], merged)?;
        // The closing sigmoid is applied by the caller.
        for layer in &self.layers[at..self.layers.len() - 1] {
            trace.shapes.push(x.shape().to_vec());
            let (y, cache) = layer.forward(&x, mode, rng)?;
            trace.caches.push(cache);
            x = y;
        }
        Ok((x.into_data(), trace))
    }

    /// P(duplicate) per example.
    pub fn forward(&self, inputs: &[Tensor], mode: Mode, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let (logits, _) = self.forward_trace(inputs, mode, rng)?;
        Ok(logits.into_iter().map(sigmoid).collect())
    }

    /// Inference-mode probabilities; a pure function of weights and inputs.
    pub fn predict(&self, inputs: &[Tensor]) -> Result<Vec<f64>> {
        // Infer mode never draws from the generator.
        self.forward(inputs, Mode::Infer, &mut ChaCha8Rng::seed_from_u64(0))
    }

    pub fn zero_grads(&self) -> Gradients {
        self.layers
            .iter()
            .map(|l| l.params().iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect())
            .collect()
    }

    /// Backpropagates `d loss / d logit` through the trace.
    pub fn backward(&self, trace: &Trace, dlogits: &[f64]) -> Gradients {
        let mut grads = self.zero_grads();
        let head_start = self.layers.len() - self.spec.head.len();
        let last = self.layers.len() - 1;
        let batch = dlogits.len();
        let mut dy = Tensor::new(vec![batch, 1], dlogits.to_vec()).expect("one logit per example");
        for i in (head_start..last).rev() {
            dy = self.layers[i].backward(&trace.caches[i], &trace.shapes[i], &dy, &mut grads[i]);
        }
        let total = self.merge_width();
        let mut end = head_start;
        let mut offset = total;
        for (branch, &width) in self.spec.branches.iter().zip(&self.branch_widths).rev() {
            offset -= width;
            let mut d = vec![0.0; batch * width];
            for b in 0..batch {
                d[b * width..(b + 1) * width].copy_from_slice(&dy.data()[b * total + offset..b * total + offset + width]);
            }
            let mut g = Tensor::new(vec![batch, width], d).expect("branch width");
            let start = end - branch.layers.len();
            for i in (start..end).rev() {
                g = self.layers[i].backward(&trace.caches[i], &trace.shapes[i], &g, &mut grads[i]);
            }
            end = start;
        }
        grads
    }

    pub(crate) fn update_running(&mut self, trace: &Trace) {
        for (layer, cache) in self.layers.iter_mut().zip(&trace.caches) {
            layer.update_running(cache);
        }
    }
}

/// Mean binary cross-entropy computed from logits, and its gradient with
/// respect to each logit.
pub fn bce_from_logits(logits: &[f64], labels: &[u8]) -> (f64, Vec<f64>) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(labels) {
        let y = f64::from(y);
        // softplus(z) - y·z
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        grad.push((sigmoid(z) - y) / n);
    }
    (loss / n, grad)
}
