//! Mini-batch training with binary cross-entropy and Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::layers::Mode;
use crate::network::{bce_from_logits, Gradients, Network};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 300,
            epochs: 150,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Invalid("batch_size and epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!("learning rate {} must be finite and ≥ 0", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Invalid(format!("{name} {b} is outside [0, 1)")));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Invalid("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Adam moment estimates for every trainable parameter.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Network, config: &TrainConfig) -> Self {
        Adam {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            t: 0,
            m: net.zero_grads(),
            v: net.zero_grads(),
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (li, layer) in net.layers_mut().iter_mut().enumerate() {
            let shapes = layer.spec().param_shapes();
            for (pi, p) in layer.params_mut().iter_mut().enumerate() {
                if !shapes[pi].trainable {
                    continue;
                }
                let g = grads[li][pi].data();
                let m = self.m[li][pi].data_mut();
                let v = self.v[li][pi].data_mut();
                for (k, w) in p.data_mut().iter_mut().enumerate() {
                    m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                    v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                    *w -= self.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + self.epsilon);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training-mode loss over the epoch's batches.
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

fn check_labels(inputs: &[Tensor], labels: &[u8]) -> Result<()> {
    let n = inputs.first().map_or(0, Tensor::rows);
    if n != labels.len() {
        return Err(Error::Shape(format!("{n} examples but {} labels", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Invalid(format!("label {bad} is not 0 or 1")));
    }
    Ok(())
}

/// Trains in place. `inputs` holds one tensor per network input with the
/// examples along the leading axis.
pub fn train_network(net: &mut Network, inputs: &[Tensor], labels: &[u8], config: &TrainConfig) -> Result<History> {
    config.validate()?;
    check_labels(inputs, labels)?;
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(net, config);
    let mut history = History::default();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (bi, rows) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<Tensor> = inputs.iter().map(|x| x.select_rows(rows)).collect();
            let y: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
            let (logits, trace) = net.forward_trace(&batch, Mode::Train, &mut rng)?;
            let (loss, dlogits) = bce_from_logits(&logits, &y);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    loss,
                });
            }
            let grads = net.backward(&trace, &dlogits);
            adam.step(net, &grads);
            net.update_running(&trace);
            loss_sum += loss * rows.len() as f64;
            correct += logits.iter().zip(&y).filter(|(&z, &t)| (z >= 0.0) == (t == 1)).count();
        }
        history.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
        });
    }
    Ok(history)
}

/// Inference-mode loss and accuracy.
pub fn evaluate_network(net: &Network, inputs: &[Tensor], labels: &[u8]) -> Result<(f64, f64)> {
    check_labels(inputs, labels)?;
    let (logits, _) = net.forward_trace(inputs, Mode::Infer, &mut ChaCha8Rng::seed_from_u64(0))?;
    let (loss, _) = bce_from_logits(&logits, labels);
    let correct = logits.iter().zip(labels).filter(|(&z, &t)| (z >= 0.0) == (t == 1)).count();
    Ok((loss, correct as f64 / labels.len() as f64))
}
