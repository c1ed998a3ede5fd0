//! Central finite-difference verification of backpropagated gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::layers::Mode;
use crate::network::{bce_from_logits, Network};
use crate::tensor::Tensor;
use crate::Result;

pub const DEFAULT_SAMPLES: usize = 24;
const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-8;
const KINK: f64 = 1e-3;
// Rounding in the loss is ~1e-16, so a step of 1e-5 cannot resolve slopes
// much below this.
const FLAT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckOptions {
    /// Coordinates checked per parameter tensor; smaller tensors are
    /// checked in full.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupError {
    pub layer: usize,
    pub kind: String,
    pub param: String,
    /// Coordinates compared against the finite difference.
    pub checked: usize,
    /// Sampled coordinates where both gradients are below the
    /// finite-difference noise level; they agree on zero and are not
    /// compared.
    pub flat: usize,
    /// Sampled coordinates skipped because the loss has a kink within
    /// one step of the current value.
    pub nonsmooth: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub groups: Vec<GroupError>,
}

fn loss(net: &Network, inputs: &[Tensor], labels: &[u8]) -> Result<f64> {
    let (logits, _) = net.forward_trace(inputs, Mode::Check, &mut ChaCha8Rng::seed_from_u64(0))?;
    Ok(bce_from_logits(&logits, labels).0)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FLOOR)
}

/// Compares backprop gradients of the mean cross-entropy with central
/// differences for every trainable tensor. Dropout is off and batch
/// normalisation uses batch statistics. Large tensors are sampled: half of
/// the coordinates among those with a nonzero analytic gradient, the rest
/// uniformly. Coordinates whose central difference changes when the step
/// is cut tenfold sit on a non-differentiable point and are skipped, as are
/// coordinates whose gradient is zero to within rounding on both sides.
pub fn gradient_check(
    net: &Network,
    inputs: &[Tensor],
    labels: &[u8],
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let (logits, trace) = net.forward_trace(inputs, Mode::Check, &mut ChaCha8Rng::seed_from_u64(0))?;
    let (_, dlogits) = bce_from_logits(&logits, labels);
    let grads = net.backward(&trace, &dlogits);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut work = net.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        groups: Vec::new(),
    };
    for (li, layer) in net.layers().iter().enumerate() {
        for (pi, shape) in layer.spec().param_shapes().into_iter().enumerate() {
            if !shape.trainable {
                continue;
            }
            let g = grads[li][pi].data();
            let coords: Vec<usize> = if g.len() <= options.samples {
                (0..g.len()).collect()
            } else {
                let nonzero: Vec<usize> = (0..g.len()).filter(|&k| g[k] != 0.0).collect();
                let take = (options.samples / 2).min(nonzero.len());
                let mut c: Vec<usize> = sample(&mut rng, nonzero.len(), take).into_iter().map(|i| nonzero[i]).collect();
                c.extend(sample(&mut rng, g.len(), options.samples - take));
                c.sort_unstable();
                c.dedup();
                c
            };
            let mut worst: f64 = 0.0;
            let mut nonsmooth = 0;
            let mut flat = 0;
            for &k in &coords {
                let theta = layer.params()[pi].data()[k];
                let h = STEP * theta.abs().max(1.0);
                let mut slope = |h: f64| -> Result<f64> {
                    let p = &mut work.layers_mut()[li].params_mut()[pi];
                    p.data_mut()[k] = theta + h;
                    let up = loss(&work, inputs, labels)?;
                    work.layers_mut()[li].params_mut()[pi].data_mut()[k] = theta - h;
                    let down = loss(&work, inputs, labels)?;
                    work.layers_mut()[li].params_mut()[pi].data_mut()[k] = theta;
                    Ok((up - down) / (2.0 * h))
                };
                let fd = slope(h)?;
                if g[k].abs() < FLAT && fd.abs() < FLAT {
                    flat += 1;
                    continue;
                }
                // A ReLU or max-pool kink inside [θ-h, θ+h] shows up as a
                // slope that moves when the step shrinks.
                if relative_error(fd, slope(h / 10.0)?) > KINK {
                    nonsmooth += 1;
                    continue;
                }
                worst = worst.max(relative_error(g[k], fd));
            }
            report.max_rel_error = report.max_rel_error.max(worst);
            report.groups.push(GroupError {
                layer: li,
                kind: layer.spec().kind().into(),
                param: shape.name,
                checked: coords.len() - nonsmooth - flat,
                flat,
                nonsmooth,
                max_rel_error: worst,
            });
        }
    }
    Ok(report)
}
