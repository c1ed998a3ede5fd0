//! Accuracy, precision, recall, F1 and log loss for binary predictions.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::model::ClassifierModel;
use crate::{Error, Result};

/// Probabilities are clipped to `[LOG_LOSS_EPS, 1 - LOG_LOSS_EPS]`.
pub const LOG_LOSS_EPS: f64 = 1e-15;

/// Positive class is 1; hard labels use `p >= 0.5`. Precision, recall and
/// F1 are 0 when undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub log_loss: f64,
}

/// Mean binary cross-entropy with clipping. The mean is accumulated
/// incrementally so identical terms reproduce themselves exactly.
pub fn log_loss(y: &[u8], p: &[f64], eps: f64) -> f64 {
    let mut mean = 0.0;
    for (k, (&label, &prob)) in y.iter().zip(p).enumerate() {
        let q = prob.clamp(eps, 1.0 - eps);
        let term = if label == 1 { -q.ln() } else { -(1.0 - q).ln() };
        mean += (term - mean) / (k + 1) as f64;
    }
    mean
}

pub fn evaluate_probabilities(y: &[u8], p: &[f64]) -> Result<Metrics> {
    if y.is_empty() {
        return Err(Error::Invalid("cannot evaluate on an empty set".into()));
    }
    if y.len() != p.len() {
        return Err(Error::LengthMismatch {
            rows: p.len(),
            labels: y.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&label, &prob) in y.iter().zip(p) {
        let predicted = prob >= 0.5;
        let actual = label == 1;
        correct += usize::from(predicted == actual);
        tp += usize::from(predicted && actual);
        fp += usize::from(predicted && !actual);
        fn_ += usize::from(!predicted && actual);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: ratio(correct, y.len()),
        precision,
        recall,
        f1,
        log_loss: log_loss(y, p, LOG_LOSS_EPS),
    })
}

pub fn evaluate(model: &ClassifierModel, x: &Matrix, y: &[u8]) -> Result<Metrics> {
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Invalid("cannot evaluate on an empty set".into()));
    }
    evaluate_probabilities(y, &model.predict_proba(x)?)
}
