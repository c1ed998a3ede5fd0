//! AdaBoost (SAMME over stumps), gradient boosting on logistic loss, and
//! second-order boosting.

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::binning::Binned;
use crate::forest::{normalize, tree_rng};
use crate::matrix::Matrix;
use crate::spec::{ClassifierSpec, Kind};
use crate::tree::{grow, Criterion, GrowConfig, Stat, Tree};

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn prior(y: &[u8]) -> f64 {
    y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len() as f64
}

pub(crate) struct AdaboostFit {
    pub stumps: Vec<Tree>,
    pub alphas: Vec<f64>,
    pub importance: Vec<f64>,
}

pub(crate) fn fit_adaboost(spec: &ClassifierSpec, data: &Binned, x: &Matrix, y: &[u8]) -> AdaboostFit {
    let n = y.len();
    let cfg = GrowConfig {
        max_depth: 1,
        min_samples_leaf: 1.0,
        max_features: usize::MAX,
        random_cuts: false,
        criterion: Criterion::Gini,
    };
    let mut rng = tree_rng(spec.seed(), 0);
    let mut w = vec![1.0 / n as f64; n];
    let mut fit = AdaboostFit {
        stumps: Vec::new(),
        alphas: Vec::new(),
        importance: vec![0.0; data.n_cols],
    };
    for _ in 0..spec.n_estimators() {
        let stats: Vec<Stat> = w
            .iter()
            .zip(y)
            .map(|(&wi, &label)| Stat {
                g: wi * f64::from(label),
                h: wi,
                n: 1.0,
            })
            .collect();
        let mut imp = vec![0.0; data.n_cols];
        let stump = grow(data, (0..n as u32).collect(), &stats, &cfg, &mut rng, &mut imp);
        normalize(&mut imp);
        let wrong: Vec<bool> = (0..n)
            .map(|i| (stump.predict_row(x, i) >= 0.5) != (y[i] == 1))
            .collect();
        let total: f64 = w.iter().sum();
        let err: f64 = w.iter().zip(&wrong).filter(|(_, &m)| m).map(|(wi, _)| wi).sum::<f64>() / total;
        if err <= 0.0 {
            // A perfect learner ends boosting with unit weight.
            fit.stumps.push(stump);
            fit.alphas.push(1.0);
            for (a, b) in fit.importance.iter_mut().zip(&imp) {
                *a += b;
            }
            break;
        }
        if err >= 0.5 {
            break;
        }
        let alpha = spec.learning_rate() * ((1.0 - err) / err).ln();
        for (wi, &m) in w.iter_mut().zip(&wrong) {
            if m {
                *wi *= alpha.exp();
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= total);
        for (a, b) in fit.importance.iter_mut().zip(&imp) {
            *a += alpha * b;
        }
        fit.stumps.push(stump);
        fit.alphas.push(alpha);
        if alpha == 0.0 {
            break;
        }
    }
    normalize(&mut fit.importance);
    fit
}

/// P(y = 1) from SAMME votes: `σ(2·Σ α_m s_m / Σ α_m)` with `s_m = ±1`.
pub(crate) fn adaboost_proba(stumps: &[Tree], alphas: &[f64], fallback: f64, x: &Matrix, row: usize) -> f64 {
    let total: f64 = alphas.iter().sum();
    if stumps.is_empty() || total <= 0.0 {
        return fallback;
    }
    let vote: f64 = stumps
        .iter()
        .zip(alphas)
        .map(|(s, a)| if s.predict_row(x, row) >= 0.5 { *a } else { -*a })
        .sum();
    sigmoid(2.0 * vote / total)
}

pub(crate) struct BoostFit {
    pub base_margin: f64,
    pub trees: Vec<Tree>,
    pub importance: Vec<f64>,
}

/// Additive logistic model started from the prior log-odds. `gbm` fits a
/// squared-error tree to the residuals with Newton leaf values; `xgb` uses
/// the regularised second-order gain directly.
pub(crate) fn fit_boosting(spec: &ClassifierSpec, data: &Binned, x: &Matrix, y: &[u8]) -> BoostFit {
    let n = y.len();
    let p0 = prior(y);
    let base_margin = (p0 / (1.0 - p0)).ln();
    let criterion = match spec.kind {
        Kind::Xgb => Criterion::SecondOrder {
            lambda: spec.lambda(),
            gamma: spec.gamma(),
        },
        _ => Criterion::Variance,
    };
    let cfg = GrowConfig {
        max_depth: spec.max_depth(),
        min_samples_leaf: spec.min_samples_leaf() as f64,
        max_features: usize::MAX,
        random_cuts: false,
        criterion,
    };
    let lr = spec.learning_rate();
    let n_sub = ((spec.subsample() * n as f64).round() as usize).clamp(1, n);
    let mut margin = vec![base_margin; n];
    let mut fit = BoostFit {
        base_margin,
        trees: Vec::with_capacity(spec.n_estimators()),
        importance: vec![0.0; data.n_cols],
    };
    for round in 0..spec.n_estimators() {
        let stats: Vec<Stat> = margin
            .iter()
            .zip(y)
            .map(|(&f, &label)| {
                let p = sigmoid(f);
                let target = f64::from(label);
                let g = match spec.kind {
                    Kind::Xgb => p - target,
                    _ => target - p,
                };
                Stat {
                    g,
                    h: p * (1.0 - p),
                    n: 1.0,
                }
            })
            .collect();
        let mut rng = tree_rng(spec.seed(), round);
        let rows: Vec<u32> = if n_sub < n {
            let mut r: Vec<u32> = sample(&mut rng, n, n_sub).into_iter().map(|i| i as u32).collect();
            r.sort_unstable();
            r
        } else {
            (0..n as u32).collect()
        };
        let tree = grow(data, rows, &stats, &cfg, &mut rng, &mut fit.importance);
        margin
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, f)| *f += lr * tree.predict_row(x, i));
        fit.trees.push(tree);
    }
    normalize(&mut fit.importance);
    fit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
