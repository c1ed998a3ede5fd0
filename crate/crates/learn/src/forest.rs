//! CART, random forests and extra trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::binning::Binned;
use crate::spec::{ClassifierSpec, Kind};
use crate::tree::{grow, Criterion, GrowConfig, Stat, Tree};

pub(crate) fn grow_config(spec: &ClassifierSpec, n_features: usize) -> GrowConfig {
    GrowConfig {
        max_depth: spec.max_depth(),
        min_samples_leaf: spec.min_samples_leaf() as f64,
        max_features: spec.max_features().count(n_features),
        random_cuts: spec.kind == Kind::ExtraTrees,
        criterion: Criterion::Gini,
    }
}

pub(crate) fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        for x in v {
            *x /= total;
        }
    }
}

/// Per-tree RNG: the spec seed selects the key, the tree index the stream.
pub(crate) fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Fits `n_estimators` trees (one for a plain decision tree). Importance is
/// the mean of each tree's normalised impurity decrease.
pub(crate) fn fit(spec: &ClassifierSpec, data: &Binned, y: &[u8]) -> (Vec<Tree>, Vec<f64>) {
    let n = y.len();
    let cfg = grow_config(spec, data.n_cols);
    let n_trees = if spec.kind == Kind::DecisionTree {
        1
    } else {
        spec.n_estimators()
    };
    let bootstrap = spec.kind != Kind::DecisionTree && spec.bootstrap();

    let fitted: Vec<(Tree, Vec<f64>)> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(spec.seed(), t);
            let mut counts = vec![1u32; n];
            if bootstrap {
                counts.fill(0);
                for _ in 0..n {
                    counts[rng.gen_range(0..n)] += 1;
                }
            }
            let stats: Vec<Stat> = counts
                .iter()
                .zip(y)
                .map(|(&c, &label)| {
                    let w = f64::from(c);
                    Stat {
                        g: w * f64::from(label),
                        h: w,
                        n: w,
                    }
                })
                .collect();
            let rows = (0..n as u32).filter(|&i| counts[i as usize] > 0).collect();
            let mut imp = vec![0.0; data.n_cols];
            let tree = grow(data, rows, &stats, &cfg, &mut rng, &mut imp);
            normalize(&mut imp);
            (tree, imp)
        })
        .collect();

    let mut importance = vec![0.0; data.n_cols];
    let mut trees = Vec::with_capacity(n_trees);
    for (tree, imp) in fitted {
        for (a, b) in importance.iter_mut().zip(&imp) {
            *a += b;
        }
        trees.push(tree);
    }
    normalize(&mut importance);
    (trees, importance)
}
