//! Feature importance: normalised split gain for tree models, permutation
//! importance (mean accuracy drop) for knn.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::metrics::evaluate_probabilities;
use crate::model::ClassifierModel;
use crate::{Error, Result};

pub const DEFAULT_PERMUTATION_REPEATS: usize = 10;
pub const DEFAULT_PERMUTATION_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    NativeGain,
    Permutation,
}

/// Features sorted by descending weight; ties keep column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub features: Vec<(String, f64)>,
}

impl ImportanceReport {
    fn ranked(method: ImportanceMethod, names: &[String], weights: Vec<f64>) -> Self {
        let mut features: Vec<(String, f64)> = names.iter().cloned().zip(weights).collect();
        features.sort_by(|a, b| b.1.total_cmp(&a.1));
        ImportanceReport { method, features }
    }

    pub fn weight(&self, name: &str) -> Option<f64> {
        self.features.iter().find(|(n, _)| n == name).map(|(_, w)| *w)
    }
}

fn check_names(model: &ClassifierModel, names: &[String]) -> Result<()> {
    if names.len() != model.n_features() {
        return Err(Error::WidthMismatch {
            expected: model.n_features(),
            got: names.len(),
        });
    }
    Ok(())
}

/// Native gain for tree-based kinds, permutation importance with default
/// repeats and seed for knn.
pub fn feature_importance(
    model: &ClassifierModel,
    x: &Matrix,
    y: &[u8],
    names: &[String],
) -> Result<ImportanceReport> {
    check_names(model, names)?;
    match model.gain_importance() {
        Some(gain) => Ok(ImportanceReport::ranked(
            ImportanceMethod::NativeGain,
            names,
            gain.to_vec(),
        )),
        None => permutation_importance(
            model,
            x,
            y,
            names,
            DEFAULT_PERMUTATION_REPEATS,
            DEFAULT_PERMUTATION_SEED,
        ),
    }
}

/// Mean drop in accuracy when one column is shuffled, over `repeats`
/// seeded shuffles, floored at zero.
pub fn permutation_importance(
    model: &ClassifierModel,
    x: &Matrix,
    y: &[u8],
    names: &[String],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    check_names(model, names)?;
    if repeats == 0 {
        return Err(Error::Invalid("permutation importance needs at least one repeat".into()));
    }
    let base = evaluate_probabilities(y, &model.predict_proba(x)?)?.accuracy;
    let mut weights = Vec::with_capacity(x.n_cols());
    for j in 0..x.n_cols() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let original = x.column(j);
        let mut drop = 0.0;
        for _ in 0..repeats {
            let mut shuffled = original.clone();
            shuffled.shuffle(&mut rng);
            let acc = evaluate_probabilities(y, &model.predict_proba(&x.with_column(j, &shuffled))?)?.accuracy;
            drop += base - acc;
        }
        weights.push((drop / repeats as f64).max(0.0));
    }
    Ok(ImportanceReport::ranked(ImportanceMethod::Permutation, names, weights))
}
