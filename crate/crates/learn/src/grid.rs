//! Hyperparameter selection on a stratified validation slice of the
//! training data.

use dupliq_core::corpus::stratified_indices;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::metrics::evaluate;
use crate::model::train;
use crate::spec::ClassifierSpec;
use crate::{Error, Result};

pub const DEFAULT_VAL_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ClassifierSpec,
    pub best_index: usize,
    /// Validation accuracy of every spec, in grid order.
    pub scores: Vec<(ClassifierSpec, f64)>,
}

/// Trains each spec on the training rows outside the validation slice and
/// returns the most accurate one; ties go to the earliest in the grid.
pub fn grid_search(
    grid: &[ClassifierSpec],
    x: &Matrix,
    y: &[u8],
    val_fraction: f64,
    seed: u64,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Invalid("grid is empty".into()));
    }
    for spec in grid {
        spec.validate()?;
    }
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    let (fit_rows, val_rows) = stratified_indices(y, val_fraction, seed)?;
    if val_rows.is_empty() {
        return Err(Error::Invalid(format!(
            "validation fraction {val_fraction} selects no rows out of {}",
            y.len()
        )));
    }
    let x_fit = x.select_rows(&fit_rows);
    let y_fit: Vec<u8> = fit_rows.iter().map(|&i| y[i]).collect();
    let x_val = x.select_rows(&val_rows);
    let y_val: Vec<u8> = val_rows.iter().map(|&i| y[i]).collect();

    let mut scores = Vec::with_capacity(grid.len());
    let mut best_index = 0;
    for (i, spec) in grid.iter().enumerate() {
        let model = train(spec, &x_fit, &y_fit)?;
        let acc = evaluate(&model, &x_val, &y_val)?.accuracy;
        if acc > scores.get(best_index).map_or(f64::NEG_INFINITY, |s: &(ClassifierSpec, f64)| s.1) {
            best_index = i;
        }
        scores.push((spec.clone(), acc));
    }
    Ok(GridResult {
        best: grid[best_index].clone(),
        best_index,
        scores,
    })
}
