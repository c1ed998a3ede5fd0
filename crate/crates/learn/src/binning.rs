//! Quantile binning of feature columns for histogram-based tree growth.
//!
//! Column `c` gets ascending thresholds `t_0 < … < t_{k-1}`; a value `v`
//! falls in the first bin `b` with `v ≤ t_b` (or bin `k`). A split "bin ≤ b
//! goes left" is therefore the raw-value test `v ≤ t_b`, which is what the
//! fitted trees store. Only nonzero values are stored per row; zeros are
//! accounted to the column's zero bin from node totals.

use rayon::prelude::*;

use crate::matrix::Matrix;

pub(crate) struct Binned {
    pub n_cols: usize,
    pub thresholds: Vec<Vec<f64>>,
    pub zero_bin: Vec<u16>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    bins: Vec<u16>,
}

pub(crate) const MAX_BINS_LIMIT: usize = 1 << 15;

impl Binned {
    pub fn build(x: &Matrix, max_bins: usize) -> Binned {
        assert!((2..=MAX_BINS_LIMIT).contains(&max_bins));
        let (n_rows, n_cols) = (x.n_rows(), x.n_cols());
        let mut per_col: Vec<Vec<f64>> = vec![Vec::new(); n_cols];
        for i in 0..n_rows {
            x.for_each_nonzero(i, |j, v| per_col[j].push(v));
        }
        let thresholds: Vec<Vec<f64>> = per_col
            .into_par_iter()
            .map(|values| column_thresholds(values, n_rows, max_bins))
            .collect();
        let zero_bin = thresholds.iter().map(|t| bin_index(t, 0.0)).collect();

        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut bins = Vec::new();
        row_ptr.push(0);
        for i in 0..n_rows {
            x.for_each_nonzero(i, |j, v| {
                cols.push(j as u32);
                bins.push(bin_index(&thresholds[j], v));
            });
            row_ptr.push(cols.len());
        }
        Binned {
            n_cols,
            thresholds,
            zero_bin,
            row_ptr,
            cols,
            bins,
        }
    }

    pub fn n_bins(&self, col: usize) -> usize {
        self.thresholds[col].len() + 1
    }

    /// Nonzero `(column, bin)` entries of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[u16]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[span.clone()], &self.bins[span])
    }

    pub fn bin_at(&self, i: usize, col: usize) -> u16 {
        let (cols, bins) = self.row(i);
        cols.binary_search(&(col as u32))
            .map_or(self.zero_bin[col], |p| bins[p])
    }
}

pub(crate) fn bin_index(thresholds: &[f64], v: f64) -> u16 {
    thresholds.partition_point(|&t| t < v) as u16
}

fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid >= b {
        a
    } else {
        mid
    }
}

fn column_thresholds(mut values: Vec<f64>, n_rows: usize, max_bins: usize) -> Vec<f64> {
    let zeros = n_rows - values.len();
    values.sort_unstable_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    let mut zero_placed = zeros == 0;
    for v in values {
        if !zero_placed && v > 0.0 {
            distinct.push((0.0, zeros));
            zero_placed = true;
        }
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if !zero_placed {
        distinct.push((0.0, zeros));
    }

    if distinct.len() <= max_bins {
        return distinct
            .windows(2)
            .map(|w| midpoint(w[0].0, w[1].0))
            .collect();
    }
    let mut out = Vec::with_capacity(max_bins - 1);
    let (mut cum, mut target) = (0usize, 1usize);
    for w in distinct.windows(2) {
        cum += w[0].1;
        if cum * max_bins >= target * n_rows {
            out.push(midpoint(w[0].0, w[1].0));
            while cum * max_bins >= target * n_rows {
                target += 1;
            }
        }
    }
    out
}
