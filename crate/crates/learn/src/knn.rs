//! Brute-force k-nearest neighbours: euclidean on dense matrices, cosine on
//! sparse ones (via an inverted index over the training rows).

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::{Matrix, SparseMatrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct KnnModel {
    pub k: usize,
    pub train: Matrix,
    pub labels: Vec<u8>,
    #[serde(skip)]
    index: OnceLock<InvertedIndex>,
}

impl PartialEq for KnnModel {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.train == other.train && self.labels == other.labels
    }
}

#[derive(Debug, Clone)]
struct InvertedIndex {
    postings: Vec<Vec<(u32, f64)>>,
    norms: Vec<f64>,
}

fn row_norm(m: &SparseMatrix, i: usize) -> f64 {
    m.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cosine distance with the same conventions as the embedding features:
/// two zero vectors are at distance 0, a zero and a nonzero at 1.
fn cosine_distance(dot: f64, na: f64, nb: f64) -> f64 {
    match (na == 0.0, nb == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => 1.0 - dot / (na * nb),
    }
}

impl KnnModel {
    pub fn new(k: usize, train: Matrix, labels: Vec<u8>) -> Self {
        KnnModel {
            k,
            train,
            labels,
            index: OnceLock::new(),
        }
    }

    fn index(&self, m: &SparseMatrix) -> &InvertedIndex {
        self.index.get_or_init(|| {
            let mut postings = vec![Vec::new(); m.n_cols()];
            let mut norms = Vec::with_capacity(m.n_rows());
            for i in 0..m.n_rows() {
                let (idx, val) = m.row(i);
                for (&j, &v) in idx.iter().zip(val) {
                    postings[j as usize].push((i as u32, v));
                }
                norms.push(row_norm(m, i));
            }
            InvertedIndex { postings, norms }
        })
    }

    /// Fraction of positive labels among the k nearest training rows;
    /// distance ties go to the lower training index.
    fn vote(&self, dist: &mut [(f64, u32)]) -> f64 {
        let k = self.k.min(dist.len());
        let order = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, order);
        }
        let positives = dist[..k]
            .iter()
            .filter(|(_, i)| self.labels[*i as usize] == 1)
            .count();
        positives as f64 / k as f64
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        match (&self.train, x) {
            (Matrix::Dense(train), Matrix::Dense(query)) => (0..query.n_rows())
                .into_par_iter()
                .map_init(Vec::new, |dist, q| {
                    let row = query.row(q);
                    dist.clear();
                    dist.extend((0..train.n_rows()).map(|t| {
                        let d: f64 = train
                            .row(t)
                            .iter()
                            .zip(row)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        (d, t as u32)
                    }));
                    self.vote(dist)
                })
                .collect(),
            (Matrix::Sparse(train), Matrix::Sparse(query)) => {
                let index = self.index(train);
                let n_train = train.n_rows();
                (0..query.n_rows())
                    .into_par_iter()
                    .map_init(
                        || (vec![0.0; n_train], Vec::new()),
                        |(dots, dist), q| {
                            dots.fill(0.0);
                            let (idx, val) = query.row(q);
                            for (&j, &v) in idx.iter().zip(val) {
                                for &(t, w) in &index.postings[j as usize] {
                                    dots[t as usize] += v * w;
                                }
                            }
                            let nq = row_norm(query, q);
                            dist.clear();
                            dist.extend(dots.iter().enumerate().map(|(t, &d)| {
                                (cosine_distance(d, nq, index.norms[t]), t as u32)
                            }));
                            self.vote(dist)
                        },
                    )
                    .collect()
            }
            // Layout is checked by the caller; mixed layouts go through the
            // generic accessor.
            _ => (0..x.n_rows())
                .map(|q| {
                    let mut dist: Vec<(f64, u32)> = (0..self.train.n_rows())
                        .map(|t| {
                            let d: f64 = (0..x.n_cols())
                                .map(|j| (self.train.get(t, j) - x.get(q, j)).powi(2))
                                .sum();
                            (d, t as u32)
                        })
                        .collect();
                    self.vote(&mut dist)
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;
    use dupliq_core::tfidf::SparseVec;

    #[test]
    fn dense_votes() {
        let train = DenseMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 10.0]).unwrap();
        let m = KnnModel::new(3, Matrix::Dense(train), vec![0, 1, 1, 0]);
        let q = Matrix::Dense(DenseMatrix::new(2, 1, vec![0.9, 9.0]).unwrap());
        let p = m.predict(&q);
        assert_eq!(p[0], 2.0 / 3.0);
        // Neighbours of 9: 10, 2, 1.
        assert_eq!(p[1], 2.0 / 3.0);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let train = DenseMatrix::new(2, 1, vec![-1.0, 1.0]).unwrap();
        let m = KnnModel::new(1, Matrix::Dense(train), vec![1, 0]);
        let q = Matrix::Dense(DenseMatrix::new(1, 1, vec![0.0]).unwrap());
        assert_eq!(m.predict(&q), vec![1.0]);
    }

    #[test]
    fn sparse_cosine() {
        let v = |e: Vec<(u32, f64)>| SparseVec { dim: 3, entries: e };
        let train = SparseMatrix::from_vecs(
            &[v(vec![(0, 1.0)]), v(vec![(1, 2.0)]), v(vec![(0, 1.0), (1, 1.0)]), v(vec![])],
            3,
        )
        .unwrap();
        let m = KnnModel::new(1, Matrix::Sparse(train), vec![1, 0, 0, 1]);
        let q = SparseMatrix::from_vecs(&[v(vec![(0, 5.0)]), v(vec![(1, 0.1)]), v(vec![]), v(vec![(2, 1.0)])], 3)
            .unwrap();
        // Last query is orthogonal to everything: all nonzero rows at 1,
        // and the empty row at 1 too, so index 0 wins the tie.
        assert_eq!(m.predict(&Matrix::Sparse(q)), vec![1.0, 0.0, 1.0, 1.0]);
    }
}
