//! Dense and compressed-sparse-row feature matrices.

use dupliq_core::tfidf::SparseVec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::Invalid(format!(
                "{} values do not fill a {n_rows}x{n_cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix {
            n_rows,
            n_cols,
            data,
        })
    }

    /// Builds a matrix from equal-length rows. `n_cols` is needed for the
    /// zero-row case.
    pub fn from_rows(rows: &[Vec<f64>], n_cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Invalid(format!(
                    "row {i} has {} values, expected {n_cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// CSR matrix; column indices strictly increase within each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_vecs(rows: &[SparseVec], n_cols: usize) -> Result<Self> {
        let nnz = rows.iter().map(|r| r.entries.len()).sum();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for (i, row) in rows.iter().enumerate() {
            if row.dim != n_cols {
                return Err(Error::WidthMismatch {
                    expected: n_cols,
                    got: row.dim,
                });
            }
            let mut last = None;
            for &(j, v) in &row.entries {
                if j as usize >= n_cols || last.is_some_and(|l| l >= j) {
                    return Err(Error::Invalid(format!(
                        "row {i}: column indices must be increasing and below {n_cols}"
                    )));
                }
                last = Some(j);
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(SparseMatrix {
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.row(i);
        idx.binary_search(&(j as u32)).map_or(0.0, |p| val[p])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "lowercase")]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl From<DenseMatrix> for Matrix {
    fn from(m: DenseMatrix) -> Self {
        Matrix::Dense(m)
    }
}

impl From<SparseMatrix> for Matrix {
    fn from(m: SparseMatrix) -> Self {
        Matrix::Sparse(m)
    }
}

impl Matrix {
    pub fn n_rows(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.n_rows(),
            Matrix::Sparse(m) => m.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.n_cols(),
            Matrix::Sparse(m) => m.n_cols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Matrix::Sparse(_))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Matrix::Dense(m) => m.get(i, j),
            Matrix::Sparse(m) => m.get(i, j),
        }
    }

    /// Calls `f(column, value)` for every nonzero of row `i` in column order.
    pub fn for_each_nonzero(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            Matrix::Dense(m) => {
                for (j, &v) in m.row(i).iter().enumerate() {
                    if v != 0.0 {
                        f(j, v);
                    }
                }
            }
            Matrix::Sparse(m) => {
                let (idx, val) = m.row(i);
                for (&j, &v) in idx.iter().zip(val) {
                    f(j as usize, v);
                }
            }
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for i in 0..self.n_rows() {
            let mut bad = None;
            self.for_each_nonzero(i, |j, v| {
                if bad.is_none() && !v.is_finite() {
                    bad = Some(j);
                }
            });
            if let Some(column) = bad {
                return Err(Error::NonFinite { row: i, column });
            }
        }
        Ok(())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        match self {
            Matrix::Dense(m) => {
                let mut data = Vec::with_capacity(rows.len() * m.n_cols);
                for &i in rows {
                    data.extend_from_slice(m.row(i));
                }
                Matrix::Dense(DenseMatrix {
                    n_rows: rows.len(),
                    n_cols: m.n_cols,
                    data,
                })
            }
            Matrix::Sparse(m) => {
                let mut out = SparseMatrix {
                    n_cols: m.n_cols,
                    indptr: vec![0],
                    indices: Vec::new(),
                    values: Vec::new(),
                };
                for &i in rows {
                    let (idx, val) = m.row(i);
                    out.indices.extend_from_slice(idx);
                    out.values.extend_from_slice(val);
                    out.indptr.push(out.indices.len());
                }
                Matrix::Sparse(out)
            }
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, j)).collect()
    }

    /// Copy of the matrix with column `j` replaced by `values`.
    pub fn with_column(&self, j: usize, values: &[f64]) -> Matrix {
        assert_eq!(values.len(), self.n_rows());
        match self {
            Matrix::Dense(m) => {
                let mut out = m.clone();
                for (i, &v) in values.iter().enumerate() {
                    out.data[i * m.n_cols + j] = v;
                }
                Matrix::Dense(out)
            }
            Matrix::Sparse(m) => {
                let mut out = SparseMatrix {
                    n_cols: m.n_cols,
                    indptr: vec![0],
                    indices: Vec::with_capacity(m.nnz()),
                    values: Vec::with_capacity(m.nnz()),
                };
                for (i, &replacement) in values.iter().enumerate() {
                    let (idx, val) = m.row(i);
                    let split = idx.partition_point(|&c| (c as usize) < j);
                    let skip = usize::from(idx.get(split) == Some(&(j as u32)));
                    out.indices.extend_from_slice(&idx[..split]);
                    out.values.extend_from_slice(&val[..split]);
                    if replacement != 0.0 {
                        out.indices.push(j as u32);
                        out.values.push(replacement);
                    }
                    out.indices.extend_from_slice(&idx[split + skip..]);
                    out.values.extend_from_slice(&val[split + skip..]);
                    out.indptr.push(out.indices.len());
                }
                Matrix::Sparse(out)
            }
        }
    }
}
