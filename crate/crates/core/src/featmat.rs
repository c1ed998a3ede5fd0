//! The 28-column engineered feature matrix: extraction, column dropping and
//! CSV persistence.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{PairTable, QuestionPair};
use crate::embed::{self, EmbeddingTable, Metric};
use crate::fuzzy::fuzzy_features;
use crate::textops::{basic_features, content_tokens};
use crate::{Error, Result};

/// Canonical feature order. Saved matrices carry these names in the header.
pub const FEATURE_NAMES: [&str; 28] = [
    "len_q1",
    "len_q2",
    "len_diff",
    "nchar_q1",
    "nchar_q2",
    "nwords_q1",
    "nwords_q2",
    "common_words",
    "qratio",
    "wratio",
    "partial_ratio",
    "token_set_ratio",
    "token_sort_ratio",
    "partial_token_set_ratio",
    "partial_token_sort_ratio",
    "wmd",
    "norm_wmd",
    "cosine",
    "minkowski3",
    "cityblock",
    "euclidean",
    "jaccard",
    "canberra",
    "braycurtis",
    "skew_q1",
    "skew_q2",
    "kurt_q1",
    "kurt_q2",
];

/// The eight least important features, removed to go from 28 to 20.
pub const LOW_IMPORTANCE_FEATURES: [&str; 8] = [
    "len_diff",
    "wratio",
    "jaccard",
    "braycurtis",
    "euclidean",
    "cityblock",
    "partial_token_set_ratio",
    "partial_token_sort_ratio",
];

/// Name of the label column in saved matrices.
pub const LABEL_COLUMN: &str = "is_duplicate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub values: [f64; 28],
    pub label: u8,
}

impl FeatureRow {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values[i])
    }
}

/// Computes every feature of one pair. All values are finite; degenerate
/// embedding cases use the sentinels documented in [`crate::embed`].
pub fn extract_row(pair: &QuestionPair, table: &EmbeddingTable) -> FeatureRow {
    let (q1, q2) = (pair.question1.as_str(), pair.question2.as_str());
    let basic = basic_features(q1, q2);
    let fuzzy = fuzzy_features(q1, q2);
    let (t1, t2) = (content_tokens(q1), content_tokens(q2));
    let s1 = embed::sentence_vector(&t1, table, false);
    let s2 = embed::sentence_vector(&t2, table, false);
    let d = |m: Metric| embed::distance(&s1, &s2, m).expect("same table, same dimension");
    let m1 = embed::moments(&s1.values);
    let m2 = embed::moments(&s2.values);
    let values = [
        basic.len_q1 as f64,
        basic.len_q2 as f64,
        basic.len_diff as f64,
        basic.nchar_q1 as f64,
        basic.nchar_q2 as f64,
        basic.nwords_q1 as f64,
        basic.nwords_q2 as f64,
        basic.common_words as f64,
        f64::from(fuzzy.qratio),
        f64::from(fuzzy.wratio),
        f64::from(fuzzy.partial_ratio),
        f64::from(fuzzy.token_set_ratio),
        f64::from(fuzzy.token_sort_ratio),
        f64::from(fuzzy.partial_token_set_ratio),
        f64::from(fuzzy.partial_token_sort_ratio),
        embed::wmd(&t1, &t2, table, false),
        embed::wmd(&t1, &t2, table, true),
        d(Metric::Cosine),
        d(Metric::Minkowski3),
        d(Metric::Cityblock),
        d(Metric::Euclidean),
        d(Metric::Jaccard),
        d(Metric::Canberra),
        d(Metric::Braycurtis),
        m1.skew,
        m2.skew,
        m1.kurtosis,
        m2.kurtosis,
    ];
    debug_assert!(values.iter().all(|v| v.is_finite()));
    FeatureRow {
        values,
        label: pair.is_duplicate,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    column_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn new(column_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some((i, r)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != column_names.len())
        {
            return Err(Error::Invalid(format!(
                "row {i} has {} values for {} columns",
                r.len(),
                column_names.len()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Invalid("labels must be 0 or 1".into()));
        }
        Ok(FeatureMatrix {
            column_names,
            rows,
            labels,
        })
    }

    pub fn from_rows(rows: Vec<FeatureRow>) -> Self {
        let labels = rows.iter().map(|r| r.label).collect();
        FeatureMatrix {
            column_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            rows: rows.into_iter().map(|r| r.values.to_vec()).collect(),
            labels,
        }
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    /// Row-major copy of the values.
    pub fn to_flat(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

/// Extracts every row of the table in parallel; output order follows the
/// table.
pub fn extract_matrix(table: &PairTable, embeddings: &EmbeddingTable) -> FeatureMatrix {
    let rows: Vec<FeatureRow> = table
        .rows()
        .par_iter()
        .map(|pair| extract_row(pair, embeddings))
        .collect();
    FeatureMatrix::from_rows(rows)
}

/// A set of canonical feature names to remove.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropList {
    names: BTreeSet<String>,
}

impl DropList {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for name in names {
            let name = name.as_ref();
            if !FEATURE_NAMES.contains(&name) {
                return Err(Error::UnknownFeature(name.to_string()));
            }
            set.insert(name.to_string());
        }
        Ok(DropList { names: set })
    }

    pub fn low_importance() -> Self {
        DropList::new(LOW_IMPORTANCE_FEATURES).expect("canonical names")
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn union(&self, other: &DropList) -> DropList {
        DropList {
            names: self.names.union(&other.names).cloned().collect(),
        }
    }
}

/// Removes the listed columns, keeping the order of the rest.
pub fn drop_features(m: &FeatureMatrix, drop: &DropList) -> Result<FeatureMatrix> {
    for name in drop.names() {
        if !m.column_names.iter().any(|c| c == name) {
            return Err(Error::UnknownFeature(name.to_string()));
        }
    }
    let keep: Vec<usize> = (0..m.n_cols())
        .filter(|&i| !drop.names.contains(&m.column_names[i]))
        .collect();
    Ok(FeatureMatrix {
        column_names: keep.iter().map(|&i| m.column_names[i].clone()).collect(),
        rows: m
            .rows
            .iter()
            .map(|r| keep.iter().map(|&i| r[i]).collect())
            .collect(),
        labels: m.labels.clone(),
    })
}

pub fn save_matrix(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix(m, file)
}

/// CSV with the feature names plus a trailing label column. `f64` values
/// use Rust's shortest round-trip formatting.
pub fn write_matrix<W: Write>(m: &FeatureMatrix, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = m.column_names.iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    out.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (row, &label) in m.rows.iter().zip(&m.labels) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(label.to_string());
        out.write_record(&record)?;
    }
    out.flush().map_err(|e| Error::io("<matrix output>", e))?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(file)
}

pub fn read_matrix<R: Read>(reader: R) -> Result<FeatureMatrix> {
    let mut input = csv::Reader::from_reader(reader);
    let header: Vec<String> = input.headers()?.iter().map(str::to_string).collect();
    let label_at = header
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| Error::Invalid(format!("missing {LABEL_COLUMN:?} column")))?;
    let column_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_at)
        .map(|(_, h)| h.clone())
        .collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in input.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::MatrixCell {
                row: row_idx,
                column: String::new(),
                message: format!("{} fields, expected {}", record.len(), header.len()),
            });
        }
        let mut values = Vec::with_capacity(column_names.len());
        for (col, cell) in record.iter().enumerate() {
            if col == label_at {
                labels.push(match cell.trim() {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(Error::MatrixCell {
                            row: row_idx,
                            column: header[col].clone(),
                            message: format!("label must be 0 or 1, found {other:?}"),
                        })
                    }
                });
            } else {
                let v: f64 = cell.trim().parse().map_err(|_| Error::MatrixCell {
                    row: row_idx,
                    column: header[col].clone(),
                    message: format!("not a number: {cell:?}"),
                })?;
                values.push(v);
            }
        }
        rows.push(values);
    }
    FeatureMatrix::new(column_names, rows, labels)
}
