//! File formats the commands exchange: pair tables, word vectors and
//! labelled feature matrices.

use std::collections::HashSet;
use std::path::Path;

use dupliq_core::corpus::{self, PairTable};
use dupliq_core::embed::{self, EmbeddingTable};
use dupliq_core::featmat::{self, FeatureMatrix};
use dupliq_core::tfidf::TfidfModel;
use dupliq_learn::{DenseMatrix, Matrix, SparseMatrix};
use serde::{Deserialize, Serialize};

use crate::config::Paths;
use crate::error::{CliError, CliResult};

pub fn load_table(path: &Path) -> CliResult<PairTable> {
    Ok(corpus::load_pairs(path)?)
}

/// Word vectors from `--glove` or `--word2vec`; exactly one must be set.
pub fn load_embeddings(paths: &Paths, command: &str) -> CliResult<EmbeddingTable> {
    match (&paths.glove, &paths.word2vec) {
        (Some(g), None) => Ok(embed::load_glove_text(g)?),
        (None, Some(w)) => Ok(embed::load_word2vec_binary(w)?),
        (Some(_), Some(_)) => Err(CliError::Contract(format!(
            "{command}: pass only one of --glove and --word2vec"
        ))),
        (None, None) => Err(CliError::Contract(format!(
            "{command} needs word vectors: pass --glove <file> or --word2vec <file>"
        ))),
    }
}

/// Feature rows with labels. Dense matrices keep their column names;
/// sparse TF-IDF matrices have none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrix {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    pub matrix: Matrix,
    pub labels: Vec<u8>,
}

impl LabeledMatrix {
    pub fn from_features(m: &FeatureMatrix) -> CliResult<Self> {
        Ok(LabeledMatrix {
            columns: Some(m.column_names().to_vec()),
            matrix: DenseMatrix::from_rows(m.rows(), m.n_cols())?.into(),
            labels: m.labels().to_vec(),
        })
    }

    pub fn from_tfidf(model: &TfidfModel, table: &PairTable) -> CliResult<Self> {
        use rayon::prelude::*;
        let vecs: Vec<_> = table
            .rows()
            .par_iter()
            .map(|r| model.pair_vector(&r.question1, &r.question2))
            .collect();
        Ok(LabeledMatrix {
            columns: None,
            matrix: SparseMatrix::from_vecs(&vecs, 2 * model.dim())?.into(),
            labels: table.labels(),
        })
    }

    /// Column names, generated as `f0, f1, …` when the file has none.
    pub fn column_names(&self) -> Vec<String> {
        self.columns
            .clone()
            .unwrap_or_else(|| (0..self.matrix.n_cols()).map(|j| format!("f{j}")).collect())
    }
}

/// `.csv` files hold a dense feature matrix; anything else is JSON.
pub fn load_features(path: &Path) -> CliResult<LabeledMatrix> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return LabeledMatrix::from_features(&featmat::load_matrix(path)?);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let m: LabeledMatrix = serde_json::from_str(&text)
        .map_err(|e| CliError::Contract(format!("{}: {e}", path.display())))?;
    if m.labels.len() != m.matrix.n_rows() {
        return Err(CliError::Contract(format!(
            "{}: {} rows but {} labels",
            path.display(),
            m.matrix.n_rows(),
            m.labels.len()
        )));
    }
    Ok(m)
}

pub fn save_features(m: &LabeledMatrix, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string(m).map_err(|e| CliError::Contract(e.to_string()))?;
    write_file(path, &text)
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Distinct questions of both columns, in first-seen order.
pub fn question_corpus(table: &PairTable) -> Vec<&str> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in table.rows() {
        for q in [r.question1.as_str(), r.question2.as_str()] {
            if seen.insert(q) {
                out.push(q);
            }
        }
    }
    out
}
