//! Word- and character-level TF-IDF vectorisers and the concatenated
//! question-pair vector.
//!
//! Weights follow the smoothed convention `idf(t) = ln((1 + N) / (1 + df(t))) + 1`
//! with raw term counts and L2 normalisation of each vector.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::textops::normalize_text;
use crate::{Error, Result};

pub const DEFAULT_MAX_FEATURES: usize = 50_000;
pub const DEFAULT_CHAR_NGRAMS: (usize, usize) = (1, 3);
pub const DEFAULT_WORD_NGRAMS: (usize, usize) = (1, 1);
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analyzer {
    /// Whitespace tokens of the normalised text, joined by single spaces
    /// for n > 1.
    Word,
    /// Character n-grams of the lowercased raw text, spaces included.
    Char,
}

impl Analyzer {
    pub fn default_ngrams(self) -> (usize, usize) {
        match self {
            Analyzer::Word => DEFAULT_WORD_NGRAMS,
            Analyzer::Char => DEFAULT_CHAR_NGRAMS,
        }
    }

    /// Every n-gram occurrence in `text`, in order.
    pub fn terms(self, text: &str, (lo, hi): (usize, usize)) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            Analyzer::Word => {
                let normalized = normalize_text(text);
                let tokens: Vec<&str> = normalized.split(' ').filter(|t| !t.is_empty()).collect();
                for n in lo..=hi {
                    out.extend(tokens.windows(n).map(|w| w.join(" ")));
                }
            }
            Analyzer::Char => {
                let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
                for n in lo..=hi {
                    out.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
                }
            }
        }
        out
    }
}

impl fmt::Display for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Analyzer::Word => "word",
            Analyzer::Char => "char",
        })
    }
}

impl FromStr for Analyzer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(Analyzer::Word),
            "char" => Ok(Analyzer::Char),
            other => Err(Error::Invalid(format!("unknown analyzer {other:?}"))),
        }
    }
}

/// Sparse vector with strictly increasing indices and nonzero values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub dim: usize,
    pub entries: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn empty(dim: usize) -> Self {
        SparseVec {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |pos| self.entries[pos].1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    analyzer: Analyzer,
    ngram_range: (usize, usize),
    max_features: usize,
    vocabulary: HashMap<String, usize>,
    terms: Vec<String>,
    idf: Vec<f64>,
}

/// Fits the vocabulary and IDF weights.
///
/// The corpus should be the de-duplicated union of the training questions.
/// When more than `max_features` terms exist, the ones with the highest
/// document frequency are kept (ties broken lexicographically). Column
/// indices follow the lexicographic order of the kept terms.
pub fn fit<S: AsRef<str> + Sync>(
    corpus: &[S],
    analyzer: Analyzer,
    ngram_range: (usize, usize),
    max_features: usize,
) -> Result<TfidfModel> {
    if corpus.is_empty() {
        return Err(Error::Invalid("cannot fit TF-IDF on an empty corpus".into()));
    }
    let (lo, hi) = ngram_range;
    if lo == 0 || lo > hi {
        return Err(Error::Invalid(format!("bad n-gram range ({lo}, {hi})")));
    }
    if max_features == 0 {
        return Err(Error::Invalid("max_features must be positive".into()));
    }

    let df: HashMap<String, u64> = corpus
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, u64>, doc| {
            let mut terms = analyzer.terms(doc.as_ref(), ngram_range);
            terms.sort_unstable();
            terms.dedup();
            for t in terms {
                *acc.entry(t).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, std::mem::take(&mut a)) };
            for (t, c) in small {
                *big.entry(t).or_insert(0) += c;
            }
            big
        });

    let mut ranked: Vec<(String, u64)> = df.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_features);
    ranked.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    let n_docs = corpus.len() as f64;
    let idf = ranked
        .iter()
        .map(|&(_, df)| ((1.0 + n_docs) / (1.0 + df as f64)).ln() + 1.0)
        .collect();
    let terms: Vec<String> = ranked.into_iter().map(|(t, _)| t).collect();
    let vocabulary = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(TfidfModel {
        analyzer,
        ngram_range,
        max_features,
        vocabulary,
        terms,
        idf,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    analyzer: Analyzer,
    ngram_range: (usize, usize),
    max_features: usize,
    terms: Vec<(String, usize, f64)>,
}

impl TfidfModel {
    pub fn analyzer(&self) -> Analyzer {
        self.analyzer
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        self.ngram_range
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    /// Number of columns of [`transform`](Self::transform) output.
    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.idf[i])
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn transform(&self, text: &str) -> SparseVec {
        let mut counts: HashMap<usize, u32> = HashMap::new();
        for term in self.analyzer.terms(text, self.ngram_range) {
            if let Some(&i) = self.vocabulary.get(&term) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(i, c)| (i as u32, f64::from(c) * self.idf[i]))
            .collect();
        entries.sort_unstable_by_key(|&(i, _)| i);
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut entries {
                *v /= norm;
            }
        }
        SparseVec {
            dim: self.dim(),
            entries,
        }
    }

    /// `transform(q1)` in columns `[0, dim)` followed by `transform(q2)` in
    /// `[dim, 2·dim)`.
    pub fn pair_vector(&self, q1: &str, q2: &str) -> SparseVec {
        let dim = self.dim();
        let mut v = self.transform(q1);
        let second = self.transform(q2);
        v.entries
            .extend(second.entries.into_iter().map(|(i, x)| (i + dim as u32, x)));
        v.dim = 2 * dim;
        v
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), &self.to_file())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_file(serde_json::from_reader(BufReader::new(file))?)
    }

    fn to_file(&self) -> ModelFile {
        ModelFile {
            version: MODEL_VERSION,
            analyzer: self.analyzer,
            ngram_range: self.ngram_range,
            max_features: self.max_features,
            terms: self
                .terms
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), i, self.idf[i]))
                .collect(),
        }
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        if file.version != MODEL_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported TF-IDF model version {}",
                file.version
            )));
        }
        let n = file.terms.len();
        let mut terms = vec![String::new(); n];
        let mut idf = vec![0.0; n];
        let mut filled = vec![false; n];
        for (term, index, weight) in file.terms {
            if index >= n || filled[index] || weight.is_nan() || weight <= 0.0 {
                return Err(Error::Invalid(format!(
                    "bad vocabulary entry {term:?} at index {index}"
                )));
            }
            filled[index] = true;
            terms[index] = term;
            idf[index] = weight;
        }
        let vocabulary = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(TfidfModel {
            analyzer: file.analyzer,
            ngram_range: file.ngram_range,
            max_features: file.max_features,
            vocabulary,
            terms,
            idf,
        })
    }
}
