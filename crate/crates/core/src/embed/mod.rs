//! Pre-trained word vectors and the embedding-based pair features: word
//! mover's distance, distances between mean sentence vectors, and the
//! skewness/kurtosis of each sentence vector.

mod io;
pub mod transport;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use io::{
    load_glove_text, load_word2vec_binary, read_glove_text, read_word2vec_binary,
    read_word2vec_header, write_glove_text, write_word2vec_binary,
};

use crate::textops::TokenList;
use crate::{Error, Result};

/// WMD value used when either side has no in-vocabulary tokens.
pub const WMD_EMPTY_SENTINEL: f64 = 1.0;

/// Word → dense vector map. Vectors are stored as `f32` in one flat buffer
/// (the 3M × 300 news vectors would not fit in memory as `f64`).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self::with_capacity(dim, 0)
    }

    pub fn with_capacity(dim: usize, words: usize) -> Self {
        EmbeddingTable {
            dim,
            words: Vec::with_capacity(words),
            index: HashMap::with_capacity(words),
            data: Vec::with_capacity(words * dim),
        }
    }

    /// Builds a table from `(word, vector)` pairs; all vectors must share a
    /// length and words must be unique.
    pub fn from_pairs<S: AsRef<str>, V: AsRef<[f32]>>(
        dim: usize,
        pairs: impl IntoIterator<Item = (S, V)>,
    ) -> Result<Self> {
        let mut table = Self::new(dim);
        for (word, vector) in pairs {
            table.insert(word.as_ref(), vector.as_ref())?;
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn insert(&mut self, word: &str, vector: &[f32]) -> Result<()> {
        if self.index.contains_key(word) {
            return Err(Error::Invalid(format!("duplicate word {word:?}")));
        }
        self.insert_or_skip(word, vector)
    }

    /// Like [`insert`](Self::insert) but keeps the first vector of a
    /// repeated word.
    pub(crate) fn insert_or_skip(&mut self, word: &str, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch(vector.len(), self.dim));
        }
        if self.index.contains_key(word) {
            return Ok(());
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Exact match first, then the lowercased token.
    pub fn lookup(&self, token: &str) -> Option<(usize, &[f32])> {
        let idx = self.index.get(token).copied().or_else(|| {
            let lower = token.to_lowercase();
            if lower == token {
                None
            } else {
                self.index.get(&lower).copied()
            }
        })?;
        Some((idx, &self.data[idx * self.dim..(idx + 1) * self.dim]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.words
            .iter()
            .zip(self.data.chunks_exact(self.dim.max(1)))
            .map(|(w, v)| (w.as_str(), v))
    }
}

fn as_f64(v: &[f32], unit: bool) -> Vec<f64> {
    let out: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
    if unit {
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return out.into_iter().map(|x| x / norm).collect();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceVector {
    pub values: Vec<f64>,
    pub token_count: usize,
}

/// Mean of the vectors of in-vocabulary tokens (each occurrence counts).
/// With `normalize_words` every word vector is scaled to unit length first.
pub fn sentence_vector(
    tokens: &TokenList,
    table: &EmbeddingTable,
    normalize_words: bool,
) -> SentenceVector {
    let mut values = vec![0.0; table.dim()];
    let mut token_count = 0;
    for token in tokens.iter() {
        if let Some((_, v)) = table.lookup(token) {
            for (acc, x) in values.iter_mut().zip(as_f64(v, normalize_words)) {
                *acc += x;
            }
            token_count += 1;
        }
    }
    if token_count > 0 {
        for x in &mut values {
            *x /= token_count as f64;
        }
    }
    SentenceVector {
        values,
        token_count,
    }
}

/// Word mover's distance between two token lists.
///
/// Both sides become normalised bag-of-words distributions over their
/// in-vocabulary tokens; the ground cost is the euclidean distance between
/// word vectors (unit-normalised first when `normalize_words` is set). The
/// optimal transport is solved exactly. Returns [`WMD_EMPTY_SENTINEL`] if
/// either side has no in-vocabulary token.
pub fn wmd(
    tokens1: &TokenList,
    tokens2: &TokenList,
    table: &EmbeddingTable,
    normalize_words: bool,
) -> f64 {
    let bag = |tokens: &TokenList| -> Vec<(usize, u64)> {
        let mut counts: Vec<(usize, u64)> = Vec::new();
        let mut position: HashMap<usize, usize> = HashMap::new();
        for token in tokens.iter() {
            if let Some((idx, _)) = table.lookup(token) {
                let slot = *position.entry(idx).or_insert_with(|| {
                    counts.push((idx, 0));
                    counts.len() - 1
                });
                counts[slot].1 += 1;
            }
        }
        counts
    };
    let (b1, b2) = (bag(tokens1), bag(tokens2));
    if b1.is_empty() || b2.is_empty() {
        return WMD_EMPTY_SENTINEL;
    }
    let total1: u64 = b1.iter().map(|&(_, c)| c).sum();
    let total2: u64 = b2.iter().map(|&(_, c)| c).sum();

    let vectors = |b: &[(usize, u64)]| -> Vec<Vec<f64>> {
        b.iter()
            .map(|&(idx, _)| {
                as_f64(
                    &table.data[idx * table.dim..(idx + 1) * table.dim],
                    normalize_words,
                )
            })
            .collect()
    };
    let (v1, v2) = (vectors(&b1), vectors(&b2));
    let cost: Vec<Vec<f64>> = v1
        .iter()
        .map(|a| v2.iter().map(|b| euclidean(a, b)).collect())
        .collect();

    // Scale both marginals to the common integer total1 * total2.
    let supply: Vec<u64> = b1.iter().map(|&(_, c)| c * total2).collect();
    let demand: Vec<u64> = b2.iter().map(|&(_, c)| c * total1).collect();
    let (raw, _) = transport::solve(&supply, &demand, &cost);
    raw / (total1 * total2) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Cityblock,
    Canberra,
    Euclidean,
    Minkowski3,
    Braycurtis,
    Jaccard,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Cosine,
        Metric::Cityblock,
        Metric::Canberra,
        Metric::Euclidean,
        Metric::Minkowski3,
        Metric::Braycurtis,
        Metric::Jaccard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Cityblock => "cityblock",
            Metric::Canberra => "canberra",
            Metric::Euclidean => "euclidean",
            Metric::Minkowski3 => "minkowski3",
            Metric::Braycurtis => "braycurtis",
            Metric::Jaccard => "jaccard",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown metric {s:?}")))
    }
}

fn euclidean(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Distance between two equal-length vectors.
///
/// Degenerate cases: cosine is 0 when both vectors are zero and 1 when
/// exactly one is; Bray–Curtis and Jaccard are 0 on an all-zero
/// denominator; Canberra terms with `|u_i| + |v_i| = 0` contribute 0.
pub fn vector_distance(u: &[f64], v: &[f64], metric: Metric) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    let pairs = || u.iter().zip(v);
    let d = match metric {
        Metric::Cosine => {
            let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            match (nu == 0.0, nv == 0.0) {
                (true, true) => 0.0,
                (true, false) | (false, true) => 1.0,
                _ if u == v => 0.0,
                _ => {
                    let dot: f64 = pairs().map(|(a, b)| a * b).sum();
                    (1.0 - dot / (nu * nv)).max(0.0)
                }
            }
        }
        Metric::Cityblock => pairs().map(|(a, b)| (a - b).abs()).sum(),
        Metric::Euclidean => euclidean(u, v),
        Metric::Minkowski3 => pairs()
            .map(|(a, b)| (a - b).abs().powi(3))
            .sum::<f64>()
            .cbrt(),
        Metric::Canberra => pairs()
            .map(|(a, b)| {
                let den = a.abs() + b.abs();
                if den == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / den
                }
            })
            .sum(),
        Metric::Braycurtis => {
            let num: f64 = pairs().map(|(a, b)| (a - b).abs()).sum();
            let den: f64 = pairs().map(|(a, b)| (a + b).abs()).sum();
            if den == 0.0 {
                0.0
            } else {
                num / den
            }
        }
        Metric::Jaccard => {
            let (mut nonzero, mut unequal) = (0usize, 0usize);
            for (a, b) in pairs() {
                if *a != 0.0 || *b != 0.0 {
                    nonzero += 1;
                    if a != b {
                        unequal += 1;
                    }
                }
            }
            if nonzero == 0 {
                0.0
            } else {
                unequal as f64 / nonzero as f64
            }
        }
    };
    Ok(d)
}

pub fn distance(u: &SentenceVector, v: &SentenceVector, metric: Metric) -> Result<f64> {
    vector_distance(&u.values, &v.values, metric)
}

/// Skewness and excess kurtosis of a vector's components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub skew: f64,
    pub kurtosis: f64,
}

/// Population (biased) moments: `skew = m3 / m2^1.5`,
/// `kurtosis = m4 / m2² − 3`. A constant vector, or one with fewer than two
/// components, gives `(0, 0)`.
pub fn moments(values: &[f64]) -> Moments {
    let zero = Moments {
        skew: 0.0,
        kurtosis: 0.0,
    };
    if values.len() < 2 || values.iter().all(|&x| x == values[0]) {
        return zero;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        return zero;
    }
    Moments {
        skew: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2) - 3.0,
    }
}
