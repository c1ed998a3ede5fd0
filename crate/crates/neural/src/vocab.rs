//! Word-index vocabulary and fixed-length sequence encoding.

use std::collections::HashMap;

use dupliq_core::embed::EmbeddingTable;
use dupliq_core::textops::{normalize_text, tokenize};
use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Index 0 is padding; words get `1..` by descending frequency, ties in
/// lexicographic order. Words not in the vocabulary are dropped on encode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(words: Vec<String>) -> Self {
        Vocabulary::from_words(words)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

fn words_of(text: &str) -> Vec<String> {
    tokenize(&normalize_text(text)).into_vec()
}

impl Vocabulary {
    pub fn fit<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for w in words_of(text) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Vocabulary::from_words(ranked.into_iter().map(|(w, _)| w).collect())
    }

    /// Vocabulary with `words[i]` at index `i + 1`.
    pub fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32 + 1)).collect();
        Vocabulary { words, index }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Number of embedding rows needed, padding included.
    pub fn size(&self) -> usize {
        self.words.len() + 1
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    /// Known word indices, truncated to `seq_len` and right-padded with 0.
    pub fn encode(&self, text: &str, seq_len: usize) -> Vec<u32> {
        let mut out: Vec<u32> = words_of(text)
            .iter()
            .filter_map(|w| self.index_of(w))
            .take(seq_len)
            .collect();
        out.resize(seq_len, 0);
        out
    }

    pub fn encode_all<'a>(&self, texts: impl IntoIterator<Item = &'a str>, seq_len: usize) -> Result<Tensor> {
        let rows: Vec<Vec<u32>> = texts.into_iter().map(|t| self.encode(t, seq_len)).collect();
        if rows.is_empty() {
            return Ok(Tensor::zeros(vec![0, seq_len]));
        }
        Tensor::from_indices(&rows)
    }

    /// `[size, dim]` matrix of pre-trained vectors; padding and words
    /// missing from the table get zero rows.
    pub fn pretrained_matrix(&self, table: &EmbeddingTable) -> Result<Tensor> {
        let dim = table.dim();
        if dim == 0 {
            return Err(Error::Invalid("embedding table has zero width".into()));
        }
        let mut data = vec![0.0; self.size() * dim];
        for (i, w) in self.words.iter().enumerate() {
            if let Some((_, v)) = table.lookup(w) {
                for (o, &x) in data[(i + 1) * dim..(i + 2) * dim].iter_mut().zip(v) {
                    *o = f64::from(x);
                }
            }
        }
        Tensor::new(vec![self.size(), dim], data)
    }
}
