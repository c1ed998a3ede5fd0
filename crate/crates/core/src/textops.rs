//! Normalisation, tokenisation, stop words and the basic length/word-count
//! features of a question pair.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// English stop words (the 179-word NLTK list, v3.8). Matching is on
/// lowercased tokens.
pub const STOP_WORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
    "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
    "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
    "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn",
    "wouldn't",
];

fn stop_word_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOP_WORDS.iter().copied().collect())
}

pub fn is_stop_word(token: &str) -> bool {
    stop_word_set().contains(token)
}

/// Whitespace-free, non-empty tokens in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenList(Vec<String>);

impl TokenList {
    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenList {
    /// Collects tokens, splitting any that contain whitespace and dropping
    /// empty ones so the list invariant holds.
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut out = Vec::new();
        for s in iter {
            let s: String = s.into();
            if s.chars().any(char::is_whitespace) {
                out.extend(s.split_whitespace().map(str::to_string));
            } else if !s.is_empty() {
                out.push(s);
            }
        }
        TokenList(out)
    }
}

/// Lowercases, maps every non-alphanumeric character to a space and
/// collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    // Lowercasing can emit combining marks (e.g. U+0130), which are then
    // treated as separators so the result is a fixed point.
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

pub fn tokenize(text: &str) -> TokenList {
    TokenList(text.split_whitespace().map(str::to_string).collect())
}

pub fn remove_stopwords(tokens: &TokenList) -> TokenList {
    TokenList(
        tokens
            .iter()
            .filter(|t| !is_stop_word(t))
            .map(str::to_string)
            .collect(),
    )
}

/// Tokens used for embedding lookups: punctuation stripped, case kept,
/// stop words (compared lowercased) removed.
pub fn content_tokens(text: &str) -> TokenList {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        if !current.is_empty() {
            let word = std::mem::take(current);
            if !is_stop_word(&word.to_lowercase()) {
                out.push(word);
            }
        }
    };
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.push(c);
        } else {
            flush(&mut current);
        }
    }
    flush(&mut current);
    TokenList(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicFeatures {
    pub len_q1: usize,
    pub len_q2: usize,
    pub len_diff: i64,
    pub nchar_q1: usize,
    pub nchar_q2: usize,
    pub nwords_q1: usize,
    pub nwords_q2: usize,
    pub common_words: usize,
}

/// Word counts use raw whitespace splitting, so punctuation stays attached
/// (`"learn?"` is one word). Common words compare distinct lowercased raw
/// tokens.
pub fn basic_features(q1: &str, q2: &str) -> BasicFeatures {
    let len_q1 = q1.chars().count();
    let len_q2 = q2.chars().count();
    let nchar = |q: &str| q.chars().filter(|c| !c.is_whitespace()).count();
    let lower_set = |q: &str| -> HashSet<String> {
        q.split_whitespace().map(str::to_lowercase).collect()
    };
    let w1 = lower_set(q1);
    let w2 = lower_set(q2);
    BasicFeatures {
        len_q1,
        len_q2,
        len_diff: len_q1 as i64 - len_q2 as i64,
        nchar_q1: nchar(q1),
        nchar_q2: nchar(q2),
        nwords_q1: q1.split_whitespace().count(),
        nwords_q2: q2.split_whitespace().count(),
        common_words: w1.intersection(&w2).count(),
    }
}
