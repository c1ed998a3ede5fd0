//! Fuzzy string-matching scores on a 0–100 scale.
//!
//! Every score derives from the normalised indel similarity
//! `2·LCS(a, b) / (|a| + |b|)` over unicode scalars. Public functions round
//! half away from zero to an integer; the weighted ratio combines the
//! unrounded intermediate scores and rounds once at the end.
//!
//! Empty inputs: two empty strings score 100, one empty string scores 0.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::textops::normalize_text;

/// Weight applied to token-based scores inside [`wratio`].
pub const WRATIO_UNBASE_SCALE: f64 = 0.95;
/// Weight applied to partial scores inside [`wratio`].
pub const WRATIO_PARTIAL_SCALE: f64 = 0.9;
/// Partial weight once the length ratio exceeds [`WRATIO_LONG_RATIO`].
pub const WRATIO_LONG_PARTIAL_SCALE: f64 = 0.6;
/// Length ratio from which [`wratio`] switches to partial matching.
pub const WRATIO_PARTIAL_RATIO: f64 = 1.5;
pub const WRATIO_LONG_RATIO: f64 = 8.0;

/// Precomputed match masks of a pattern for bit-parallel LCS.
struct Pattern {
    len: usize,
    words: usize,
    ascii: Vec<u64>,
    other: HashMap<char, Vec<u64>>,
}

impl Pattern {
    fn new(chars: &[char]) -> Self {
        let words = chars.len().div_ceil(64).max(1);
        let mut ascii = vec![0u64; 128 * words];
        let mut other: HashMap<char, Vec<u64>> = HashMap::new();
        for (i, &c) in chars.iter().enumerate() {
            let (w, bit) = (i / 64, 1u64 << (i % 64));
            if c.is_ascii() {
                ascii[c as usize * words + w] |= bit;
            } else {
                other.entry(c).or_insert_with(|| vec![0; words])[w] |= bit;
            }
        }
        Pattern {
            len: chars.len(),
            words,
            ascii,
            other,
        }
    }

    fn mask(&self, c: char) -> Option<&[u64]> {
        if c.is_ascii() {
            let start = c as usize * self.words;
            Some(&self.ascii[start..start + self.words])
        } else {
            self.other.get(&c).map(Vec::as_slice)
        }
    }

    /// Length of the longest common subsequence with `text`.
    fn lcs(&self, text: &[char], v: &mut Vec<u64>) -> usize {
        if self.len == 0 || text.is_empty() {
            return 0;
        }
        v.clear();
        v.resize(self.words, !0u64);
        for &c in text {
            let Some(m) = self.mask(c) else { continue };
            let mut carry = 0u64;
            for (vw, &mw) in v.iter_mut().zip(m) {
                let u = *vw & mw;
                let (sum, c1) = vw.overflowing_add(u);
                let (sum, c2) = sum.overflowing_add(carry);
                carry = u64::from(c1 || c2);
                *vw = sum | (*vw & !mw);
            }
        }
        let mut zeros = 0;
        for (w, &word) in v.iter().enumerate() {
            let bits = (self.len - w * 64).min(64);
            let valid = if bits == 64 { !0 } else { (1u64 << bits) - 1 };
            zeros += (!word & valid).count_ones() as usize;
        }
        zeros
    }
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

fn similarity_from_lcs(lcs: usize, total: usize) -> f64 {
    if total == 0 {
        100.0
    } else {
        (200 * lcs) as f64 / total as f64
    }
}

fn indel_similarity(a: &[char], b: &[char]) -> f64 {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let lcs = Pattern::new(short).lcs(long, &mut Vec::new());
    similarity_from_lcs(lcs, a.len() + b.len())
}

fn partial_similarity(a: &[char], b: &[char]) -> f64 {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return if long.is_empty() { 100.0 } else { 0.0 };
    }
    let pattern = Pattern::new(short);
    let mut scratch = Vec::new();
    let mut best = 0;
    for window in long.windows(short.len()) {
        best = best.max(pattern.lcs(window, &mut scratch));
        if best == short.len() {
            break;
        }
    }
    similarity_from_lcs(best, 2 * short.len())
}

fn sorted_tokens(s: &str) -> String {
    let normalized = normalize_text(s);
    let mut tokens: Vec<&str> = normalized.split(' ').filter(|t| !t.is_empty()).collect();
    tokens.sort_unstable();
    tokens.join(" ")
}

fn token_sort_similarity(s1: &str, s2: &str, partial: bool) -> f64 {
    let (a, b) = (chars(&sorted_tokens(s1)), chars(&sorted_tokens(s2)));
    if partial {
        partial_similarity(&a, &b)
    } else {
        indel_similarity(&a, &b)
    }
}

fn token_set_similarity(s1: &str, s2: &str, partial: bool) -> f64 {
    let (n1, n2) = (normalize_text(s1), normalize_text(s2));
    let set1: BTreeSet<&str> = n1.split(' ').filter(|t| !t.is_empty()).collect();
    let set2: BTreeSet<&str> = n2.split(' ').filter(|t| !t.is_empty()).collect();
    if set1.is_empty() || set2.is_empty() {
        return if set1.is_empty() && set2.is_empty() { 100.0 } else { 0.0 };
    }
    let join = |it: &mut dyn Iterator<Item = &&str>| it.copied().collect::<Vec<_>>().join(" ");
    let common = join(&mut set1.intersection(&set2));
    let only1 = join(&mut set1.difference(&set2));
    let only2 = join(&mut set2.difference(&set1));
    let combine = |rest: &str| format!("{common} {rest}").trim().to_string();
    let t0 = chars(&common);
    let t1 = chars(&combine(&only1));
    let t2 = chars(&combine(&only2));
    let score = |x: &[char], y: &[char]| {
        if partial {
            partial_similarity(x, y)
        } else {
            indel_similarity(x, y)
        }
    };
    score(&t0, &t1).max(score(&t0, &t2)).max(score(&t1, &t2))
}

fn wratio_similarity(s1: &str, s2: &str) -> f64 {
    let (p1, p2) = (normalize_text(s1), normalize_text(s2));
    let (c1, c2) = (chars(&p1), chars(&p2));
    if c1.is_empty() || c2.is_empty() {
        return if c1.is_empty() && c2.is_empty() { 100.0 } else { 0.0 };
    }
    let base = indel_similarity(&c1, &c2);
    let len_ratio = c1.len().max(c2.len()) as f64 / c1.len().min(c2.len()) as f64;
    if len_ratio < WRATIO_PARTIAL_RATIO {
        let sort = token_sort_similarity(&p1, &p2, false) * WRATIO_UNBASE_SCALE;
        let set = token_set_similarity(&p1, &p2, false) * WRATIO_UNBASE_SCALE;
        return base.max(sort).max(set);
    }
    let partial_scale = if len_ratio > WRATIO_LONG_RATIO {
        WRATIO_LONG_PARTIAL_SCALE
    } else {
        WRATIO_PARTIAL_SCALE
    };
    let partial = partial_similarity(&c1, &c2) * partial_scale;
    let token_scale = WRATIO_UNBASE_SCALE * partial_scale;
    let sort = token_sort_similarity(&p1, &p2, true) * token_scale;
    let set = token_set_similarity(&p1, &p2, true) * token_scale;
    base.max(partial).max(sort).max(set)
}

fn to_score(x: f64) -> u8 {
    x.round().clamp(0.0, 100.0) as u8
}

/// `100 · 2·LCS / (|s1| + |s2|)` on the raw strings.
pub fn indel_ratio(s1: &str, s2: &str) -> u8 {
    to_score(indel_similarity(&chars(s1), &chars(s2)))
}

/// Best [`indel_ratio`] of the shorter string against every same-length
/// window of the longer one.
pub fn partial_ratio(s1: &str, s2: &str) -> u8 {
    to_score(partial_similarity(&chars(s1), &chars(s2)))
}

pub fn token_sort_ratio(s1: &str, s2: &str, partial: bool) -> u8 {
    to_score(token_sort_similarity(s1, s2, partial))
}

/// Compares the sorted intersection of the token sets with the
/// intersection extended by each side's sorted remainder and returns the
/// best of the three pairings.
pub fn token_set_ratio(s1: &str, s2: &str, partial: bool) -> u8 {
    to_score(token_set_similarity(s1, s2, partial))
}

/// [`indel_ratio`] of the normalised strings.
pub fn qratio(s1: &str, s2: &str) -> u8 {
    to_score(indel_similarity(
        &chars(&normalize_text(s1)),
        &chars(&normalize_text(s2)),
    ))
}

/// Weighted ratio: the best of the plain, token and partial scores, with
/// the latter scaled down depending on how different the lengths are.
pub fn wratio(s1: &str, s2: &str) -> u8 {
    to_score(wratio_similarity(s1, s2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzyFeatures {
    pub qratio: u8,
    pub wratio: u8,
    pub partial_ratio: u8,
    pub token_set_ratio: u8,
    pub token_sort_ratio: u8,
    pub partial_token_set_ratio: u8,
    pub partial_token_sort_ratio: u8,
}

pub fn fuzzy_features(q1: &str, q2: &str) -> FuzzyFeatures {
    FuzzyFeatures {
        qratio: qratio(q1, q2),
        wratio: wratio(q1, q2),
        partial_ratio: partial_ratio(q1, q2),
        token_set_ratio: token_set_ratio(q1, q2, false),
        token_sort_ratio: token_sort_ratio(q1, q2, false),
        partial_token_set_ratio: token_set_ratio(q1, q2, true),
        partial_token_sort_ratio: token_sort_ratio(q1, q2, true),
    }
}
