//! Loading, cleaning, summarising and splitting the question-pair table.
//!
//! The input is the tab-separated release with the header
//! `id qid1 qid2 question1 question2 is_duplicate`. Fields may be
//! double-quoted, in which case they can contain tabs, newlines and
//! doubled quotes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Column names of the pair TSV, in file order.
pub const TSV_HEADER: [&str; 6] = ["id", "qid1", "qid2", "question1", "question2", "is_duplicate"];

/// Questions with at most this many characters are removed by [`clean`].
pub const SHORT_QUESTION_CHARS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionPair {
    pub row_id: u64,
    pub qid1: u64,
    pub qid2: u64,
    pub question1: String,
    pub question2: String,
    pub is_duplicate: u8,
}

impl QuestionPair {
    pub fn is_positive(&self) -> bool {
        self.is_duplicate == 1
    }
}

/// Ordered collection of question pairs with unique row ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairTable {
    rows: Vec<QuestionPair>,
}

impl PairTable {
    /// Builds a table, rejecting duplicate row ids and labels outside {0, 1}.
    pub fn new(rows: Vec<QuestionPair>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for row in &rows {
            if row.is_duplicate > 1 {
                return Err(Error::Invalid(format!(
                    "row {} has label {}",
                    row.row_id, row.is_duplicate
                )));
            }
            if !seen.insert(row.row_id) {
                return Err(Error::Invalid(format!("duplicate row id {}", row.row_id)));
            }
        }
        Ok(PairTable { rows })
    }

    pub fn rows(&self) -> &[QuestionPair] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.is_duplicate).collect()
    }

    pub fn into_rows(self) -> Vec<QuestionPair> {
        self.rows
    }

    fn select(&self, indices: &[usize]) -> PairTable {
        PairTable {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// What to do with rows that fail to parse.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub skip_bad_rows: bool,
}

/// A row dropped under [`LoadOptions::skip_bad_rows`].
#[derive(Debug, Clone)]
pub struct RowIssue {
    pub line: u64,
    pub message: String,
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<PairTable> {
    load_pairs_with(path, LoadOptions::default()).map(|(table, _)| table)
}

pub fn load_pairs_with(
    path: impl AsRef<Path>,
    options: LoadOptions,
) -> Result<(PairTable, Vec<RowIssue>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs(file, options)
}

pub fn read_pairs<R: Read>(reader: R, options: LoadOptions) -> Result<(PairTable, Vec<RowIssue>)> {
    let mut tsv = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let header_len = tsv.headers()?.len();
    if header_len != TSV_HEADER.len() {
        return Err(Error::BadRow {
            line: 1,
            message: format!("header has {header_len} fields, expected {}", TSV_HEADER.len()),
        });
    }

    let mut rows = Vec::new();
    let mut issues = Vec::new();
    let mut seen = HashSet::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = match tsv.read_record(&mut record) {
            Ok(more) => more,
            Err(e) => match e.kind() {
                // Invalid UTF-8 is a per-row problem, anything else is fatal.
                csv::ErrorKind::Utf8 { pos, .. } if options.skip_bad_rows => {
                    issues.push(RowIssue {
                        line: pos.as_ref().map_or(0, |p| p.line()),
                        message: e.to_string(),
                    });
                    continue;
                }
                _ => return Err(e.into()),
            },
        };
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        match parse_record(&record).and_then(|pair| {
            if seen.insert(pair.row_id) {
                Ok(pair)
            } else {
                Err(format!("duplicate id {}", pair.row_id))
            }
        }) {
            Ok(pair) => rows.push(pair),
            Err(message) if options.skip_bad_rows => issues.push(RowIssue { line, message }),
            Err(message) => return Err(Error::BadRow { line, message }),
        }
    }
    Ok((PairTable { rows }, issues))
}

fn parse_record(record: &csv::StringRecord) -> std::result::Result<QuestionPair, String> {
    if record.len() != TSV_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            TSV_HEADER.len(),
            record.len()
        ));
    }
    let int = |idx: usize| -> std::result::Result<u64, String> {
        record[idx]
            .trim()
            .parse::<u64>()
            .map_err(|_| format!("{} is not an integer: {:?}", TSV_HEADER[idx], &record[idx]))
    };
    let is_duplicate = match record[5].trim() {
        "0" => 0,
        "1" => 1,
        other => return Err(format!("is_duplicate must be 0 or 1, found {other:?}")),
    };
    Ok(QuestionPair {
        row_id: int(0)?,
        qid1: int(1)?,
        qid2: int(2)?,
        question1: record[3].to_string(),
        question2: record[4].to_string(),
        is_duplicate,
    })
}

pub fn save_pairs(table: &PairTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_pairs(table, file)
}

pub fn write_pairs<W: Write>(table: &PairTable, writer: W) -> Result<()> {
    let mut tsv = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(writer);
    tsv.write_record(TSV_HEADER)?;
    for row in &table.rows {
        tsv.write_record([
            row.row_id.to_string().as_str(),
            row.qid1.to_string().as_str(),
            row.qid2.to_string().as_str(),
            row.question1.as_str(),
            row.question2.as_str(),
            if row.is_duplicate == 1 { "1" } else { "0" },
        ])?;
    }
    tsv.flush().map_err(|e| Error::io("<tsv output>", e))?;
    Ok(())
}

/// Length in unicode scalar values, whitespace and punctuation included.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Drops every pair where either question has at most
/// [`SHORT_QUESTION_CHARS`] characters. Order is preserved.
pub fn clean(table: &PairTable) -> PairTable {
    let keep = |q: &str| char_len(q) > SHORT_QUESTION_CHARS;
    PairTable {
        rows: table
            .rows
            .iter()
            .filter(|r| keep(&r.question1) && keep(&r.question2))
            .cloned()
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub total_pairs: usize,
    pub positives: usize,
    pub negatives: usize,
    pub avg_len_q1: f64,
    pub avg_len_q2: f64,
    pub sum_len_q1: u64,
    pub sum_len_q2: u64,
    pub max_len_q1: usize,
    pub max_len_q2: usize,
    pub short_q1: usize,
    pub short_q2: usize,
    #[serde(skip)]
    pub question_occurrence: HashMap<String, u64>,
}

impl CorpusStats {
    /// Number of distinct questions seen exactly `k` times, keyed by `k`.
    pub fn occurrence_histogram(&self) -> BTreeMap<u64, u64> {
        let mut hist = BTreeMap::new();
        for &count in self.question_occurrence.values() {
            *hist.entry(count).or_insert(0) += 1;
        }
        hist
    }

    pub fn distinct_questions(&self) -> usize {
        self.question_occurrence.len()
    }
}

pub fn corpus_stats(table: &PairTable) -> CorpusStats {
    let mut stats = CorpusStats {
        total_pairs: table.len(),
        positives: 0,
        negatives: 0,
        avg_len_q1: 0.0,
        avg_len_q2: 0.0,
        sum_len_q1: 0,
        sum_len_q2: 0,
        max_len_q1: 0,
        max_len_q2: 0,
        short_q1: 0,
        short_q2: 0,
        question_occurrence: HashMap::new(),
    };
    for row in &table.rows {
        if row.is_positive() {
            stats.positives += 1;
        } else {
            stats.negatives += 1;
        }
        let (l1, l2) = (char_len(&row.question1), char_len(&row.question2));
        stats.sum_len_q1 += l1 as u64;
        stats.sum_len_q2 += l2 as u64;
        stats.max_len_q1 = stats.max_len_q1.max(l1);
        stats.max_len_q2 = stats.max_len_q2.max(l2);
        stats.short_q1 += usize::from(l1 <= SHORT_QUESTION_CHARS);
        stats.short_q2 += usize::from(l2 <= SHORT_QUESTION_CHARS);
        for q in [&row.question1, &row.question2] {
            *stats.question_occurrence.entry(q.clone()).or_insert(0) += 1;
        }
    }
    if !table.is_empty() {
        stats.avg_len_q1 = stats.sum_len_q1 as f64 / table.len() as f64;
        stats.avg_len_q2 = stats.sum_len_q2 as f64 / table.len() as f64;
    }
    stats
}

/// Splits row indices into (train, test) so that each class contributes to
/// the test side in proportion to its size.
///
/// The test size is `round(test_fraction * n)`; per-class quotas use the
/// largest-remainder method so they add up to exactly that. Each class is
/// shuffled with a ChaCha8 stream seeded by `seed`. Both returned index
/// lists are sorted ascending.
pub fn stratified_indices(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        match y {
            0 | 1 => by_class[y as usize].push(i),
            other => return Err(Error::Invalid(format!("label {other} at row {i}"))),
        }
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::Invalid(format!(
                "class {class} has {} rows, need at least 2 per class",
                members.len()
            )));
        }
    }

    let n_test = (test_fraction * labels.len() as f64).round() as usize;
    let exact: Vec<f64> = by_class
        .iter()
        .map(|m| test_fraction * m.len() as f64)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut missing = n_test.saturating_sub(quota.iter().sum());
    for &class in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if quota[class] < by_class[class].len() {
            quota[class] += 1;
            missing -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(labels.len() - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (class, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..quota[class]]);
        train.extend_from_slice(&members[quota[class]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified (train, test) partition of the table; row order is kept on
/// both sides.
pub fn stratified_split(
    table: &PairTable,
    test_fraction: f64,
    seed: u64,
) -> Result<(PairTable, PairTable)> {
    let (train, test) = stratified_indices(&table.labels(), test_fraction, seed)?;
    Ok((table.select(&train), table.select(&test)))
}

/// Stratified sample of `n` rows, drawn as the test side of a split.
pub fn stratified_sample(table: &PairTable, n: usize, seed: u64) -> Result<PairTable> {
    if n >= table.len() {
        return Ok(table.clone());
    }
    let (_, sample) = stratified_split(table, n as f64 / table.len() as f64, seed)?;
    Ok(sample)
}
