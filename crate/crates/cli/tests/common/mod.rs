//! Synthetic question pairs and word vectors. Duplicates share a topic,
//! non-duplicates mix topics, and each topic's words sit close together
//! in vector space.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dupliq_core::corpus::{save_pairs, PairTable, QuestionPair};
use dupliq_core::embed::{write_glove_text, EmbeddingTable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOPICS: [[&str; 4]; 8] = [
    ["python", "code", "program", "script"],
    ["money", "cash", "savings", "income"],
    ["weight", "fat", "diet", "calories"],
    ["phone", "mobile", "android", "iphone"],
    ["job", "career", "work", "interview"],
    ["movie", "film", "cinema", "actor"],
    ["india", "delhi", "mumbai", "country"],
    ["exam", "study", "college", "marks"],
];

const TEMPLATES: [&str; 5] = [
    "how can i improve my {a} and {b}?",
    "what is the best way to learn about {a} {b}?",
    "why is {a} so important for {b}?",
    "which {a} should i choose for {b} today?",
    "is it worth spending time on {a} or {b}?",
];

const DIM: usize = 8;

fn question(r: &mut ChaCha8Rng, topic: usize) -> String {
    let words = TOPICS[topic];
    let a = words[r.gen_range(0..4)];
    let b = words[r.gen_range(0..4)];
    TEMPLATES[r.gen_range(0..TEMPLATES.len())].replace("{a}", a).replace("{b}", b)
}

/// `n` pairs, about 40% duplicates, plus a few too-short rows that
/// cleaning removes.
pub fn pairs(n: usize, seed: u64) -> PairTable {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for i in 0..n as u64 {
        let t1 = r.gen_range(0..TOPICS.len());
        let dup = r.gen_bool(0.4);
        let t2 = if dup {
            t1
        } else {
            (t1 + r.gen_range(1..TOPICS.len())) % TOPICS.len()
        };
        let mut q1 = question(&mut r, t1);
        let q2 = question(&mut r, t2);
        if i % 50 == 7 {
            q1 = "why?".into();
        }
        rows.push(QuestionPair {
            row_id: i,
            qid1: 2 * i + 1,
            qid2: 2 * i + 2,
            question1: q1,
            question2: q2,
            is_duplicate: u8::from(dup),
        });
    }
    PairTable::new(rows).unwrap()
}

pub fn vectors(seed: u64) -> EmbeddingTable {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(DIM);
    for words in TOPICS {
        let centre: Vec<f32> = (0..DIM).map(|_| r.gen_range(-1.0..1.0)).collect();
        for w in words {
            let v: Vec<f32> = centre.iter().map(|c| c + r.gen_range(-0.1..0.1)).collect();
            table.insert(w, &v).unwrap();
        }
    }
    let mut filler: Vec<&str> = TEMPLATES
        .iter()
        .flat_map(|t| t.split(' '))
        .map(|w| w.trim_end_matches('?'))
        .filter(|w| !w.starts_with('{'))
        .collect();
    filler.sort_unstable();
    filler.dedup();
    filler.shuffle(&mut r);
    for w in filler {
        let v: Vec<f32> = (0..DIM).map(|_| r.gen_range(-1.0..1.0)).collect();
        table.insert(w, &v).unwrap();
    }
    table
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub tsv: PathBuf,
    pub glove: PathBuf,
}

impl Fixture {
    pub fn new(n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let tsv = dir.path().join("pairs.tsv");
        let glove = dir.path().join("glove.txt");
        save_pairs(&pairs(n, 11), &tsv).unwrap();
        let file = std::fs::File::create(&glove).unwrap();
        write_glove_text(&vectors(5), file).unwrap();
        Fixture { dir, tsv, glove }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn dupliq(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dupliq"))
        .current_dir(cwd)
        .args(args)
        .env_remove("DUPLIQ_THREADS")
        .output()
        .unwrap()
}

pub fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}
