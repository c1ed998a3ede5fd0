use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dupliq_core::tfidf::Analyzer;
use dupliq_learn::Kind;

#[derive(Debug, Parser)]
#[command(name = "dupliq", version = crate::VERSION, about = "Duplicate question pair detection pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment config (versioned JSON). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomised stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true, env = "DUPLIQ_THREADS")]
    pub threads: Option<usize>,
    /// Where to write the JSON report (default: dupliq-<command>.json).
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    Table5,
    Table6,
    Table7,
}

impl Table {
    pub fn name(self) -> &'static str {
        match self {
            Table::Table5 => "table5",
            Table::Table6 => "table6",
            Table::Table7 => "table7",
        }
    }
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    s.parse().map_err(|e: dupliq_learn::Error| e.to_string())
}

fn parse_analyzer(s: &str) -> Result<Analyzer, String> {
    s.parse().map_err(|e: dupliq_core::Error| e.to_string())
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo = lo.trim().parse().map_err(|_| format!("bad n-gram bound {lo:?}"))?;
    let hi = hi.trim().parse().map_err(|_| format!("bad n-gram bound {hi:?}"))?;
    Ok((lo, hi))
}

#[derive(Debug, Args, Default)]
pub struct Embeddings {
    /// GloVe text vectors.
    #[arg(long)]
    pub glove: Option<PathBuf>,
    /// word2vec binary vectors.
    #[arg(long)]
    pub word2vec: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus statistics: pair counts, lengths, question occurrences.
    Stats {
        /// Question-pair TSV
        #[arg(long)]
        data: Option<PathBuf>,
        /// Clean the table before counting.
        #[arg(long)]
        clean: bool,
    },
    /// Drop pairs where either question is too short to be real.
    Clean {
        /// Question-pair TSV
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified train/test split.
    Split {
        /// Question-pair TSV
        #[arg(long)]
        data: Option<PathBuf>,
        /// Held-out share of pairs [config default: 0.2]
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        train_out: Option<PathBuf>,
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
    /// Extract the engineered feature matrix (CSV).
    Featurize {
        /// Question-pair TSV
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        embeddings: Embeddings,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Feature columns to drop.
        #[arg(long, value_delimiter = ',')]
        drop: Vec<String>,
        /// Drop the eight low-importance features.
        #[arg(long)]
        drop_low_importance: bool,
    },
    /// Fit a TF-IDF vectorizer on the questions of a pair file.
    TfidfFit {
        /// Question-pair TSV
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_analyzer)]
        analyzer: Option<Analyzer>,
        /// N-gram range as LO,HI.
        #[arg(long, value_parser = parse_range)]
        ngram: Option<(usize, usize)>,
        /// Vocabulary cap for TF-IDF [config default: 50000]
        #[arg(long)]
        max_features: Option<usize>,
    },
    /// Turn pairs into sparse TF-IDF pair vectors.
    TfidfFeaturize {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Question-pair TSV
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one classifier.
    Train {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, value_parser = parse_kind)]
        kind: Option<Kind>,
        /// Hyperparameter as NAME=VALUE; repeatable.
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved model.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Rank features by importance under a saved model.
    Importance {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Pick the best spec of a grid on a validation slice.
    Grid {
        #[arg(long)]
        features: Option<PathBuf>,
        /// JSON array of classifier specs.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        val_fraction: Option<f64>,
        /// Save the best spec refitted on all rows.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a network layout and report its layers.
    NnBuild {
        #[arg(long)]
        arch: Option<u8>,
        /// Shrunken dimensions.
        #[arg(long)]
        toy: bool,
        /// Vocabulary size when no data is given.
        #[arg(long)]
        vocab_size: Option<usize>,
        /// Question-pair TSV
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        glove: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a network on pairs, or on synthetic pairs with --toy.
    NnTrain {
        #[arg(long)]
        arch: Option<u8>,
        #[arg(long)]
        toy: bool,
        /// Question-pair TSV
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        glove: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of a toy network's gradients.
    NnGradcheck {
        #[arg(long)]
        arch: Option<u8>,
        #[arg(long, default_value_t = dupliq_neural::gradcheck::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Rerun one of the classifier tables end to end.
    Reproduce {
        #[arg(value_enum)]
        table: Table,
        /// Question-pair TSV
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        embeddings: Embeddings,
        /// Stratified subsample size before splitting.
        #[arg(long)]
        sample: Option<usize>,
        /// Held-out share of pairs [config default: 0.2]
        #[arg(long)]
        test_fraction: Option<f64>,
        /// Restrict to these classifier kinds.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
        kinds: Vec<Kind>,
        /// Vocabulary cap for TF-IDF [config default: 50000]
        #[arg(long)]
        max_features: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stats { .. } => "stats",
            Command::Clean { .. } => "clean",
            Command::Split { .. } => "split",
            Command::Featurize { .. } => "featurize",
            Command::TfidfFit { .. } => "tfidf-fit",
            Command::TfidfFeaturize { .. } => "tfidf-featurize",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Importance { .. } => "importance",
            Command::Grid { .. } => "grid",
            Command::NnBuild { .. } => "nn-build",
            Command::NnTrain { .. } => "nn-train",
            Command::NnGradcheck { .. } => "nn-gradcheck",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}
