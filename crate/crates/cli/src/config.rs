//! Experiment config: one versioned JSON document. Command-line flags are
//! merged over it and the resolved result goes into every report.

use std::path::{Path, PathBuf};

use dupliq_core::tfidf::{Analyzer, DEFAULT_MAX_FEATURES};
use dupliq_learn::ClassifierSpec;
use dupliq_neural::{Dims, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glove: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word2vec: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfidfConfig {
    pub analyzer: Analyzer,
    /// Defaults to the analyzer's own range.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ngram_range: Option<(usize, usize)>,
    pub max_features: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            analyzer: Analyzer::Char,
            ngram_range: None,
            max_features: DEFAULT_MAX_FEATURES,
        }
    }
}

impl TfidfConfig {
    pub fn range_for(&self, analyzer: Analyzer) -> (usize, usize) {
        match self.ngram_range {
            Some(r) if analyzer == self.analyzer => r,
            _ => analyzer.default_ngrams(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnConfig {
    pub arch: u8,
    pub toy: bool,
    /// Layer sizes; full size unless `toy` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Dims>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab_size: Option<usize>,
    pub train: TrainConfig,
}

impl Default for NnConfig {
    fn default() -> Self {
        NnConfig {
            arch: 1,
            toy: false,
            dims: None,
            vocab_size: None,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub paths: Paths,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub test_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    pub drop: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierSpec>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<ClassifierSpec>,
    pub val_fraction: f64,
    pub tfidf: TfidfConfig,
    pub nn: NnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            paths: Paths::default(),
            seed: None,
            test_fraction: DEFAULT_TEST_FRACTION,
            sample: None,
            drop: Vec::new(),
            classifier: None,
            grid: Vec::new(),
            val_fraction: dupliq_learn::grid::DEFAULT_VAL_FRACTION,
            tfidf: TfidfConfig::default(),
            nn: NnConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Contract(format!("{}: {e}", path.display())))?;
        if config.version != CONFIG_VERSION {
            return Err(CliError::Contract(format!(
                "{}: config version {} is not supported (expected {CONFIG_VERSION})",
                path.display(),
                config.version
            )));
        }
        Ok(config)
    }

    pub fn require_seed(&self, stage: &str) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::Contract(format!("{stage} is randomised: pass --seed or set \"seed\" in the config")))
    }
}

/// Overwrites `slot` when the flag was given.
pub fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

pub fn require<'a>(slot: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    slot.as_deref()
        .ok_or_else(|| CliError::Contract(format!("missing {flag} (flag or config path)")))
}
