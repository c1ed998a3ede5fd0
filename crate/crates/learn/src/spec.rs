//! Classifier kinds and hyperparameters with per-kind defaults.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binning::MAX_BINS_LIMIT;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Knn,
    DecisionTree,
    RandomForest,
    ExtraTrees,
    Adaboost,
    Gbm,
    Xgb,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Knn,
        Kind::DecisionTree,
        Kind::RandomForest,
        Kind::ExtraTrees,
        Kind::Adaboost,
        Kind::Gbm,
        Kind::Xgb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Knn => "knn",
            Kind::DecisionTree => "decision_tree",
            Kind::RandomForest => "random_forest",
            Kind::ExtraTrees => "extra_trees",
            Kind::Adaboost => "adaboost",
            Kind::Gbm => "gbm",
            Kind::Xgb => "xgb",
        }
    }

    pub fn is_tree_based(self) -> bool {
        self != Kind::Knn
    }

    fn accepts(self, param: &str) -> bool {
        let tree = ["max_depth", "min_samples_leaf", "max_features", "max_bins"];
        let boost = ["n_estimators", "learning_rate", "max_depth", "min_samples_leaf", "subsample", "max_bins"];
        param == "seed"
            || match self {
                Kind::Knn => param == "k",
                Kind::DecisionTree => tree.contains(&param),
                Kind::RandomForest | Kind::ExtraTrees => {
                    tree.contains(&param) || param == "n_estimators" || param == "bootstrap"
                }
                Kind::Adaboost => ["n_estimators", "learning_rate", "max_bins"].contains(&param),
                Kind::Gbm => boost.contains(&param),
                Kind::Xgb => boost.contains(&param) || param == "lambda" || param == "gamma",
            }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown classifier kind {s:?}")))
    }
}

/// Number of candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    Sqrt,
}

impl MaxFeatures {
    pub fn count(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => ((n_features as f64).sqrt() as usize).max(1),
        }
    }
}

/// Unset fields take the kind's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_estimators: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_samples_leaf: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_features: Option<MaxFeatures>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bins: Option<usize>,
}

impl Hyperparameters {
    fn set_names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        let mut note = |set: bool, name| {
            if set {
                names.push(name);
            }
        };
        note(self.k.is_some(), "k");
        note(self.max_depth.is_some(), "max_depth");
        note(self.n_estimators.is_some(), "n_estimators");
        note(self.learning_rate.is_some(), "learning_rate");
        note(self.lambda.is_some(), "lambda");
        note(self.gamma.is_some(), "gamma");
        note(self.subsample.is_some(), "subsample");
        note(self.min_samples_leaf.is_some(), "min_samples_leaf");
        note(self.seed.is_some(), "seed");
        note(self.max_features.is_some(), "max_features");
        note(self.bootstrap.is_some(), "bootstrap");
        note(self.max_bins.is_some(), "max_bins");
        names
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: Kind,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
}

impl ClassifierSpec {
    pub fn new(kind: Kind) -> Self {
        ClassifierSpec {
            kind,
            hyperparameters: Hyperparameters::default(),
        }
    }

    pub fn with(mut self, f: impl FnOnce(&mut Hyperparameters)) -> Self {
        f(&mut self.hyperparameters);
        self
    }

    pub fn with_seed(self, seed: u64) -> Self {
        self.with(|h| h.seed = Some(seed))
    }

    pub fn k(&self) -> usize {
        self.hyperparameters.k.unwrap_or(5)
    }

    pub fn max_depth(&self) -> usize {
        self.hyperparameters.max_depth.unwrap_or(match self.kind {
            Kind::Adaboost => 1,
            Kind::Gbm | Kind::Xgb => 4,
            _ => 12,
        })
    }

    pub fn n_estimators(&self) -> usize {
        self.hyperparameters.n_estimators.unwrap_or(match self.kind {
            Kind::RandomForest | Kind::ExtraTrees => 100,
            Kind::Adaboost => 50,
            Kind::Gbm | Kind::Xgb => 200,
            _ => 1,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.hyperparameters.learning_rate.unwrap_or(match self.kind {
            Kind::Adaboost => 1.0,
            _ => 0.1,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.hyperparameters.lambda.unwrap_or(1.0)
    }

    pub fn gamma(&self) -> f64 {
        self.hyperparameters.gamma.unwrap_or(0.0)
    }

    pub fn subsample(&self) -> f64 {
        self.hyperparameters.subsample.unwrap_or(1.0)
    }

    pub fn min_samples_leaf(&self) -> usize {
        self.hyperparameters
            .min_samples_leaf
            .unwrap_or(match self.kind {
                Kind::DecisionTree | Kind::RandomForest | Kind::ExtraTrees => 10,
                _ => 1,
            })
    }

    pub fn seed(&self) -> u64 {
        self.hyperparameters.seed.unwrap_or(0)
    }

    pub fn max_features(&self) -> MaxFeatures {
        self.hyperparameters
            .max_features
            .unwrap_or(match self.kind {
                Kind::RandomForest | Kind::ExtraTrees => MaxFeatures::Sqrt,
                _ => MaxFeatures::All,
            })
    }

    pub fn bootstrap(&self) -> bool {
        self.hyperparameters
            .bootstrap
            .unwrap_or(self.kind == Kind::RandomForest)
    }

    pub fn max_bins(&self) -> usize {
        self.hyperparameters.max_bins.unwrap_or(256)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Hyperparameter(msg));
        for name in self.hyperparameters.set_names() {
            if !self.kind.accepts(name) {
                return bad(format!("{name} does not apply to {}", self.kind));
            }
        }
        if self.k() == 0 {
            return bad("k must be at least 1".into());
        }
        if self.max_depth() == 0 {
            return bad("max_depth must be at least 1".into());
        }
        if self.kind == Kind::Adaboost && self.max_depth() != 1 {
            return bad("adaboost uses depth-1 stumps".into());
        }
        let min_rounds = usize::from(!matches!(self.kind, Kind::Gbm | Kind::Xgb));
        if self.n_estimators() < min_rounds {
            return bad(format!("{} needs at least one estimator", self.kind));
        }
        let lr = self.learning_rate();
        if !(lr.is_finite() && lr >= 0.0) {
            return bad(format!("learning_rate {lr} must be finite and non-negative"));
        }
        for (name, v) in [("lambda", self.lambda()), ("gamma", self.gamma())] {
            if v.is_nan() || v < 0.0 {
                return bad(format!("{name} {v} must be non-negative"));
            }
        }
        let s = self.subsample();
        if !(s > 0.0 && s <= 1.0) {
            return bad(format!("subsample {s} must lie in (0, 1]"));
        }
        if self.min_samples_leaf() == 0 {
            return bad("min_samples_leaf must be at least 1".into());
        }
        if !(2..=MAX_BINS_LIMIT).contains(&self.max_bins()) {
            return bad(format!("max_bins must lie in [2, {MAX_BINS_LIMIT}]"));
        }
        Ok(())
    }
}
