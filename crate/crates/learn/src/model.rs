//! Training entry point, the fitted model type and its JSON persistence.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::Binned;
use crate::boost::{adaboost_proba, fit_adaboost, fit_boosting, prior, sigmoid};
use crate::forest;
use crate::knn::KnnModel;
use crate::matrix::Matrix;
use crate::spec::{ClassifierSpec, Kind};
use crate::tree::Tree;
use crate::{Error, Result};

const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum State {
    Knn(KnnModel),
    /// A single tree's leaf probability.
    Tree { tree: Tree },
    /// Fraction of trees whose leaf votes positive.
    Forest { trees: Vec<Tree> },
    Adaboost {
        stumps: Vec<Tree>,
        alphas: Vec<f64>,
        prior: f64,
    },
    Boosted {
        base_margin: f64,
        learning_rate: f64,
        trees: Vec<Tree>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    version: u32,
    spec: ClassifierSpec,
    n_features: usize,
    sparse: bool,
    /// Normalised split gain per feature; absent for knn.
    gain_importance: Option<Vec<f64>>,
    state: State,
}

fn check_labels(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if let Some(i) = y.iter().position(|&v| v > 1) {
        return Err(Error::Invalid(format!("label {} at row {i} is not 0 or 1", y[i])));
    }
    Ok(())
}

/// Fits a classifier. Deterministic for a fixed spec (including its seed).
pub fn train(spec: &ClassifierSpec, x: &Matrix, y: &[u8]) -> Result<ClassifierModel> {
    spec.validate()?;
    check_labels(x, y)?;
    if y.len() < 2 {
        return Err(Error::Invalid("training needs at least two rows".into()));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }
    x.check_finite()?;

    let n_features = x.n_cols();
    let (state, importance) = if spec.kind == Kind::Knn {
        (State::Knn(KnnModel::new(spec.k(), x.clone(), y.to_vec())), None)
    } else {
        let data = Binned::build(x, spec.max_bins());
        match spec.kind {
            Kind::DecisionTree => {
                let (mut trees, imp) = forest::fit(spec, &data, y);
                (State::Tree { tree: trees.remove(0) }, Some(imp))
            }
            Kind::RandomForest | Kind::ExtraTrees => {
                let (trees, imp) = forest::fit(spec, &data, y);
                (State::Forest { trees }, Some(imp))
            }
            Kind::Adaboost => {
                let fit = fit_adaboost(spec, &data, x, y);
                (
                    State::Adaboost {
                        stumps: fit.stumps,
                        alphas: fit.alphas,
                        prior: prior(y),
                    },
                    Some(fit.importance),
                )
            }
            Kind::Gbm | Kind::Xgb => {
                let fit = fit_boosting(spec, &data, x, y);
                (
                    State::Boosted {
                        base_margin: fit.base_margin,
                        learning_rate: spec.learning_rate(),
                        trees: fit.trees,
                    },
                    Some(fit.importance),
                )
            }
            Kind::Knn => unreachable!(),
        }
    };
    Ok(ClassifierModel {
        version: MODEL_VERSION,
        spec: spec.clone(),
        n_features,
        sparse: x.is_sparse(),
        gain_importance: importance,
        state,
    })
}

/// P(y = 1) for every row of `x`.
pub fn predict_proba(model: &ClassifierModel, x: &Matrix) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

impl ClassifierModel {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn kind(&self) -> Kind {
        self.spec.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse
    }

    pub fn gain_importance(&self) -> Option<&[f64]> {
        self.gain_importance.as_deref()
    }

    /// Every fitted tree, in ensemble order.
    pub fn trees(&self) -> Vec<&Tree> {
        match &self.state {
            State::Knn(_) => Vec::new(),
            State::Tree { tree } => vec![tree],
            State::Forest { trees } | State::Boosted { trees, .. } => trees.iter().collect(),
            State::Adaboost { stumps, .. } => stumps.iter().collect(),
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.n_cols() != self.n_features {
            return Err(Error::WidthMismatch {
                expected: self.n_features,
                got: x.n_cols(),
            });
        }
        if x.is_sparse() != self.sparse {
            return Err(Error::Invalid(format!(
                "model was trained on {} features but got {} ones",
                if self.sparse { "sparse" } else { "dense" },
                if x.is_sparse() { "sparse" } else { "dense" },
            )));
        }
        Ok(())
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let rows = 0..x.n_rows();
        let p = match &self.state {
            State::Knn(knn) => knn.predict(x),
            State::Tree { tree } => rows.into_par_iter().map(|i| tree.predict_row(x, i)).collect(),
            State::Forest { trees } => rows
                .into_par_iter()
                .map(|i| {
                    let votes = trees.iter().filter(|t| t.predict_row(x, i) >= 0.5).count();
                    votes as f64 / trees.len() as f64
                })
                .collect(),
            State::Adaboost {
                stumps,
                alphas,
                prior,
            } => rows
                .into_par_iter()
                .map(|i| adaboost_proba(stumps, alphas, *prior, x, i))
                .collect(),
            State::Boosted { .. } => return self.staged_proba(x, usize::MAX),
        };
        Ok(p)
    }

    /// Boosted models only: probabilities using the first `rounds` trees.
    pub fn staged_proba(&self, x: &Matrix, rounds: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let State::Boosted {
            base_margin,
            learning_rate,
            trees,
        } = &self.state
        else {
            return Err(Error::Invalid(format!("{} is not a boosted model", self.kind())));
        };
        let used = &trees[..rounds.min(trees.len())];
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                let f: f64 = used.iter().map(|t| t.predict_row(x, i)).sum();
                sigmoid(base_margin + learning_rate * f)
            })
            .collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::validated(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::create(path).map_err(io)?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::validated(serde_json::from_reader(BufReader::new(file))?)
    }

    fn validated(model: ClassifierModel) -> Result<Self> {
        if model.version != MODEL_VERSION {
            return Err(Error::Invalid(format!("unsupported model version {}", model.version)));
        }
        model.spec.validate()?;
        let trees_ok = model.trees().iter().all(|t| t.is_valid_for(model.n_features));
        let state_ok = match &model.state {
            State::Knn(k) => {
                k.train.n_cols() == model.n_features
                    && k.train.n_rows() == k.labels.len()
                    && !k.labels.is_empty()
            }
            State::Forest { trees } => !trees.is_empty(),
            State::Adaboost { stumps, alphas, .. } => stumps.len() == alphas.len(),
            _ => true,
        };
        if !(trees_ok && state_ok) {
            return Err(Error::Invalid("model file is internally inconsistent".into()));
        }
        Ok(model)
    }
}
