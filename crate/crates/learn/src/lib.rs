//! Binary classifiers for question-pair features: k-nearest neighbours,
//! CART, random forest, extra trees, AdaBoost, gradient boosting and
//! second-order (XGBoost-style) boosting, plus evaluation metrics, feature
//! importance and grid search.
//!
//! Every learner accepts either a dense feature matrix or sparse TF-IDF pair
//! vectors through [`Matrix`]. Tree learners work on quantile-binned
//! features; sparse zeros fall into each column's zero bin.

mod binning;
mod boost;
mod error;
mod forest;
pub mod grid;
pub mod importance;
mod knn;
pub mod matrix;
pub mod metrics;
mod model;
pub mod spec;
mod tree;

pub use error::{Error, Result};
pub use grid::{grid_search, GridResult};
pub use importance::{feature_importance, ImportanceMethod, ImportanceReport};
pub use matrix::{DenseMatrix, Matrix, SparseMatrix};
pub use metrics::{evaluate, evaluate_probabilities, log_loss, Metrics};
pub use model::{predict_proba, train, ClassifierModel};
pub use spec::{ClassifierSpec, Kind, MaxFeatures};
pub use tree::{Node, Tree};
