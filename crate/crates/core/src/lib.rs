//! Question-pair corpus handling and the pairwise text features used for
//! duplicate-question classification.
//!
//! The modules follow the pipeline order: [`corpus`] loads and cleans the
//! pair table, [`textops`], [`fuzzy`] and [`embed`] compute the per-pair
//! signals, [`featmat`] assembles them into the 28-column feature matrix and
//! [`tfidf`] builds the sparse word/character vectors.

pub mod corpus;
pub mod embed;
mod error;
pub mod featmat;
pub mod fuzzy;
pub mod textops;
pub mod tfidf;

pub use error::{Error, Result};
