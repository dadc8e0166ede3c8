//! Sentiment classification toolkit for Arabic newswire comments.
//!
//! The crate is organised as a straight pipeline:
//!
//! - [`corpus`]: labeled comment collections, loading and deterministic splits
//! - [`preprocess`]: URL removal, character filtering, tokenization,
//!   normalization, stop-word removal and light stemming
//! - [`features`]: word n-grams, vocabularies and count / binary / TF-IDF rows
//! - [`classifiers`]: six classifiers behind one train/predict contract
//! - [`eval`]: confusion matrices, metrics, the experiment grid and reports
//! - [`bundle`]: model + vocabulary + pipeline persisted together for serving
//! - [`cli`]: the `arsent` command-line front end
//!
//! With the default `parallel` feature, grid cells, forest trees and batch
//! vectorization run on the rayon pool. Results never depend on scheduling.

pub mod bundle;
pub mod classifiers;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod par;
pub mod preprocess;
pub mod seed;
pub mod synthetic;

pub use classifiers::{ClassifierKind, Dataset, TrainConfig, TrainedModel};
pub use corpus::{Corpus, LabeledComment, Polarity, SplitSpec};
pub use features::{NgramRange, SparseVector, Vocabulary, WeightingScheme};
pub use preprocess::{Pipeline, PipelineConfig, TokenList};
