//! Progressive (coarse-to-fine) text generation.
//!
//! Stage vocabularies are built from TF-IDF word importance, training pairs
//! are extracted per stage and noised, and count-based stage generators
//! expand a skeleton of informative words into full text. The `metrics`
//! module scores generated text against a reference set.

pub mod corpus;
pub mod importance;
pub mod staging;
pub mod genmodel;
pub mod metrics;
pub mod pipeline;
pub mod synthetic;
