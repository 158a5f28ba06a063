//! Densifying ultra-sparse TF-IDF text features with gradient-boosted leaf
//! embeddings and a derivative cascade, plus the downstream classifiers,
//! evaluation harness and pipeline built around them.

pub mod artifact;
pub mod config;
pub mod corpus;
pub mod enhance;
pub mod eval;
pub mod gbdt;
pub mod matrix;
pub mod models;
pub mod pipeline;
pub mod synth;
pub mod tfidf;
