//! Gradient-boosted regression trees used as per-class weak classifiers.
//!
//! Each class gets a one-vs-rest binary [`Booster`]. The leaf ids a row
//! reaches across all stages of all boosters form a dense embedding of an
//! otherwise ultra-sparse TF-IDF row.

mod booster;
mod line_search;
mod loss;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use booster::{fit_booster, fit_booster_indexed, BoostConfig, Booster, Stage};
pub use line_search::{line_search, LineSearchConfig};
pub use loss::{sigmoid, LogLoss, Loss, SquaredLoss};
pub use tree::{RegressionTree, SortedColumns, TreeConfig, TreeNode};

use crate::corpus::{ClassId, ClassTaxonomy};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum GbdtError {
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("bad boosting config: {0}")]
    BadConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no leaf matrices to stack")]
    EmptyList,
    #[error("leaf matrix {index} has {got} rows, expected {expected}")]
    RaggedRows {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("class `{class}`: {source}")]
    Class {
        class: String,
        #[source]
        source: Box<GbdtError>,
    },
}

/// How leaf ids enter the downstream feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafEncoding {
    /// One column per stage holding the raw leaf id.
    #[default]
    Index,
    /// One indicator column per (stage, leaf).
    OneHot,
}

/// Column block of one class inside a [`LeafEmbedding`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBlock {
    pub class: String,
    pub offset: usize,
    pub width: usize,
}

/// Per-class leaf matrices stacked side by side in taxonomy order.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafEmbedding {
    pub matrix: FeatureMatrix,
    pub blocks: Vec<ClassBlock>,
}

/// Encodes the leaves reached in `booster` by each row of `x`.
pub fn encode_leaves(booster: &Booster, x: &FeatureMatrix, encoding: LeafEncoding) -> Result<FeatureMatrix, GbdtError> {
    let ids = booster.apply_leaves(x)?;
    match encoding {
        LeafEncoding::Index => Ok(ids),
        LeafEncoding::OneHot => {
            let widths: Vec<usize> = booster.stages().iter().map(|s| s.tree.leaf_count()).collect();
            let total = widths.iter().sum();
            Ok(FeatureMatrix::from_fn_rows(x.n_rows(), total, |i, out| {
                let mut at = 0;
                for (m, w) in widths.iter().enumerate() {
                    out[at + ids.get(i, m) as usize] = 1.0;
                    at += w;
                }
            }))
        }
    }
}

/// Horizontally stacks per-class leaf matrices in taxonomy order.
pub fn stack_leaf_embeddings(per_class: &[FeatureMatrix], taxonomy: &ClassTaxonomy) -> Result<LeafEmbedding, GbdtError> {
    let first = per_class.first().ok_or(GbdtError::EmptyList)?;
    if per_class.len() != taxonomy.len() {
        return Err(GbdtError::DimensionMismatch {
            expected: taxonomy.len(),
            got: per_class.len(),
        });
    }
    for (index, m) in per_class.iter().enumerate() {
        if m.n_rows() != first.n_rows() {
            return Err(GbdtError::RaggedRows {
                index,
                expected: first.n_rows(),
                got: m.n_rows(),
            });
        }
    }
    let mut offset = 0;
    let blocks = per_class
        .iter()
        .zip(taxonomy.names())
        .map(|(m, name)| {
            let b = ClassBlock {
                class: name.clone(),
                offset,
                width: m.n_cols(),
            };
            offset += m.n_cols();
            b
        })
        .collect();
    let parts: Vec<&FeatureMatrix> = per_class.iter().collect();
    let matrix = FeatureMatrix::hstack(&parts).expect("row counts checked above");
    Ok(LeafEmbedding { matrix, blocks })
}

/// Trains one binary booster per class (class vs rest), in taxonomy order.
/// Classes train in parallel; each uses `cfg.seed` offset by its index.
pub fn fit_one_vs_rest(
    x: &FeatureMatrix,
    labels: &[ClassId],
    taxonomy: &ClassTaxonomy,
    cfg: &BoostConfig,
) -> Result<Vec<Booster>, GbdtError> {
    cfg.validate()?;
    let cols = SortedColumns::new(x);
    taxonomy
        .ids()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|class| {
            let y: Vec<bool> = labels.iter().map(|l| *l == class).collect();
            let cfg = BoostConfig {
                seed: cfg.seed.wrapping_add(class.0 as u64),
                ..cfg.clone()
            };
            fit_booster_indexed(x, &cols, &y, &cfg).map_err(|e| GbdtError::Class {
                class: taxonomy.name(class).to_string(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Leaf embedding of `x` under the per-class boosters.
pub fn leaf_embedding(
    boosters: &[Booster],
    x: &FeatureMatrix,
    taxonomy: &ClassTaxonomy,
    encoding: LeafEncoding,
) -> Result<LeafEmbedding, GbdtError> {
    let per_class = boosters
        .iter()
        .map(|b| encode_leaves(b, x, encoding))
        .collect::<Result<Vec<_>, _>>()?;
    stack_leaf_embeddings(&per_class, taxonomy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_blocks_of_hundred() {
        let tax = ClassTaxonomy::default();
        let parts: Vec<FeatureMatrix> = (0..4).map(|_| FeatureMatrix::zeros(7, 100)).collect();
        let e = stack_leaf_embeddings(&parts, &tax).unwrap();
        assert_eq!((e.matrix.n_rows(), e.matrix.n_cols()), (7, 400));
        assert_eq!(e.blocks[2].class, "bipolar");
        assert_eq!(e.blocks[2].offset, 200);
    }

    #[test]
    fn single_class_passthrough() {
        let tax = ClassTaxonomy::new(["only"]).unwrap();
        let m = FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, 0.0]]).unwrap();
        let e = stack_leaf_embeddings(std::slice::from_ref(&m), &tax).unwrap();
        assert_eq!(e.matrix, m);
    }

    #[test]
    fn stacking_errors() {
        let tax = ClassTaxonomy::new(["a", "b"]).unwrap();
        assert_eq!(stack_leaf_embeddings(&[], &tax).unwrap_err(), GbdtError::EmptyList);
        let ragged = [FeatureMatrix::zeros(3, 2), FeatureMatrix::zeros(4, 2)];
        assert!(matches!(
            stack_leaf_embeddings(&ragged, &tax),
            Err(GbdtError::RaggedRows { index: 1, .. })
        ));
    }

    #[test]
    fn one_hot_rows_have_one_indicator_per_stage() {
        let rows: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let y: Vec<bool> = (0..20).map(|i| i % 4 < 2).collect();
        let b = fit_booster(&x, &y, &BoostConfig { stages: 4, max_depth: 2, ..Default::default() }).unwrap();
        let hot = encode_leaves(&b, &x, LeafEncoding::OneHot).unwrap();
        let width: usize = b.stages().iter().map(|s| s.tree.leaf_count()).sum();
        assert_eq!(hot.n_cols(), width);
        for row in hot.rows() {
            assert_eq!(row.iter().sum::<f64>(), 4.0);
        }
    }
}
