//! Downstream classifiers trained on raw TF-IDF or cascade features.

mod forest;
mod mlp;
mod naive_bayes;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{ClassNode, ClassificationTree, ForestConfig, RandomForest};
pub use mlp::{Gradients, Mlp2, MlpConfig, Scaler};
pub use naive_bayes::{GaussianNb, NaiveBayesConfig};

use crate::corpus::{ClassId, ClassTaxonomy};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training labels cover fewer than two classes")]
    DegenerateLabels,
    #[error("bad model config: {0}")]
    BadConfig(String),
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0} rows but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("operation needs an mlp2 classifier, got {0}")]
    WrongKind(ModelKind),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NaiveBayes,
    RandomForest,
    /// Two fully-connected layers; stands in for a convolutional network.
    Mlp2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::NaiveBayes, ModelKind::RandomForest, ModelKind::Mlp2];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Mlp2 => "mlp2",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown model kind `{s}`"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub naive_bayes: NaiveBayesConfig,
    pub random_forest: ForestConfig,
    pub mlp2: MlpConfig,
}

impl ModelConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::BadConfig(m.to_string()));
        if !(self.naive_bayes.var_floor > 0.0) {
            return bad("naive_bayes.var_floor must be positive");
        }
        let f = &self.random_forest;
        if f.trees == 0 || f.max_depth == 0 || f.min_leaf == 0 || f.max_features == Some(0) {
            return bad("random_forest trees, max_depth, min_leaf and max_features must be positive");
        }
        let m = &self.mlp2;
        if m.hidden == 0 || m.batch_size == 0 || m.epochs == 0 || m.patience == 0 {
            return bad("mlp2 hidden, batch_size, epochs and patience must be positive");
        }
        if !(m.learning_rate > 0.0 && m.learning_rate.is_finite()) {
            return bad("mlp2.learning_rate must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum FittedModel {
    NaiveBayes(GaussianNb),
    RandomForest(RandomForest),
    Mlp2(Mlp2),
}

/// A fitted classifier together with the taxonomy and input width it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub taxonomy: ClassTaxonomy,
    pub input_width: usize,
    pub seed: u64,
    pub model: FittedModel,
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            FittedModel::NaiveBayes(_) => ModelKind::NaiveBayes,
            FittedModel::RandomForest(_) => ModelKind::RandomForest,
            FittedModel::Mlp2(_) => ModelKind::Mlp2,
        }
    }

    fn check_width(&self, x: &FeatureMatrix) -> Result<(), ModelError> {
        if x.n_cols() != self.input_width {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_width,
                got: x.n_cols(),
            });
        }
        Ok(())
    }
}

pub fn fit_classifier(
    kind: ModelKind,
    x: &FeatureMatrix,
    y: &[ClassId],
    taxonomy: &ClassTaxonomy,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<Classifier, ModelError> {
    cfg.validate()?;
    if x.n_rows() != y.len() {
        return Err(ModelError::LengthMismatch(x.n_rows(), y.len()));
    }
    let k = taxonomy.len();
    let y: Vec<usize> = y.iter().map(|c| c.0).collect();
    if let Some(&bad) = y.iter().find(|&&c| c >= k) {
        return Err(ModelError::BadConfig(format!("label {bad} outside taxonomy of {k}")));
    }
    let mut present = vec![false; k];
    y.iter().for_each(|&c| present[c] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(ModelError::DegenerateLabels);
    }
    let model = match kind {
        ModelKind::NaiveBayes => FittedModel::NaiveBayes(GaussianNb::fit(x, &y, k, &cfg.naive_bayes)),
        ModelKind::RandomForest => FittedModel::RandomForest(RandomForest::fit(x, &y, k, &cfg.random_forest, seed)),
        ModelKind::Mlp2 => FittedModel::Mlp2(Mlp2::fit(x, &y, k, &cfg.mlp2, seed)),
    };
    Ok(Classifier {
        taxonomy: taxonomy.clone(),
        input_width: x.n_cols(),
        seed,
        model,
    })
}

/// Class probabilities, one row per input row in taxonomy order.
pub fn predict_proba(c: &Classifier, x: &FeatureMatrix) -> Result<FeatureMatrix, ModelError> {
    c.check_width(x)?;
    let k = c.taxonomy.len();
    Ok(match &c.model {
        FittedModel::NaiveBayes(nb) => FeatureMatrix::from_fn_rows(x.n_rows(), k, |i, out| {
            out.copy_from_slice(&nb.posterior(x.row(i)));
        }),
        FittedModel::RandomForest(rf) => FeatureMatrix::from_fn_rows(x.n_rows(), k, |i, out| {
            out.copy_from_slice(&rf.vote_shares(x.row(i)));
        }),
        FittedModel::Mlp2(net) => {
            let p = net.predict_proba(x);
            FeatureMatrix::from_vec(x.n_rows(), k, p.into_raw_vec_and_offset().0).expect("shape from network")
        }
    })
}

/// Argmax of each probability row; ties go to the lowest class index.
pub fn argmax_rows(p: &FeatureMatrix) -> Vec<ClassId> {
    p.rows()
        .map(|row| {
            let mut best = 0;
            for (k, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = k;
                }
            }
            ClassId(best)
        })
        .collect()
}

pub fn predict(c: &Classifier, x: &FeatureMatrix) -> Result<Vec<ClassId>, ModelError> {
    predict_proba(c, x).map(|p| argmax_rows(&p))
}

/// Files written by [`dump_hidden_activations`].
#[derive(Debug, Clone)]
pub struct ActivationDump {
    pub activations: PathBuf,
    pub hidden_weights: PathBuf,
    pub output_weights: PathBuf,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn write_csv(path: &Path, header: &[String], rows: ndarray::ArrayView2<f64>) -> Result<(), ModelError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes post-ReLU hidden activations (`n x H`) to `path`, and the two weight
/// matrices to `<stem>.w1.csv` (`d x H`) and `<stem>.w2.csv` (`H x K`) beside it.
pub fn dump_hidden_activations(c: &Classifier, x: &FeatureMatrix, path: &Path) -> Result<ActivationDump, ModelError> {
    let FittedModel::Mlp2(net) = &c.model else {
        return Err(ModelError::WrongKind(c.kind()));
    };
    c.check_width(x)?;
    let hidden: Vec<String> = (0..net.hidden()).map(|h| format!("h{h}")).collect();
    let dump = ActivationDump {
        activations: path.to_path_buf(),
        hidden_weights: sibling(path, "w1"),
        output_weights: sibling(path, "w2"),
    };
    write_csv(&dump.activations, &hidden, net.hidden_activations(x).view())?;
    write_csv(&dump.hidden_weights, &hidden, net.w1.view())?;
    write_csv(&dump.output_weights, c.taxonomy.names(), net.w2.view())?;
    Ok(dump)
}
