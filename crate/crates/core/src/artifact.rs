//! Versioned single-file persistence of a trained pipeline, and inference on
//! raw text from it.
//!
//! Layout: one header line `densify-artifact <version>` followed by a compact
//! JSON body. Serialization is byte-deterministic for a given artifact;
//! wall-clock timings are therefore kept out of it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClassTaxonomy, PreprocessConfig, TokenizedDoc};
use crate::enhance::{cascade, ModulusConfig, OffsetMode};
use crate::eval::Scenario;
use crate::gbdt::{leaf_embedding, Booster, LeafEncoding};
use crate::matrix::FeatureMatrix;
use crate::models::{predict_proba, Classifier, ModelKind};
use crate::tfidf::{transform_with, TfidfVariant, Vocabulary};

pub const ARTIFACT_MAGIC: &str = "densify-artifact";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("artifact version {found} is not supported (expected {expected})")]
    VersionMismatch { found: String, expected: u32 },
    #[error("corrupt artifact: {0}")]
    CorruptArtifact(String),
    #[error("artifact has no {model} classifier for scenario {scenario}")]
    MissingClassifier { model: ModelKind, scenario: Scenario },
    #[error("inference failed: {0}")]
    Inference(String),
}

/// How leaf embeddings become the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnhancementConfig {
    pub encoding: LeafEncoding,
    pub offset_mode: OffsetMode,
    pub poly_degree: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SparsityRecord {
    pub raw_train: f64,
    pub raw_test: f64,
    pub leaf_train: Option<f64>,
    pub cascade_train: Option<f64>,
    pub cascade_test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMetadata {
    pub split_seed: u64,
    pub boost_seed: u64,
    pub model_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub sparsity: SparsityRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioClassifier {
    pub scenario: Scenario,
    pub classifier: Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineArtifact {
    pub taxonomy: ClassTaxonomy,
    pub preprocess: PreprocessConfig,
    pub tfidf_variant: TfidfVariant,
    pub vocabulary: Vocabulary,
    /// One per class in taxonomy order; empty when only raw features were used.
    pub boosters: Vec<Booster>,
    pub enhancement: EnhancementConfig,
    pub classifiers: Vec<ScenarioClassifier>,
    pub metadata: ArtifactMetadata,
}

impl PipelineArtifact {
    pub fn classifier(&self, scenario: Scenario, model: ModelKind) -> Result<&Classifier, ArtifactError> {
        self.classifiers
            .iter()
            .find(|c| c.scenario == scenario && c.classifier.kind() == model)
            .map(|c| &c.classifier)
            .ok_or(ArtifactError::MissingClassifier { model, scenario })
    }

    pub fn tokenize(&self, texts: &[&str]) -> Vec<TokenizedDoc> {
        let p = self.preprocess.build();
        texts.iter().enumerate().map(|(i, t)| p.tokenize(&i.to_string(), t)).collect()
    }

    pub fn raw_features(&self, docs: &[TokenizedDoc]) -> FeatureMatrix {
        transform_with(docs, &self.vocabulary, self.tfidf_variant)
    }

    /// Cascade for a batch of raw rows. The partner-row modulus is the batch size.
    pub fn enhanced_features(&self, raw: &FeatureMatrix) -> Result<FeatureMatrix, ArtifactError> {
        if self.boosters.len() != self.taxonomy.len() {
            return Err(ArtifactError::Inference("artifact holds no boosters".into()));
        }
        let emb = leaf_embedding(&self.boosters, raw, &self.taxonomy, self.enhancement.encoding)
            .map_err(|e| ArtifactError::Inference(e.to_string()))?;
        let modulus = ModulusConfig::for_rows(self.enhancement.offset_mode, raw.n_rows());
        let casc = cascade(&emb.matrix, raw, modulus).map_err(|e| ArtifactError::Inference(e.to_string()))?;
        Ok(casc.matrix)
    }

    pub fn features(&self, scenario: Scenario, raw: &FeatureMatrix) -> Result<FeatureMatrix, ArtifactError> {
        match scenario {
            Scenario::Raw => Ok(raw.clone()),
            Scenario::Enhanced => self.enhanced_features(raw),
        }
    }

    /// Class probabilities for raw text, one row per text.
    pub fn predict_texts(
        &self,
        texts: &[&str],
        scenario: Scenario,
        model: ModelKind,
    ) -> Result<FeatureMatrix, ArtifactError> {
        let clf = self.classifier(scenario, model)?;
        if texts.is_empty() {
            return Ok(FeatureMatrix::zeros(0, self.taxonomy.len()));
        }
        let raw = self.raw_features(&self.tokenize(texts));
        let x = self.features(scenario, &raw)?;
        predict_proba(clf, &x).map_err(|e| ArtifactError::Inference(e.to_string()))
    }

    fn check(&self) -> Result<(), ArtifactError> {
        let k = self.taxonomy.len();
        if !self.boosters.is_empty() && self.boosters.len() != k {
            return Err(ArtifactError::CorruptArtifact(format!(
                "{} boosters for {k} classes",
                self.boosters.len()
            )));
        }
        for b in &self.boosters {
            b.validate().map_err(ArtifactError::CorruptArtifact)?;
            if b.n_features() != self.vocabulary.len() {
                return Err(ArtifactError::CorruptArtifact("booster width differs from vocabulary".into()));
            }
        }
        for c in &self.classifiers {
            if c.classifier.taxonomy != self.taxonomy {
                return Err(ArtifactError::CorruptArtifact("classifier taxonomy differs".into()));
            }
        }
        Ok(())
    }
}

pub fn to_bytes(a: &PipelineArtifact) -> Vec<u8> {
    let mut out = format!("{ARTIFACT_MAGIC} {ARTIFACT_VERSION}\n").into_bytes();
    serde_json::to_writer(&mut out, a).expect("artifact serializes");
    out.push(b'\n');
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<PipelineArtifact, ArtifactError> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ArtifactError::CorruptArtifact("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| ArtifactError::CorruptArtifact("header is not UTF-8".into()))?;
    let version = header
        .strip_prefix(ARTIFACT_MAGIC)
        .and_then(|v| v.strip_prefix(' '))
        .ok_or_else(|| ArtifactError::CorruptArtifact(format!("unrecognized header `{header}`")))?;
    if version != ARTIFACT_VERSION.to_string() {
        return Err(ArtifactError::VersionMismatch {
            found: version.to_string(),
            expected: ARTIFACT_VERSION,
        });
    }
    let a: PipelineArtifact =
        serde_json::from_slice(&bytes[newline + 1..]).map_err(|e| ArtifactError::CorruptArtifact(e.to_string()))?;
    a.check()?;
    Ok(a)
}

pub fn save_artifact(a: &PipelineArtifact, path: &Path) -> Result<(), ArtifactError> {
    std::fs::write(path, to_bytes(a))?;
    Ok(())
}

pub fn load_artifact(path: &Path) -> Result<PipelineArtifact, ArtifactError> {
    from_bytes(&std::fs::read(path)?)
}
