//! Pipeline configuration: a sectioned TOML file plus `section.key=value`
//! overrides. Precedence is override > file > default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClassTaxonomy, DatasetFormat, PreprocessConfig, Schema};
use crate::enhance::OffsetMode;
use crate::gbdt::{BoostConfig, LeafEncoding, LineSearchConfig};
use crate::models::{ForestConfig, MlpConfig, ModelConfig, ModelKind, NaiveBayesConfig};
use crate::tfidf::TfidfVariant;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(String),
    #[error("config override `{0}` is not of the form section.key=value")]
    BadOverride(String),
    #[error("config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    #[serde(default)]
    pub format: DatasetFormat,
    #[serde(default = "default_text_column")]
    pub text_column: String,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default)]
    pub id_column: Option<String>,
    #[serde(default)]
    pub classes: ClassTaxonomy,
}

fn default_text_column() -> String {
    Schema::default().text_column
}

fn default_label_column() -> String {
    Schema::default().label_column
}

impl DatasetSection {
    pub fn schema(&self) -> Schema {
        Schema {
            text_column: self.text_column.clone(),
            label_column: self.label_column.clone(),
            id_column: self.id_column.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfidfSection {
    pub max_features: usize,
    pub min_df: usize,
    pub variant: TfidfVariant,
}

impl Default for TfidfSection {
    fn default() -> Self {
        Self {
            max_features: 2500,
            min_df: 2,
            variant: TfidfVariant::LogRatio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostSection {
    pub stages: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub subsample: f64,
    pub encoding: LeafEncoding,
    /// Defaults to the split seed plus one.
    pub seed: Option<u64>,
    pub line_search: LineSearchConfig,
}

impl Default for BoostSection {
    fn default() -> Self {
        let b = BoostConfig::default();
        Self {
            stages: b.stages,
            max_depth: b.max_depth,
            min_leaf: b.min_leaf,
            subsample: b.subsample,
            encoding: LeafEncoding::Index,
            seed: None,
            line_search: b.line_search,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulusSection {
    pub offset_mode: OffsetMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsSection {
    pub kinds: Vec<ModelKind>,
    /// Defaults to the split seed plus two.
    pub seed: Option<u64>,
    pub naive_bayes: NaiveBayesConfig,
    pub random_forest: ForestConfig,
    pub mlp2: MlpConfig,
}

impl Default for ModelsSection {
    fn default() -> Self {
        Self {
            kinds: ModelKind::ALL.to_vec(),
            seed: None,
            naive_bayes: NaiveBayesConfig::default(),
            random_forest: ForestConfig::default(),
            mlp2: MlpConfig::default(),
        }
    }
}

impl ModelsSection {
    pub fn params(&self) -> ModelConfig {
        ModelConfig {
            naive_bayes: self.naive_bayes.clone(),
            random_forest: self.random_forest.clone(),
            mlp2: self.mlp2.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    /// Required; there is no clock-derived fallback.
    pub seed: u64,
    /// Stratified subsample of the loaded corpus before splitting.
    #[serde(default)]
    pub subset: Option<usize>,
}

fn default_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioSelection {
    Rd,
    Fe,
    #[default]
    Both,
}

impl ScenarioSelection {
    pub fn raw(self) -> bool {
        matches!(self, Self::Rd | Self::Both)
    }

    pub fn enhanced(self) -> bool {
        matches!(self, Self::Fe | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub scenario: ScenarioSelection,
    pub output_dir: PathBuf,
    /// Also write the train and test cascades as CSV.
    pub export_cascade: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            scenario: ScenarioSelection::Both,
            output_dir: PathBuf::from("densify-out"),
            export_cascade: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub tfidf: TfidfSection,
    #[serde(default)]
    pub boost: BoostSection,
    #[serde(default)]
    pub modulus: ModulusSection,
    #[serde(default)]
    pub models: ModelsSection,
    pub split: SplitSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Parses `section.key=value`. The value is read as a TOML literal when it
/// parses as one, otherwise as a bare string.
pub fn parse_override(s: &str) -> Result<(Vec<String>, toml::Value), ConfigError> {
    let (key, value) = s.split_once('=').ok_or_else(|| ConfigError::BadOverride(s.to_string()))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.len() < 2 || path.iter().any(String::is_empty) {
        return Err(ConfigError::BadOverride(s.to_string()));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((path, parsed))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), ConfigError> {
    let (last, sections) = path.split_last().expect("override path has two parts");
    let mut at = table;
    for s in sections {
        at = at
            .entry(s.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::BadOverride(format!("`{s}` is not a section")))?;
    }
    at.insert(last.clone(), value);
    Ok(())
}

impl PipelineConfig {
    /// Parses TOML text, applies overrides, and validates values that do not
    /// touch the filesystem.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut table, &path, value)?;
        }
        let cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. A relative dataset path resolves against the
    /// file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        if cfg.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset.path = dir.join(&cfg.dataset.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dataset.path.as_os_str().is_empty() {
            return Err(invalid("dataset.path", "must not be empty"));
        }
        if !(self.split.fraction > 0.0 && self.split.fraction < 1.0) {
            return Err(invalid("split.fraction", format!("{} is outside (0, 1)", self.split.fraction)));
        }
        if self.split.subset == Some(0) {
            return Err(invalid("split.subset", "must be positive"));
        }
        if self.tfidf.max_features == 0 {
            return Err(invalid("tfidf.max_features", "must be positive"));
        }
        if self.tfidf.min_df == 0 {
            return Err(invalid("tfidf.min_df", "must be at least 1"));
        }
        self.boost_config().validate().map_err(|e| invalid("boost", e.to_string()))?;
        if self.models.kinds.is_empty() {
            return Err(invalid("models.kinds", "list at least one model"));
        }
        self.models.params().validate().map_err(|e| invalid("models", e.to_string()))?;
        Ok(())
    }

    /// Checks that input paths exist.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        if !self.dataset.path.is_file() {
            return Err(invalid(
                "dataset.path",
                format!("{} does not exist or is not a file", self.dataset.path.display()),
            ));
        }
        Ok(())
    }

    pub fn boost_config(&self) -> BoostConfig {
        BoostConfig {
            stages: self.boost.stages,
            max_depth: self.boost.max_depth,
            min_leaf: self.boost.min_leaf,
            subsample: self.boost.subsample,
            seed: self.boost.seed.unwrap_or(self.split.seed.wrapping_add(1)),
            line_search: self.boost.line_search,
        }
    }

    pub fn model_seed(&self) -> u64 {
        self.models.seed.unwrap_or(self.split.seed.wrapping_add(2))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[dataset]\npath = \"data.csv\"\n[split]\nseed = 7\n";

    #[test]
    fn defaults_fill_in() {
        let cfg = PipelineConfig::from_toml_str(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.tfidf.max_features, 2500);
        assert_eq!(cfg.tfidf.min_df, 2);
        assert_eq!(cfg.split.fraction, 0.8);
        assert_eq!(cfg.boost.stages, 100);
        assert_eq!(cfg.run.scenario, ScenarioSelection::Both);
        assert_eq!(cfg.models.kinds.len(), 3);
        assert_eq!(cfg.boost_config().seed, 8);
    }

    #[test]
    fn overrides_beat_file() {
        let text = format!("{MINIMAL}[tfidf]\nmax_features = 100\n");
        let cfg = PipelineConfig::from_toml_str(
            &text,
            &["tfidf.max_features=50".into(), "run.scenario=rd".into(), "models.kinds=[\"mlp2\"]".into()],
        )
        .unwrap();
        assert_eq!(cfg.tfidf.max_features, 50);
        assert_eq!(cfg.run.scenario, ScenarioSelection::Rd);
        assert_eq!(cfg.models.kinds, vec![ModelKind::Mlp2]);
    }

    #[test]
    fn missing_seed_is_rejected() {
        let err = PipelineConfig::from_toml_str("[dataset]\npath = \"x\"\n[split]\n", &[]).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn missing_dataset_path_names_field() {
        let err = PipelineConfig::from_toml_str("[dataset]\n[split]\nseed = 1\n", &[]).unwrap_err();
        assert!(err.to_string().contains("path"), "{err}");
        let cfg = PipelineConfig::from_toml_str("[dataset]\npath = \"/no/such/file\"\n[split]\nseed = 1\n", &[]).unwrap();
        let err = cfg.check_paths().unwrap_err();
        assert!(err.to_string().contains("dataset.path"), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        assert!(PipelineConfig::from_toml_str(&format!("{MINIMAL}[tfidf]\nmax_feature = 3\n"), &[]).is_err());
        assert!(PipelineConfig::from_toml_str(MINIMAL, &["split.fraction=1.5".into()]).is_err());
        assert!(PipelineConfig::from_toml_str(MINIMAL, &["nodot=1".into()]).is_err());
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = PipelineConfig::from_toml_str(MINIMAL, &[]).unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&cfg.to_toml(), &[]).unwrap(), cfg);
    }
}
