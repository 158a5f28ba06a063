//! End-to-end orchestration: ingest, vectorize, train, evaluate, compare.
//!
//! Every stage consumes immutable outputs of the previous one and can be
//! resumed from what the earlier stages persisted in the output directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{
    load_artifact, save_artifact, ArtifactError, ArtifactMetadata, EnhancementConfig, PipelineArtifact,
    ScenarioClassifier, SparsityRecord,
};
use crate::config::{ConfigError, PipelineConfig};
use crate::corpus::{load_dataset, stratified_split, stratified_subset, ClassId, CorpusError, DocumentSet, TokenizedDoc};
use crate::enhance::{cascade, ModulusConfig};
use crate::eval::{
    build_report, confusion_matrix, improvement_table, render_improvements, render_table, write_confusion_csv,
    write_roc_csvs, EvalReport, Improvement, Scenario,
};
use crate::gbdt::{fit_one_vs_rest, leaf_embedding};
use crate::matrix::FeatureMatrix;
use crate::models::{argmax_rows, fit_classifier, predict_proba};
use crate::tfidf::{fit_vocabulary, transform_with, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Corpus,
    Tfidf,
    Gbdt,
    Enhance,
    Models,
    Eval,
    Artifact,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Corpus => "corpus",
            Stage::Tfidf => "tfidf",
            Stage::Gbdt => "gbdt",
            Stage::Enhance => "enhance",
            Stage::Models => "models",
            Stage::Eval => "eval",
            Stage::Artifact => "artifact",
        };
        f.write_str(s)
    }
}

/// Broad failure class; decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Data,
    Invariant,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Config => 1,
            FailureKind::Data => 2,
            FailureKind::Invariant => 3,
        }
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: FailureKind,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: FailureKind, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        Self {
            stage,
            kind,
            source: source.into(),
        }
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::new(Stage::Config, FailureKind::Config, e)
    }
}

fn data(stage: Stage) -> impl Fn(CorpusError) -> PipelineError {
    move |e| PipelineError::new(stage, FailureKind::Data, e)
}

fn invariant<E: Into<Box<dyn std::error::Error + Send + Sync>>>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::new(stage, FailureKind::Invariant, e)
}

fn io(stage: Stage, path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::new(stage, FailureKind::Data, format!("{}: {e}", path.display()))
}

/// File names inside the output directory.
pub mod files {
    pub const CORPUS: &str = "corpus.json";
    pub const VOCABULARY: &str = "vocabulary.json";
    pub const ARTIFACT: &str = "model.densify";
    pub const RUN_METADATA: &str = "run_metadata.json";
    pub const REPORTS: &str = "reports";
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_TEXT: &str = "report.txt";
    pub const IMPROVEMENTS_JSON: &str = "improvements.json";
    pub const IMPROVEMENTS_TEXT: &str = "improvements.txt";
}

/// The split corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub train: DocumentSet,
    pub test: DocumentSet,
}

/// Tokenized split plus the fitted vocabulary and raw TF-IDF matrices.
#[derive(Debug, Clone)]
pub struct Vectorized {
    pub vocabulary: Vocabulary,
    pub train_tokens: Vec<TokenizedDoc>,
    pub test_tokens: Vec<TokenizedDoc>,
    pub x_train: FeatureMatrix,
    pub x_test: FeatureMatrix,
    pub y_train: Vec<ClassId>,
    pub y_test: Vec<ClassId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub reports: Vec<EvalReport>,
    pub improvements: Option<Vec<Improvement>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages_ms: Vec<(String, u128)>,
}

impl Timings {
    fn record(&mut self, name: &str, since: Instant) {
        self.stages_ms.push((name.to_string(), since.elapsed().as_millis()));
    }
}

/// Loads the dataset, optionally subsamples it, and splits it.
pub fn ingest(cfg: &PipelineConfig) -> Result<Ingested, PipelineError> {
    cfg.check_paths()?;
    let ds = load_dataset(
        &cfg.dataset.path,
        cfg.dataset.format,
        &cfg.dataset.schema(),
        &cfg.dataset.classes,
    )
    .map_err(data(Stage::Corpus))?;
    let ds = match cfg.split.subset {
        Some(n) => stratified_subset(&ds, n, cfg.split.seed).map_err(data(Stage::Corpus))?,
        None => ds,
    };
    let (train, test) = stratified_split(&ds, cfg.split.fraction, cfg.split.seed).map_err(data(Stage::Corpus))?;
    Ok(Ingested { train, test })
}

fn tokenize(cfg: &PipelineConfig, ds: &DocumentSet) -> Vec<TokenizedDoc> {
    let p = cfg.preprocess.build();
    ds.documents().iter().map(|d| p.tokenize(&d.id, &d.text)).collect()
}

/// Tokenizes both sides; fits the vocabulary on the training side unless one is given.
pub fn vectorize(cfg: &PipelineConfig, ing: &Ingested, vocabulary: Option<Vocabulary>) -> Result<Vectorized, PipelineError> {
    let train_tokens = tokenize(cfg, &ing.train);
    let test_tokens = tokenize(cfg, &ing.test);
    let vocabulary = match vocabulary {
        Some(v) => v,
        None => fit_vocabulary(&train_tokens, cfg.tfidf.max_features, cfg.tfidf.min_df)
            .map_err(|e| PipelineError::new(Stage::Tfidf, FailureKind::Data, e))?,
    };
    if vocabulary.is_empty() {
        return Err(PipelineError::new(
            Stage::Tfidf,
            FailureKind::Data,
            format!("no term reaches min_df = {}", cfg.tfidf.min_df),
        ));
    }
    let x_train = transform_with(&train_tokens, &vocabulary, cfg.tfidf.variant);
    let x_test = transform_with(&test_tokens, &vocabulary, cfg.tfidf.variant);
    Ok(Vectorized {
        vocabulary,
        train_tokens,
        test_tokens,
        x_train,
        x_test,
        y_train: ing.train.labels(),
        y_test: ing.test.labels(),
    })
}

fn sparsity(stage: Stage, m: &FeatureMatrix) -> Result<f64, PipelineError> {
    m.sparsity().map_err(invariant(stage))
}

/// Fits boosters (when the enhanced scenario runs) and every configured
/// classifier for every selected scenario.
pub fn train(cfg: &PipelineConfig, vec: &Vectorized) -> Result<PipelineArtifact, PipelineError> {
    let taxonomy = cfg.dataset.classes.clone();
    let boost = cfg.boost_config();
    let params = cfg.models.params();
    let model_seed = cfg.model_seed();
    let mut sparsity_rec = SparsityRecord {
        raw_train: sparsity(Stage::Tfidf, &vec.x_train)?,
        raw_test: sparsity(Stage::Tfidf, &vec.x_test)?,
        ..Default::default()
    };
    let mut classifiers = Vec::new();
    let fit_all = |scenario: Scenario, x: &FeatureMatrix, out: &mut Vec<ScenarioClassifier>| {
        for &kind in &cfg.models.kinds {
            let classifier = fit_classifier(kind, x, &vec.y_train, &taxonomy, &params, model_seed).map_err(|e| {
                let k = match e {
                    crate::models::ModelError::DegenerateLabels => FailureKind::Data,
                    crate::models::ModelError::BadConfig(_) => FailureKind::Config,
                    _ => FailureKind::Invariant,
                };
                PipelineError::new(Stage::Models, k, format!("{kind} ({scenario}): {e}"))
            })?;
            out.push(ScenarioClassifier { scenario, classifier });
        }
        Ok::<_, PipelineError>(())
    };
    if cfg.run.scenario.raw() {
        fit_all(Scenario::Raw, &vec.x_train, &mut classifiers)?;
    }
    let mut boosters = Vec::new();
    if cfg.run.scenario.enhanced() {
        boosters = fit_one_vs_rest(&vec.x_train, &vec.y_train, &taxonomy, &boost).map_err(|e| {
            let k = match e {
                crate::gbdt::GbdtError::BadConfig(_) => FailureKind::Config,
                _ => FailureKind::Data,
            };
            PipelineError::new(Stage::Gbdt, k, e)
        })?;
        let emb = leaf_embedding(&boosters, &vec.x_train, &taxonomy, cfg.boost.encoding).map_err(invariant(Stage::Gbdt))?;
        sparsity_rec.leaf_train = Some(sparsity(Stage::Gbdt, &emb.matrix)?);
        let modulus = ModulusConfig::for_rows(cfg.modulus.offset_mode, vec.x_train.n_rows());
        let casc = cascade(&emb.matrix, &vec.x_train, modulus).map_err(invariant(Stage::Enhance))?;
        sparsity_rec.cascade_train = Some(sparsity(Stage::Enhance, &casc.matrix)?);
        if cfg.run.export_cascade {
            std::fs::create_dir_all(&cfg.run.output_dir).map_err(io(Stage::Enhance, &cfg.run.output_dir))?;
            let path = cfg.run.output_dir.join("cascade_train.csv");
            casc.export(&path).map_err(io(Stage::Enhance, &path))?;
        }
        fit_all(Scenario::Enhanced, &casc.matrix, &mut classifiers)?;
    }
    let mut artifact = PipelineArtifact {
        taxonomy: taxonomy.clone(),
        preprocess: cfg.preprocess.clone(),
        tfidf_variant: cfg.tfidf.variant,
        vocabulary: vec.vocabulary.clone(),
        boosters,
        enhancement: EnhancementConfig {
            encoding: cfg.boost.encoding,
            offset_mode: cfg.modulus.offset_mode,
            poly_degree: 1,
        },
        classifiers,
        metadata: ArtifactMetadata {
            split_seed: cfg.split.seed,
            boost_seed: boost.seed,
            model_seed,
            n_train: vec.x_train.n_rows(),
            n_test: vec.x_test.n_rows(),
            sparsity: sparsity_rec,
        },
    };
    if cfg.run.scenario.enhanced() {
        let emb = leaf_embedding(&artifact.boosters, &vec.x_test, &taxonomy, cfg.boost.encoding)
            .map_err(invariant(Stage::Gbdt))?;
        let modulus = ModulusConfig::for_rows(cfg.modulus.offset_mode, vec.x_test.n_rows());
        let casc = cascade(&emb.matrix, &vec.x_test, modulus).map_err(invariant(Stage::Enhance))?;
        artifact.metadata.sparsity.cascade_test = Some(sparsity(Stage::Enhance, &casc.matrix)?);
        if cfg.run.export_cascade {
            let path = cfg.run.output_dir.join("cascade_test.csv");
            casc.export(&path).map_err(io(Stage::Enhance, &path))?;
        }
    }
    Ok(artifact)
}

/// Scores every classifier in the artifact on the test side.
pub fn evaluate(artifact: &PipelineArtifact, vec: &Vectorized) -> Result<Vec<EvalReport>, PipelineError> {
    let taxonomy = &artifact.taxonomy;
    let mut reports = Vec::new();
    let mut enhanced_test: Option<FeatureMatrix> = None;
    for sc in &artifact.classifiers {
        let x = match sc.scenario {
            Scenario::Raw => &vec.x_test,
            Scenario::Enhanced => {
                if enhanced_test.is_none() {
                    let casc = artifact
                        .enhanced_features(&vec.x_test)
                        .map_err(invariant(Stage::Enhance))?;
                    enhanced_test = Some(casc);
                }
                enhanced_test.as_ref().expect("computed above")
            }
        };
        let probas = predict_proba(&sc.classifier, x).map_err(invariant(Stage::Models))?;
        let pred = argmax_rows(&probas);
        let cm = confusion_matrix(&vec.y_test, &pred, taxonomy).map_err(invariant(Stage::Eval))?;
        let report = build_report(&cm, &probas, &vec.y_test, taxonomy, sc.classifier.kind(), sc.scenario)
            .map_err(invariant(Stage::Eval))?;
        reports.push(report);
    }
    Ok(reports)
}

/// Improvement table when both scenarios were evaluated.
pub fn compare(reports: &[EvalReport]) -> Result<Option<Vec<Improvement>>, PipelineError> {
    let (rd, fe): (Vec<EvalReport>, Vec<EvalReport>) =
        reports.iter().cloned().partition(|r| r.scenario == Scenario::Raw);
    if rd.is_empty() || fe.is_empty() {
        return Ok(None);
    }
    improvement_table(&rd, &fe).map(Some).map_err(invariant(Stage::Eval))
}

/// Everything one full run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifact: PipelineArtifact,
    pub bundle: ReportBundle,
    pub timings: Timings,
}

/// Runs every stage in memory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let mut timings = Timings::default();
    let t = Instant::now();
    let ing = ingest(cfg)?;
    timings.record("ingest", t);
    let t = Instant::now();
    let vec = vectorize(cfg, &ing, None)?;
    timings.record("vectorize", t);
    let t = Instant::now();
    let artifact = train(cfg, &vec)?;
    timings.record("train", t);
    let t = Instant::now();
    let reports = evaluate(&artifact, &vec)?;
    let improvements = compare(&reports)?;
    timings.record("evaluate", t);
    Ok(RunOutput {
        artifact,
        bundle: ReportBundle { reports, improvements },
        timings,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T, stage: Stage) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(invariant(stage))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io(stage, path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: Stage) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io(stage, path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::new(stage, FailureKind::Data, format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path, stage: Stage) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(io(stage, dir))
}

pub fn save_ingested(dir: &Path, ing: &Ingested) -> Result<PathBuf, PipelineError> {
    ensure_dir(dir, Stage::Corpus)?;
    let path = dir.join(files::CORPUS);
    write_json(&path, ing, Stage::Corpus)?;
    Ok(path)
}

pub fn load_ingested(dir: &Path) -> Result<Ingested, PipelineError> {
    read_json(&dir.join(files::CORPUS), Stage::Corpus)
}

pub fn save_vocabulary(dir: &Path, v: &Vocabulary) -> Result<PathBuf, PipelineError> {
    ensure_dir(dir, Stage::Tfidf)?;
    let path = dir.join(files::VOCABULARY);
    write_json(&path, v, Stage::Tfidf)?;
    Ok(path)
}

pub fn load_vocabulary(dir: &Path) -> Result<Vocabulary, PipelineError> {
    read_json(&dir.join(files::VOCABULARY), Stage::Tfidf)
}

fn artifact_err(e: ArtifactError) -> PipelineError {
    let kind = match e {
        ArtifactError::Io(_) | ArtifactError::VersionMismatch { .. } | ArtifactError::CorruptArtifact(_) => {
            FailureKind::Data
        }
        _ => FailureKind::Invariant,
    };
    PipelineError::new(Stage::Artifact, kind, e)
}

pub fn save_trained(dir: &Path, a: &PipelineArtifact) -> Result<PathBuf, PipelineError> {
    ensure_dir(dir, Stage::Artifact)?;
    let path = dir.join(files::ARTIFACT);
    save_artifact(a, &path).map_err(artifact_err)?;
    Ok(path)
}

pub fn load_trained(dir: &Path) -> Result<PipelineArtifact, PipelineError> {
    load_artifact(&dir.join(files::ARTIFACT)).map_err(artifact_err)
}

/// Writes the structured report, the text tables and per-model CSVs.
pub fn save_reports(dir: &Path, bundle: &ReportBundle) -> Result<PathBuf, PipelineError> {
    let rdir = dir.join(files::REPORTS);
    ensure_dir(&rdir, Stage::Eval)?;
    write_json(&rdir.join(files::REPORT_JSON), bundle, Stage::Eval)?;
    let text = render_table(&bundle.reports);
    std::fs::write(rdir.join(files::REPORT_TEXT), &text).map_err(io(Stage::Eval, &rdir))?;
    for r in &bundle.reports {
        write_roc_csvs(r, &rdir).map_err(io(Stage::Eval, &rdir))?;
        write_confusion_csv(r, &rdir).map_err(io(Stage::Eval, &rdir))?;
    }
    if let Some(imp) = &bundle.improvements {
        save_improvements(dir, imp)?;
    }
    Ok(rdir)
}

pub fn save_improvements(dir: &Path, imp: &[Improvement]) -> Result<(), PipelineError> {
    let rdir = dir.join(files::REPORTS);
    ensure_dir(&rdir, Stage::Eval)?;
    write_json(&rdir.join(files::IMPROVEMENTS_JSON), &imp, Stage::Eval)?;
    std::fs::write(rdir.join(files::IMPROVEMENTS_TEXT), render_improvements(imp)).map_err(io(Stage::Eval, &rdir))
}

pub fn load_reports(dir: &Path) -> Result<ReportBundle, PipelineError> {
    read_json(&dir.join(files::REPORTS).join(files::REPORT_JSON), Stage::Eval)
}

#[derive(Debug, Clone, Serialize)]
struct RunMetadataFile<'a> {
    split_seed: u64,
    boost_seed: u64,
    model_seed: u64,
    n_train: usize,
    n_test: usize,
    sparsity: &'a SparsityRecord,
    timings: &'a Timings,
}

pub fn save_run_metadata(dir: &Path, a: &PipelineArtifact, timings: &Timings) -> Result<(), PipelineError> {
    ensure_dir(dir, Stage::Artifact)?;
    let m = &a.metadata;
    let file = RunMetadataFile {
        split_seed: m.split_seed,
        boost_seed: m.boost_seed,
        model_seed: m.model_seed,
        n_train: m.n_train,
        n_test: m.n_test,
        sparsity: &m.sparsity,
        timings,
    };
    write_json(&dir.join(files::RUN_METADATA), &file, Stage::Artifact)
}

/// Full run that also persists every intermediate into `cfg.run.output_dir`.
pub fn run_and_persist(cfg: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let dir = cfg.run.output_dir.clone();
    let mut timings = Timings::default();
    let t = Instant::now();
    let ing = ingest(cfg)?;
    save_ingested(&dir, &ing)?;
    timings.record("ingest", t);
    let t = Instant::now();
    let vec = vectorize(cfg, &ing, None)?;
    save_vocabulary(&dir, &vec.vocabulary)?;
    timings.record("vectorize", t);
    let t = Instant::now();
    let artifact = train(cfg, &vec)?;
    save_trained(&dir, &artifact)?;
    timings.record("train", t);
    let t = Instant::now();
    let reports = evaluate(&artifact, &vec)?;
    let improvements = compare(&reports)?;
    timings.record("evaluate", t);
    let bundle = ReportBundle { reports, improvements };
    save_reports(&dir, &bundle)?;
    save_run_metadata(&dir, &artifact, &timings)?;
    Ok(RunOutput {
        artifact,
        bundle,
        timings,
    })
}
