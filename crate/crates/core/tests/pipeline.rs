mod common;

use common::{small_config, synth_csv};
use densify::artifact::{from_bytes, load_artifact, to_bytes, ArtifactError};
use densify::config::ConfigError;
use densify::eval::Scenario;
use densify::models::ModelKind;
use densify::pipeline::{self, run_and_persist, run_pipeline, FailureKind};

#[test]
fn both_scenarios_produce_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_csv(dir.path(), 600, 1);
    let out = dir.path().join("out");
    let cfg = small_config(&csv, &out, "both", &["run.export_cascade=true"]);
    let run = run_and_persist(&cfg).unwrap();

    assert_eq!(run.artifact.boosters.len(), 4);
    assert_eq!(run.artifact.classifiers.len(), 6);
    assert_eq!(run.bundle.reports.len(), 6);
    assert_eq!(run.bundle.improvements.as_ref().unwrap().len(), 3);
    for f in [
        "corpus.json",
        "vocabulary.json",
        "model.densify",
        "run_metadata.json",
        "reports/report.json",
        "reports/report.txt",
        "reports/improvements.json",
        "reports/improvements.txt",
        "reports/confusion_mlp2_FE.csv",
        "reports/roc_naive_bayes_RD_Anxiety.csv",
        "cascade_train.csv",
        "cascade_test.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let s = &run.artifact.metadata.sparsity;
    assert!(s.cascade_train.unwrap() < s.raw_train);
}

#[test]
fn raw_only_run_has_no_boosters() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_csv(dir.path(), 400, 2);
    let cfg = small_config(&csv, &dir.path().join("out"), "rd", &[]);
    let run = run_pipeline(&cfg).unwrap();
    assert!(run.artifact.boosters.is_empty());
    assert!(run.bundle.improvements.is_none());
    assert!(run.bundle.reports.iter().all(|r| r.scenario == Scenario::Raw));
    assert!(matches!(
        run.artifact.classifier(Scenario::Enhanced, ModelKind::Mlp2),
        Err(ArtifactError::MissingClassifier { .. })
    ));
}

#[test]
fn artifact_roundtrip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_csv(dir.path(), 500, 3);
    let out = dir.path().join("out");
    let run = run_and_persist(&small_config(&csv, &out, "both", &[])).unwrap();

    let bytes = std::fs::read(out.join("model.densify")).unwrap();
    let loaded = load_artifact(&out.join("model.densify")).unwrap();
    assert_eq!(loaded, run.artifact);
    assert_eq!(to_bytes(&loaded), bytes);

    // loaded artifact scores identically to the in-memory one
    let texts = ["i cannot sleep again", "", "call 555-123-4567 tonight"];
    for sc in [Scenario::Raw, Scenario::Enhanced] {
        let a = run.artifact.predict_texts(&texts, sc, ModelKind::RandomForest).unwrap();
        let b = loaded.predict_texts(&texts, sc, ModelKind::RandomForest).unwrap();
        assert_eq!(a, b);
    }

    let mut wrong = b"densify-artifact 999".to_vec();
    wrong.extend_from_slice(&bytes[bytes.iter().position(|&b| b == b'\n').unwrap()..]);
    assert!(matches!(from_bytes(&wrong), Err(ArtifactError::VersionMismatch { .. })));
    assert!(matches!(from_bytes(&bytes[..bytes.len() / 2]), Err(ArtifactError::CorruptArtifact(_))));
    assert!(matches!(from_bytes(b"not an artifact"), Err(ArtifactError::CorruptArtifact(_))));
}

#[test]
fn persisted_stages_resume() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_csv(dir.path(), 500, 4);
    let out = dir.path().join("out");
    let cfg = small_config(&csv, &out, "both", &[]);

    let ing = pipeline::ingest(&cfg).unwrap();
    pipeline::save_ingested(&out, &ing).unwrap();
    let vec = pipeline::vectorize(&cfg, &ing, None).unwrap();
    pipeline::save_vocabulary(&out, &vec.vocabulary).unwrap();

    let ing2 = pipeline::load_ingested(&out).unwrap();
    let vocab = pipeline::load_vocabulary(&out).unwrap();
    assert_eq!(vocab, vec.vocabulary);
    let vec2 = pipeline::vectorize(&cfg, &ing2, Some(vocab)).unwrap();
    assert_eq!(vec2.x_train, vec.x_train);
    assert_eq!(vec2.y_test, vec.y_test);

    let artifact = pipeline::train(&cfg, &vec2).unwrap();
    let staged = pipeline::evaluate(&artifact, &vec2).unwrap();
    let whole = run_pipeline(&cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&staged).unwrap(),
        serde_json::to_string(&whole.bundle.reports).unwrap()
    );
}

#[test]
fn missing_dataset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("nope.csv"), &dir.path().join("out"), "both", &[]);
    let err = pipeline::ingest(&cfg).unwrap_err();
    assert_eq!(err.kind, FailureKind::Config);
    assert_eq!(err.kind.exit_code(), 1);
    assert!(err.to_string().contains("dataset.path"), "{err}");
}

#[test]
fn bad_overrides_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = common::config_text(&dir.path().join("x.csv"), dir.path(), "both");
    let bad = |o: &str| densify::config::PipelineConfig::from_toml_str(&text, &[o.to_string()]).unwrap_err();
    assert!(matches!(bad("split.fraction=1.5"), ConfigError::Invalid { field: "split.fraction", .. }));
    assert!(matches!(bad("tfidf.bogus=1"), ConfigError::Parse(_)));
    assert!(matches!(bad("noequals"), ConfigError::BadOverride(_)));
}

#[test]
fn example_config_parses() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/example.toml");
    let cfg = densify::config::PipelineConfig::load(std::path::Path::new(path), &[]).unwrap();
    assert_eq!(cfg.models.kinds.len(), 3);
    assert_eq!(cfg.model_seed(), 44);
}
