use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use densify::corpus::{ClassId, ClassTaxonomy};
use densify::matrix::FeatureMatrix;
use densify::models::{
    dump_hidden_activations, fit_classifier, predict, predict_proba, ForestConfig, ModelConfig, ModelError, ModelKind,
    RandomForest,
};

fn blobs(n: usize, seed: u64) -> (FeatureMatrix, Vec<ClassId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [(-3.0, -3.0), (3.0, 3.0), (-3.0, 3.0), (3.0, -3.0)];
    let mut y = Vec::with_capacity(n);
    let x = FeatureMatrix::from_fn_rows(n, 2, |i, row| {
        let c = i % 4;
        y.push(ClassId(c));
        row[0] = centers[c].0 + rng.gen_range(-1.0..1.0);
        row[1] = centers[c].1 + rng.gen_range(-1.0..1.0);
    });
    (x, y)
}

fn small() -> ModelConfig {
    let mut cfg = ModelConfig::default();
    cfg.random_forest.trees = 10;
    cfg.mlp2.hidden = 32;
    cfg.mlp2.epochs = 40;
    cfg
}

fn accuracy(pred: &[ClassId], y: &[ClassId]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

#[test]
fn every_model_separates_blobs() {
    let tax = ClassTaxonomy::default();
    let (x, y) = blobs(400, 1);
    let (xt, yt) = blobs(200, 2);
    for kind in ModelKind::ALL {
        let c = fit_classifier(kind, &x, &y, &tax, &small(), 11).unwrap();
        let acc = accuracy(&predict(&c, &xt).unwrap(), &yt);
        assert!(acc > 0.95, "{kind}: {acc}");
        let p = predict_proba(&c, &xt).unwrap();
        assert_eq!(p.n_cols(), 4);
        for row in p.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{kind}");
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn same_seed_same_model() {
    let tax = ClassTaxonomy::default();
    let (x, y) = blobs(200, 3);
    for kind in ModelKind::ALL {
        let a = fit_classifier(kind, &x, &y, &tax, &small(), 5).unwrap();
        let b = fit_classifier(kind, &x, &y, &tax, &small(), 5).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn single_unbagged_tree_fits_separable_data() {
    let (x, y) = blobs(120, 4);
    let y: Vec<usize> = y.iter().map(|c| c.index()).collect();
    let cfg = ForestConfig {
        trees: 1,
        bootstrap: false,
        max_features: Some(2),
        ..Default::default()
    };
    let a = RandomForest::fit(&x, &y, 4, &cfg, 1);
    assert_eq!(a.trees().len(), 1);
    for (i, row) in x.rows().enumerate() {
        let shares = a.vote_shares(row);
        assert_eq!(shares[y[i]], 1.0);
    }
}

#[test]
fn mismatched_width_is_rejected() {
    let tax = ClassTaxonomy::default();
    let (x, y) = blobs(80, 5);
    let c = fit_classifier(ModelKind::NaiveBayes, &x, &y, &tax, &small(), 0).unwrap();
    let wide = FeatureMatrix::zeros(3, 5);
    assert!(matches!(predict_proba(&c, &wide), Err(ModelError::DimensionMismatch { expected: 2, got: 5 })));
}

#[test]
fn activation_dump_shape_and_bytes() {
    let tax = ClassTaxonomy::default();
    let (x, y) = blobs(200, 6);
    let c = fit_classifier(ModelKind::Mlp2, &x, &y, &tax, &small(), 8).unwrap();
    let probe = x.select_rows(&(0..10).collect::<Vec<_>>());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("acts.csv");
    let dump = dump_hidden_activations(&c, &probe, &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines.iter().all(|l| l.split(',').count() == 32));
    assert!(lines[1..].iter().flat_map(|l| l.split(',')).all(|v| v.parse::<f64>().unwrap() >= 0.0));

    let w2 = std::fs::read_to_string(&dump.output_weights).unwrap();
    assert_eq!(w2.lines().next().unwrap(), "Anxiety,BPD,bipolar,others");
    assert_eq!(w2.lines().count(), 33);

    dump_hidden_activations(&c, &probe, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);

    let nb = fit_classifier(ModelKind::NaiveBayes, &x, &y, &tax, &small(), 0).unwrap();
    assert!(matches!(
        dump_hidden_activations(&nb, &probe, &path),
        Err(ModelError::WrongKind(ModelKind::NaiveBayes))
    ));
}
