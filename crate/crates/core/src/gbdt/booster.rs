use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::line_search::{line_search, LineSearchConfig};
use super::loss::{sigmoid, Loss, LogLoss};
use super::tree::{RegressionTree, SortedColumns, TreeConfig};
use super::GbdtError;
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    /// Number of boosting stages.
    pub stages: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of rows each stage's tree is fitted on, drawn without
    /// replacement from `seed`. The step size always uses every row.
    pub subsample: f64,
    pub seed: u64,
    pub line_search: LineSearchConfig,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            stages: 100,
            max_depth: 3,
            min_leaf: 1,
            subsample: 1.0,
            seed: 0,
            line_search: LineSearchConfig::default(),
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<(), GbdtError> {
        if self.max_depth < 1 {
            return Err(GbdtError::BadConfig("max_depth must be at least 1".into()));
        }
        if self.min_leaf < 1 {
            return Err(GbdtError::BadConfig("min_leaf must be at least 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(GbdtError::BadConfig(format!("subsample {} outside (0, 1]", self.subsample)));
        }
        let ls = &self.line_search;
        if !(ls.lower < ls.upper && ls.tolerance > 0.0) {
            return Err(GbdtError::BadConfig("line search needs lower < upper and tolerance > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub tree: RegressionTree,
    pub step: f64,
}

/// Binary gradient-boosted ensemble on the log-odds scale:
/// `margin(x) = initial_score + sum_m step_m * tree_m(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    initial_score: f64,
    n_features: usize,
    stages: Vec<Stage>,
    /// Mean training log-loss before the first stage and after each stage.
    train_loss: Vec<f64>,
}

fn targets_of(y: &[bool]) -> Vec<f64> {
    y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

impl Booster {
    /// An ensemble with no stages.
    pub fn constant(initial_score: f64, n_features: usize) -> Self {
        Self {
            initial_score,
            n_features,
            stages: Vec::new(),
            train_loss: Vec::new(),
        }
    }

    pub fn initial_score(&self) -> f64 {
        self.initial_score
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }

    pub fn push_stage(&mut self, tree: RegressionTree, step: f64) {
        self.stages.push(Stage { tree, step });
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        for (m, s) in self.stages.iter().enumerate() {
            if let Some(f) = s.tree.max_feature() {
                if f >= self.n_features {
                    return Err(format!("stage {m} splits on feature {f} of {}", self.n_features));
                }
            }
        }
        Ok(())
    }

    fn check_width(&self, x: &FeatureMatrix) -> Result<(), GbdtError> {
        if x.n_cols() != self.n_features {
            return Err(GbdtError::DimensionMismatch {
                expected: self.n_features,
                got: x.n_cols(),
            });
        }
        Ok(())
    }

    pub fn margin_row(&self, row: &[f64]) -> f64 {
        self.stages
            .iter()
            .fold(self.initial_score, |f, s| f + s.step * s.tree.predict(row))
    }

    pub fn predict_margin(&self, x: &FeatureMatrix) -> Result<Vec<f64>, GbdtError> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| self.margin_row(r)).collect())
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>, GbdtError> {
        Ok(self.predict_margin(x)?.into_iter().map(sigmoid).collect())
    }

    /// `n x M` matrix of the leaf id each row reaches in each stage's tree.
    pub fn apply_leaves(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, GbdtError> {
        self.check_width(x)?;
        Ok(FeatureMatrix::from_fn_rows(x.n_rows(), self.stages.len(), |i, out| {
            let row = x.row(i);
            for (o, s) in out.iter_mut().zip(&self.stages) {
                *o = s.tree.leaf_id(row) as f64;
            }
        }))
    }
}

/// Fits a binary booster on binomial log-loss.
pub fn fit_booster(x: &FeatureMatrix, y: &[bool], cfg: &BoostConfig) -> Result<Booster, GbdtError> {
    let cols = SortedColumns::new(x);
    fit_booster_indexed(x, &cols, y, cfg)
}

/// As [`fit_booster`], reusing a prebuilt column index of `x`.
pub fn fit_booster_indexed(
    x: &FeatureMatrix,
    cols: &SortedColumns,
    y: &[bool],
    cfg: &BoostConfig,
) -> Result<Booster, GbdtError> {
    cfg.validate()?;
    if x.n_rows() != y.len() || cols.n_rows() != y.len() {
        return Err(GbdtError::DimensionMismatch {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    let positives = y.iter().filter(|b| **b).count();
    if positives == 0 || positives == y.len() {
        return Err(GbdtError::DegenerateLabels);
    }

    let n = y.len();
    let targets = targets_of(y);
    let p = positives as f64 / n as f64;
    let initial_score = (p / (1.0 - p)).ln();
    let mut margins = vec![initial_score; n];
    let mut booster = Booster::constant(initial_score, x.n_cols());
    booster.train_loss.push(LogLoss.total(&targets, &margins) / n as f64);

    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let all_rows: Vec<usize> = (0..n).collect();
    let sample_size = ((n as f64 * cfg.subsample).round() as usize).clamp(1, n);
    let mut residuals = vec![0.0; n];
    let mut direction = vec![0.0; n];

    for _ in 0..cfg.stages {
        for i in 0..n {
            residuals[i] = LogLoss.negative_gradient(targets[i], margins[i]);
        }
        let rows = if sample_size < n {
            let mut s = sample(&mut rng, n, sample_size).into_vec();
            s.sort_unstable();
            s
        } else {
            all_rows.clone()
        };
        let tree = RegressionTree::fit(cols, &residuals, &rows, &tree_cfg);
        for (i, d) in direction.iter_mut().enumerate() {
            *d = tree.predict(x.row(i));
        }
        let step = line_search(&LogLoss, &targets, &margins, &direction, &cfg.line_search);
        for (f, d) in margins.iter_mut().zip(&direction) {
            *f += step * d;
        }
        booster.train_loss.push(LogLoss.total(&targets, &margins) / n as f64);
        booster.push_stage(tree, step);
    }
    Ok(booster)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::tree::TreeNode;

    fn toy() -> (FeatureMatrix, Vec<bool>) {
        // two interleaved 1-D clusters plus a noise feature
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|i| [(i as f64) * 0.25, ((i * 7) % 5) as f64])
            .collect();
        let y: Vec<bool> = (0..40).map(|i| (i / 5) % 2 == 0).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn zero_stages_predict_prior_log_odds() {
        let (x, _) = toy();
        let y: Vec<bool> = (0..40).map(|i| i < 10).collect();
        let cfg = BoostConfig { stages: 0, ..Default::default() };
        let b = fit_booster(&x, &y, &cfg).unwrap();
        let prior = (0.25f64 / 0.75).ln();
        assert_eq!(b.initial_score(), prior);
        assert!(b.predict_margin(&x).unwrap().iter().all(|m| *m == prior));
        assert_eq!(b.apply_leaves(&x).unwrap().n_cols(), 0);
    }

    #[test]
    fn single_class_rejected() {
        let (x, _) = toy();
        let y = vec![true; 40];
        assert!(matches!(fit_booster(&x, &y, &BoostConfig::default()), Err(GbdtError::DegenerateLabels)));
    }

    #[test]
    fn bad_depth_rejected() {
        let (x, y) = toy();
        let cfg = BoostConfig { max_depth: 0, ..Default::default() };
        assert!(matches!(fit_booster(&x, &y, &cfg), Err(GbdtError::BadConfig(_))));
    }

    #[test]
    fn loss_is_monotone() {
        let (x, y) = toy();
        let cfg = BoostConfig { stages: 15, max_depth: 2, ..Default::default() };
        let b = fit_booster(&x, &y, &cfg).unwrap();
        assert_eq!(b.train_loss().len(), 16);
        for w in b.train_loss().windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", b.train_loss());
        }
    }

    #[test]
    fn appended_constant_stage_shifts_margins() {
        let (x, y) = toy();
        let mut b = fit_booster(&x, &y, &BoostConfig { stages: 3, ..Default::default() }).unwrap();
        let before = b.predict_margin(&x).unwrap();
        b.push_stage(RegressionTree::constant(1.0), 0.5);
        let after = b.predict_margin(&x).unwrap();
        for (a, b) in after.iter().zip(&before) {
            assert!((a - b - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn width_checked() {
        let (x, y) = toy();
        let b = fit_booster(&x, &y, &BoostConfig { stages: 2, ..Default::default() }).unwrap();
        let narrow = FeatureMatrix::zeros(3, 1);
        assert!(matches!(b.predict_margin(&narrow), Err(GbdtError::DimensionMismatch { .. })));
        assert!(matches!(b.apply_leaves(&narrow), Err(GbdtError::DimensionMismatch { .. })));
    }

    #[test]
    fn stumps_give_binary_leaf_ids() {
        let (x, y) = toy();
        let cfg = BoostConfig { stages: 5, max_depth: 1, ..Default::default() };
        let b = fit_booster(&x, &y, &cfg).unwrap();
        let leaves = b.apply_leaves(&x).unwrap();
        assert_eq!((leaves.n_rows(), leaves.n_cols()), (40, 5));
        assert!(leaves.values().iter().all(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn subsampling_is_seeded() {
        let (x, y) = toy();
        let cfg = BoostConfig { stages: 6, subsample: 0.5, seed: 9, ..Default::default() };
        let a = fit_booster(&x, &y, &cfg).unwrap();
        let b = fit_booster(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        let c = fit_booster(&x, &y, &BoostConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn validate_catches_out_of_range_features() {
        let mut b = Booster::constant(0.0, 1);
        b.push_stage(
            RegressionTree::from_nodes(vec![
                TreeNode::Split { feature: 3, threshold: 0.0, low: 1, high: 2 },
                TreeNode::Leaf { id: 0, value: 0.0 },
                TreeNode::Leaf { id: 0, value: 1.0 },
            ])
            .unwrap(),
            1.0,
        );
        assert!(b.validate().is_err());
    }
}
