use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesConfig {
    /// Lower bound on every per-class feature variance.
    pub var_floor: f64,
}

impl Default for NaiveBayesConfig {
    fn default() -> Self {
        Self { var_floor: 1e-9 }
    }
}

/// Gaussian naive Bayes: per-class feature means and variances plus log priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    n_features: usize,
    /// `None` for classes absent from the training data.
    log_priors: Vec<Option<f64>>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl GaussianNb {
    pub fn fit(x: &FeatureMatrix, y: &[usize], n_classes: usize, cfg: &NaiveBayesConfig) -> Self {
        let d = x.n_cols();
        let mut counts = vec![0usize; n_classes];
        let mut means = vec![vec![0.0; d]; n_classes];
        for (row, &c) in x.rows().zip(y) {
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        for (m, &n) in means.iter_mut().zip(&counts) {
            if n > 0 {
                m.iter_mut().for_each(|v| *v /= n as f64);
            }
        }
        let mut variances = vec![vec![0.0; d]; n_classes];
        for (row, &c) in x.rows().zip(y) {
            for ((s, v), m) in variances[c].iter_mut().zip(row).zip(&means[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for (var, &n) in variances.iter_mut().zip(&counts) {
            for v in var.iter_mut() {
                *v = if n > 0 { *v / n as f64 } else { 1.0 };
                *v = v.max(cfg.var_floor);
            }
        }
        let total = y.len() as f64;
        let log_priors = counts
            .iter()
            .map(|&n| (n > 0).then(|| (n as f64 / total).ln()))
            .collect();
        Self {
            n_features: d,
            log_priors,
            means,
            variances,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Joint log-likelihood `ln P(c) + sum_j ln N(x_j; mu_cj, var_cj)` per class.
    pub fn joint_log_likelihood(&self, row: &[f64]) -> Vec<f64> {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.log_priors
            .iter()
            .enumerate()
            .map(|(c, prior)| match prior {
                None => f64::NEG_INFINITY,
                Some(p) => {
                    let ll: f64 = row
                        .iter()
                        .zip(&self.means[c])
                        .zip(&self.variances[c])
                        .map(|((x, m), v)| -0.5 * (ln_2pi + v.ln()) - (x - m) * (x - m) / (2.0 * v))
                        .sum();
                    p + ll
                }
            })
            .collect()
    }

    pub fn posterior(&self, row: &[f64]) -> Vec<f64> {
        let jll = self.joint_log_likelihood(row);
        let max = jll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = jll.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }
}
