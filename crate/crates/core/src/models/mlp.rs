use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Epochs without a lower training loss before stopping.
    pub patience: usize,
    /// Scale inputs to zero mean, unit variance using training statistics.
    pub standardize: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            batch_size: 128,
            learning_rate: 0.01,
            epochs: 30,
            patience: 3,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Scaler {
    fn fit(x: &FeatureMatrix) -> Self {
        let n = x.n_rows() as f64;
        let d = x.n_cols();
        let mut mean = Array1::zeros(d);
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean /= n;
        let mut var = Array1::<f64>::zeros(d);
        for row in x.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var.mapv(|v| {
            let sd = (v / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        });
        Self { mean, scale }
    }
}

/// Gradients of the mean cross-entropy with respect to each parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// One ReLU hidden layer and a softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp2 {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub scaler: Option<Scaler>,
    /// Mean training loss per completed epoch.
    pub loss_history: Vec<f64>,
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

impl Mlp2 {
    /// He-uniform weights, zero biases.
    pub fn init<R: Rng>(d: usize, hidden: usize, k: usize, rng: &mut R) -> Self {
        let l1 = (6.0 / d as f64).sqrt();
        let l2 = (6.0 / hidden as f64).sqrt();
        Self {
            w1: Array2::from_shape_fn((d, hidden), |_| rng.gen_range(-l1..l1)),
            b1: Array1::zeros(hidden),
            w2: Array2::from_shape_fn((hidden, k), |_| rng.gen_range(-l2..l2)),
            b2: Array1::zeros(k),
            scaler: None,
            loss_history: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    fn batch(&self, x: &FeatureMatrix, rows: &[usize]) -> Array2<f64> {
        let mut b = Array2::zeros((rows.len(), x.n_cols()));
        for (mut out, &r) in b.rows_mut().into_iter().zip(rows) {
            out.assign(&ndarray::ArrayView1::from(x.row(r)));
        }
        if let Some(s) = &self.scaler {
            b -= &s.mean;
            b /= &s.scale;
        }
        b
    }

    fn hidden_pre(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w1) + &self.b1
    }

    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let z1 = self.hidden_pre(x);
        let a1 = z1.mapv(|v| v.max(0.0));
        let mut p = a1.dot(&self.w2) + &self.b2;
        softmax_rows(&mut p);
        (z1, a1, p)
    }

    /// Mean cross-entropy on `(x, y)` and its gradients. `x` is already scaled.
    pub fn loss_and_grads(&self, x: &Array2<f64>, y: &[usize]) -> (f64, Gradients) {
        let n = x.nrows() as f64;
        let (z1, a1, p) = self.forward(x);
        let loss = y
            .iter()
            .enumerate()
            .map(|(i, &c)| -p[[i, c]].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / n;
        let mut dz2 = p;
        for (i, &c) in y.iter().enumerate() {
            dz2[[i, c]] -= 1.0;
        }
        dz2 /= n;
        let w2 = a1.t().dot(&dz2);
        let b2 = dz2.sum_axis(Axis(0));
        let mut dz1 = dz2.dot(&self.w2.t());
        dz1.zip_mut_with(&z1, |g, &z| {
            if z <= 0.0 {
                *g = 0.0
            }
        });
        let w1 = x.t().dot(&dz1);
        let b1 = dz1.sum_axis(Axis(0));
        (loss, Gradients { w1, b1, w2, b2 })
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        self.w1.scaled_add(-lr, &g.w1);
        self.b1.scaled_add(-lr, &g.b1);
        self.w2.scaled_add(-lr, &g.w2);
        self.b2.scaled_add(-lr, &g.b2);
    }

    pub fn fit(x: &FeatureMatrix, y: &[usize], n_classes: usize, cfg: &MlpConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::init(x.n_cols(), cfg.hidden.max(1), n_classes, &mut rng);
        if cfg.standardize {
            net.scaler = Some(Scaler::fit(x));
        }
        let mut order: Vec<usize> = (0..x.n_rows()).collect();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        let bs = cfg.batch_size.max(1);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(bs) {
                let xb = net.batch(x, chunk);
                let yb: Vec<usize> = chunk.iter().map(|&r| y[r]).collect();
                let (loss, g) = net.loss_and_grads(&xb, &yb);
                total += loss * chunk.len() as f64;
                net.step(&g, cfg.learning_rate);
            }
            let epoch_loss = total / x.n_rows() as f64;
            net.loss_history.push(epoch_loss);
            if epoch_loss < best {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
        net
    }

    fn chunked<F: FnMut(usize, Array2<f64>)>(&self, x: &FeatureMatrix, mut f: F) {
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        for (c, chunk) in rows.chunks(1024).enumerate() {
            f(c * 1024, self.batch(x, chunk));
        }
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Array2<f64> {
        let mut out = Array2::zeros((x.n_rows(), self.w2.ncols()));
        self.chunked(x, |at, xb| {
            let (_, _, p) = self.forward(&xb);
            out.slice_mut(s![at..at + p.nrows(), ..]).assign(&p);
        });
        out
    }

    /// Post-ReLU hidden activations, one row per input row.
    pub fn hidden_activations(&self, x: &FeatureMatrix) -> Array2<f64> {
        let mut out = Array2::zeros((x.n_rows(), self.hidden()));
        self.chunked(x, |at, xb| {
            let a = self.hidden_pre(&xb).mapv(|v| v.max(0.0));
            out.slice_mut(s![at..at + a.nrows(), ..]).assign(&a);
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Mlp2, Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp2::init(4, 6, 4, &mut rng);
        net.b1.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
        net.b2.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
        let x = Array2::from_shape_fn((5, 4), |_| rng.gen_range(-2.0..2.0));
        (net, x, vec![0, 1, 2, 3, 1])
    }

    /// Central differences over every parameter; returns max relative error per tensor.
    fn max_rel_error(net: &Mlp2, x: &Array2<f64>, y: &[usize]) -> f64 {
        let (_, g) = net.loss_and_grads(x, y);
        let h = 1e-5;
        let mut worst = 0.0f64;
        let mut check = |analytic: &[f64], get: &dyn Fn(&mut Mlp2) -> &mut [f64]| {
            let mut numeric = vec![0.0; analytic.len()];
            for (i, n) in numeric.iter_mut().enumerate() {
                let mut plus = net.clone();
                get(&mut plus)[i] += h;
                let mut minus = net.clone();
                get(&mut minus)[i] -= h;
                *n = (plus.loss_and_grads(x, y).0 - minus.loss_and_grads(x, y).0) / (2.0 * h);
            }
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
            let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
            worst = worst.max(diff / na.max(nn).max(1e-12));
        };
        check(g.w1.as_slice().unwrap(), &|m| m.w1.as_slice_mut().unwrap());
        check(g.b1.as_slice().unwrap(), &|m| m.b1.as_slice_mut().unwrap());
        check(g.w2.as_slice().unwrap(), &|m| m.w2.as_slice_mut().unwrap());
        check(g.b2.as_slice().unwrap(), &|m| m.b2.as_slice_mut().unwrap());
        worst
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let (net, x, y) = toy();
        let err = max_rel_error(&net, &x, &y);
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn probabilities_are_normalized() {
        let (net, x, _) = toy();
        let (_, _, p) = net.forward(&x);
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn learns_separable_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..300 {
            let c = i % 3;
            rows.push([c as f64 * 3.0 + rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
            y.push(c);
        }
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let cfg = MlpConfig {
            learning_rate: 0.1,
            batch_size: 16,
            ..Default::default()
        };
        let net = Mlp2::fit(&x, &y, 3, &cfg, 1);
        let p = net.predict_proba(&x);
        let hits = p
            .rows()
            .into_iter()
            .zip(&y)
            .filter(|(r, &c)| r.iter().enumerate().all(|(k, &v)| k == c || v < r[c]))
            .count();
        assert!(hits >= 290, "{hits}/300");
        assert!(net.loss_history.first() > net.loss_history.last());
    }

    #[test]
    fn early_stop_bounds_epochs() {
        let x = FeatureMatrix::from_rows(&[[0.0], [0.0], [0.0], [0.0]]).unwrap();
        let y = [0, 1, 0, 1];
        let cfg = MlpConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        let net = Mlp2::fit(&x, &y, 2, &cfg, 0);
        // the loss never improves after the first epoch
        assert_eq!(net.loss_history.len(), 1 + cfg.patience);
    }
}
