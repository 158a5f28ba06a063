use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;

const MIN_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 12,
            min_leaf: 1,
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    fn features_per_split(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
            .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassNode {
    Split {
        feature: usize,
        threshold: f64,
        low: usize,
        high: usize,
    },
    Leaf {
        class: usize,
    },
}

/// CART classification tree grown on Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTree {
    nodes: Vec<ClassNode>,
}

impl ClassificationTree {
    pub fn nodes(&self) -> &[ClassNode] {
        &self.nodes
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                ClassNode::Split {
                    feature,
                    threshold,
                    low,
                    high,
                } => at = if row[feature] <= threshold { low } else { high },
                ClassNode::Leaf { class } => return class,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[ClassNode], at: usize) -> usize {
            match nodes[at] {
                ClassNode::Split { low, high, .. } => 1 + walk(nodes, low).max(walk(nodes, high)),
                ClassNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Grows a tree on `rows` (duplicates allowed, as in a bootstrap sample).
    pub fn fit<R: Rng>(
        x: &FeatureMatrix,
        y: &[usize],
        n_classes: usize,
        rows: Vec<usize>,
        cfg: &ForestConfig,
        rng: &mut R,
    ) -> Self {
        let mut g = Grower {
            x,
            y,
            n_classes,
            cfg,
            m: cfg.features_per_split(x.n_cols()),
            nodes: Vec::new(),
            scratch: Vec::new(),
        };
        g.grow(rows, 0, rng);
        Self { nodes: g.nodes }
    }
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    y: &'a [usize],
    n_classes: usize,
    cfg: &'a ForestConfig,
    m: usize,
    nodes: Vec<ClassNode>,
    scratch: Vec<(f64, usize)>,
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn grow<R: Rng>(&mut self, rows: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let at = self.nodes.len();
        let mut counts = vec![0usize; self.n_classes];
        for &r in &rows {
            counts[self.y[r]] += 1;
        }
        let class = majority(&counts);
        self.nodes.push(ClassNode::Leaf { class });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || rows.len() < 2 * self.cfg.min_leaf.max(1) {
            return at;
        }
        let Some(best) = self.best_split(&rows, &counts, rng) else {
            return at;
        };
        let (low_rows, high_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x.get(r, best.feature) <= best.threshold);
        let low = self.grow(low_rows, depth + 1, rng);
        let high = self.grow(high_rows, depth + 1, rng);
        self.nodes[at] = ClassNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            low,
            high,
        };
        at
    }

    /// Visits features in random order until `m` non-constant ones were scored.
    fn best_split<R: Rng>(&mut self, rows: &[usize], counts: &[usize], rng: &mut R) -> Option<BestSplit> {
        let d = self.x.n_cols();
        let n = rows.len() as f64;
        let parent = counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n;
        let mut order: Vec<usize> = (0..d).collect();
        let mut best: Option<BestSplit> = None;
        let mut scored = 0;
        for i in 0..d {
            if scored >= self.m {
                break;
            }
            let j = rng.gen_range(i..d);
            order.swap(i, j);
            let f = order[i];
            self.scratch.clear();
            self.scratch.extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            let first = self.scratch[0].0;
            if self.scratch.iter().all(|p| p.0 == first) {
                continue;
            }
            scored += 1;
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; self.n_classes];
            for k in 0..self.scratch.len() - 1 {
                let (v, c) = self.scratch[k];
                left[c] += 1;
                let next = self.scratch[k + 1].0;
                if next == v {
                    continue;
                }
                let nl = k + 1;
                let nr = self.scratch.len() - nl;
                if nl < self.cfg.min_leaf || nr < self.cfg.min_leaf {
                    continue;
                }
                let (mut sl, mut sr) = (0.0, 0.0);
                for (l, t) in left.iter().zip(counts) {
                    let r = t - l;
                    sl += (l * l) as f64;
                    sr += (r * r) as f64;
                }
                // weighted Gini decrease up to the constant factor 1/n
                let score = sl / nl as f64 + sr / nr as f64 - parent;
                if score > MIN_DECREASE && best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(BestSplit {
                        score,
                        feature: f,
                        threshold: v + (next - v) / 2.0,
                    });
                }
            }
        }
        best
    }
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Bagged Gini trees with per-split feature subsampling; prediction is the
/// vote share of each class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    n_classes: usize,
    n_features: usize,
    trees: Vec<ClassificationTree>,
}

impl RandomForest {
    pub fn fit(x: &FeatureMatrix, y: &[usize], n_classes: usize, cfg: &ForestConfig, seed: u64) -> Self {
        let n = x.n_rows();
        let trees = (0..cfg.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let rows: Vec<usize> = if cfg.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                ClassificationTree::fit(x, y, n_classes, rows, cfg, &mut rng)
            })
            .collect();
        Self {
            n_classes,
            n_features: x.n_cols(),
            trees,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[ClassificationTree] {
        &self.trees
    }

    pub fn vote_shares(&self, row: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[t.predict_row(row)] += 1.0;
        }
        let total = self.trees.len().max(1) as f64;
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }
}
