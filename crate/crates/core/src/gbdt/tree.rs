//! Exact greedy CART regression trees.
//!
//! Splits maximize variance reduction of the regression targets over every
//! feature and every midpoint between consecutive distinct values present in
//! the node. Ties go to the lowest feature index, then the lowest threshold.
//! Rows with `x[feature] <= threshold` take the low branch.
//!
//! Split search works on [`SortedColumns`], a per-feature list of the nonzero
//! entries sorted by value. Zero entries are handled as one implicit group,
//! so the search costs O(nnz) per node and is still exact on dense input.

use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;

const MIN_GAIN: f64 = 1e-12;

/// Nonzero entries of each column, sorted by value (then row).
#[derive(Debug, Clone)]
pub struct SortedColumns {
    n_rows: usize,
    cols: Vec<Vec<(u32, f64)>>,
}

impl SortedColumns {
    pub fn new(x: &FeatureMatrix) -> Self {
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); x.n_cols()];
        for (i, row) in x.rows().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols[j].push((i as u32, v));
                }
            }
        }
        for col in cols.iter_mut() {
            col.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        }
        Self {
            n_rows: x.n_rows(),
            cols,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        low: usize,
        high: usize,
    },
    Leaf {
        id: usize,
        value: f64,
    },
}

/// Binary regression tree. Leaf ids are dense in `[0, leaf_count)` and are
/// assigned depth-first taking the high branch first, so the path of rows
/// that fall below every threshold (the typical path of a sparse row) gets
/// the largest id rather than 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
    leaf_count: usize,
}

impl RegressionTree {
    /// Single-leaf tree predicting `value` everywhere.
    pub fn constant(value: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { id: 0, value }],
            leaf_count: 1,
        }
    }

    /// Builds a tree from explicit nodes (root first) and renumbers leaves.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self, String> {
        if nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= nodes.len() || seen[i] {
                return Err(format!("node {i} is out of range or reachable twice"));
            }
            seen[i] = true;
            if let TreeNode::Split { low, high, .. } = nodes[i] {
                stack.push(low);
                stack.push(high);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("tree has unreachable nodes".into());
        }
        let mut tree = Self { nodes, leaf_count: 0 };
        tree.number_leaves();
        Ok(tree)
    }

    fn number_leaves(&mut self) {
        let mut next = 0;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            match &mut self.nodes[i] {
                TreeNode::Split { low, high, .. } => {
                    // popped in reverse: high subtree first
                    stack.push(*low);
                    stack.push(*high);
                }
                TreeNode::Leaf { id, .. } => {
                    *id = next;
                    next += 1;
                }
            }
        }
        self.leaf_count = next;
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { low, high, .. } => 1 + go(nodes, low).max(go(nodes, high)),
            }
        }
        go(&self.nodes, 0)
    }

    /// (leaf id, leaf value) reached by `row`.
    pub fn route(&self, row: &[f64]) -> (usize, f64) {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { id, value } => return (id, value),
                TreeNode::Split {
                    feature,
                    threshold,
                    low,
                    high,
                } => i = if row[feature] <= threshold { low } else { high },
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.route(row).1
    }

    pub fn leaf_id(&self, row: &[f64]) -> usize {
        self.route(row).0
    }

    /// Largest feature index used by any split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }

    /// Fits a tree to `targets` using the training rows listed in `rows`.
    pub fn fit(cols: &SortedColumns, targets: &[f64], rows: &[usize], cfg: &TreeConfig) -> Self {
        assert_eq!(targets.len(), cols.n_rows(), "one target per matrix row");
        let mut builder = Builder {
            cols,
            targets,
            cfg,
            owner: vec![u32::MAX; cols.n_rows()],
            next_tag: 0,
            nodes: Vec::new(),
            buf: Vec::new(),
        };
        builder.grow(rows.to_vec(), 0);
        let mut tree = Self {
            nodes: builder.nodes,
            leaf_count: 0,
        };
        tree.number_leaves();
        tree
    }
}

struct Builder<'a> {
    cols: &'a SortedColumns,
    targets: &'a [f64],
    cfg: &'a TreeConfig,
    owner: Vec<u32>,
    next_tag: u32,
    nodes: Vec<TreeNode>,
    buf: Vec<(u32, f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.targets[r]).sum();
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            id: 0,
            value: if n == 0 { 0.0 } else { sum / n as f64 },
        });
        if depth >= self.cfg.max_depth || n < 2 * self.cfg.min_leaf.max(1) {
            return at;
        }
        let Some(best) = self.best_split(&rows, sum) else {
            return at;
        };

        let tag = self.mark(&rows);
        // every row starts low when zero falls below the threshold, then
        // nonzero entries above it move high (and vice versa)
        let zero_low = 0.0 <= best.threshold;
        let flipped = tag + 1;
        for &(r, v) in &self.cols.cols[best.feature] {
            if self.owner[r as usize] == tag && (v > best.threshold) == zero_low {
                // flag rows whose side differs from the zero group
                self.owner[r as usize] = flipped;
            }
        }
        let mut low_rows = Vec::new();
        let mut high_rows = Vec::new();
        for &r in &rows {
            let differs = self.owner[r] == flipped;
            let high = if zero_low { differs } else { !differs };
            if high {
                high_rows.push(r);
            } else {
                low_rows.push(r);
            }
        }
        self.next_tag = flipped;

        let low = self.grow(low_rows, depth + 1);
        let high = self.grow(high_rows, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            low,
            high,
        };
        at
    }

    fn mark(&mut self, rows: &[usize]) -> u32 {
        self.next_tag = self.next_tag.wrapping_add(1);
        if self.next_tag >= u32::MAX - 2 {
            self.owner.iter_mut().for_each(|o| *o = u32::MAX);
            self.next_tag = 0;
        }
        let tag = self.next_tag;
        for &r in rows {
            self.owner[r] = tag;
        }
        tag
    }

    fn best_split(&mut self, rows: &[usize], sum: f64) -> Option<Candidate> {
        let n = rows.len();
        let tag = self.mark(rows);
        let min_leaf = self.cfg.min_leaf.max(1);
        let parent_score = sum * sum / n as f64;
        let mut best: Option<Candidate> = None;

        for feature in 0..self.cols.n_cols() {
            self.buf.clear();
            for &(r, v) in &self.cols.cols[feature] {
                if self.owner[r as usize] == tag {
                    self.buf.push((r, v, self.targets[r as usize]));
                }
            }
            if self.buf.is_empty() {
                continue;
            }
            let nz_sum: f64 = self.buf.iter().map(|e| e.2).sum();
            let zero_n = n - self.buf.len();
            let zero_sum = sum - nz_sum;

            // walk distinct values in ascending order, zero group included
            let mut left_n = 0usize;
            let mut left_sum = 0.0;
            let mut prev: Option<f64> = None;
            let mut zero_done = zero_n == 0;
            let mut k = 0;
            loop {
                let (value, cnt, s) = if !zero_done && (k == self.buf.len() || self.buf[k].1 > 0.0) {
                    zero_done = true;
                    (0.0, zero_n, zero_sum)
                } else if k < self.buf.len() {
                    let v = self.buf[k].1;
                    let mut cnt = 0;
                    let mut s = 0.0;
                    while k < self.buf.len() && self.buf[k].1 == v {
                        cnt += 1;
                        s += self.buf[k].2;
                        k += 1;
                    }
                    (v, cnt, s)
                } else {
                    break;
                };
                if let Some(p) = prev {
                    let right_n = n - left_n;
                    if left_n >= min_leaf && right_n >= min_leaf {
                        let right_sum = sum - left_sum;
                        let gain = left_sum * left_sum / left_n as f64
                            + right_sum * right_sum / right_n as f64
                            - parent_score;
                        if gain > best.map_or(MIN_GAIN, |b| b.gain.max(MIN_GAIN)) {
                            best = Some(Candidate {
                                feature,
                                threshold: p + (value - p) / 2.0,
                                gain,
                            });
                        }
                    }
                }
                left_n += cnt;
                left_sum += s;
                prev = Some(value);
            }
        }
        best
    }
}
