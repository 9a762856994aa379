// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Prediction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until every leaf is pure.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    /// Candidate features per node; `None` means floor(sqrt(d)).
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: Some(16), bootstrap: true, max_features: None }
    }
}

impl ForestParams {
    pub fn candidates(&self, d: usize) -> usize {
        self.max_features.unwrap_or(((d as f64).sqrt().floor() as usize).max(1)).clamp(1, d.max(1))
    }
}

/// A split node has `feature`, `threshold`, `left` and `right`; a leaf has
/// none of them. `counts` holds the (negative, positive) training weight
/// that reached the node. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeNode {
    pub counts: [u64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<Box<TreeNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<Box<TreeNode>>,
}

impl TreeNode {
    fn leaf(counts: [u64; 2]) -> Self {
        TreeNode { counts, feature: None, threshold: None, left: None, right: None }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }

    pub fn positive_fraction(&self) -> f64 {
        let n = self.counts[0] + self.counts[1];
        if n == 0 {
            0.0
        } else {
            self.counts[1] as f64 / n as f64
        }
    }

    pub fn leaf_for(&self, z: &[f64]) -> &TreeNode {
        let mut node = self;
        while let (Some(f), Some(t), Some(l), Some(r)) =
            (node.feature, node.threshold, &node.left, &node.right)
        {
            node = if z[f] <= t { l } else { r };
        }
        node
    }

    pub fn depth(&self) -> usize {
        match (&self.left, &self.right) {
            (Some(l), Some(r)) => 1 + l.depth().max(r.depth()),
            _ => 0,
        }
    }

    /// Structural check used when loading a model file.
    pub fn check(&self, d: usize) -> Result<(), String> {
        match (self.feature, self.threshold, &self.left, &self.right) {
            (None, None, None, None) => Ok(()),
            (Some(f), Some(t), Some(l), Some(r)) => {
                if f >= d {
                    return Err(format!("split feature {f} out of range for dimension {d}"));
                }
                if !t.is_finite() {
                    return Err("non-finite split threshold".into());
                }
                l.check(d)?;
                r.check(d)
            }
            _ => Err("tree node must be either a full split or a leaf".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
}

impl ForestModel {
    /// Score is the mean leaf positive fraction; label is `score > 0.5`.
    pub fn predict(&self, z: &[f64]) -> Prediction {
        let score = self.trees.iter().map(|t| t.leaf_for(z).positive_fraction()).sum::<f64>()
            / self.trees.len() as f64;
        Prediction { label: (score > 0.5) as u8, score }
    }
}

struct Builder<'a> {
    cols: Vec<Vec<f64>>,
    labels: &'a [u8],
    max_depth: Option<usize>,
    candidates: usize,
    scratch: Vec<(f64, u8)>,
    order: Vec<usize>,
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [u64; 2] {
        let pos = idx.iter().filter(|&&i| self.labels[i] == 1).count() as u64;
        [idx.len() as u64 - pos, pos]
    }

    fn evaluate_feature(&mut self, f: usize, idx: &[usize], counts: [u64; 2], best: &mut Option<BestSplit>) -> bool {
        let col = &self.cols[f];
        self.scratch.clear();
        self.scratch.extend(idx.iter().map(|&i| (col[i], self.labels[i])));
        self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let v = &self.scratch;
        if v[0].0 == v[v.len() - 1].0 {
            return false;
        }
        let n = v.len();
        let (mut l0, mut l1) = (0f64, 0f64);
        let (t0, t1) = (counts[0] as f64, counts[1] as f64);
        for k in 0..n - 1 {
            if v[k].1 == 1 {
                l1 += 1.0;
            } else {
                l0 += 1.0;
            }
            if v[k].0 == v[k + 1].0 {
                continue;
            }
            let (r0, r1) = (t0 - l0, t1 - l1);
            // maximising this minimises the weighted child Gini impurity
            let score = (l0 * l0 + l1 * l1) / (l0 + l1) + (r0 * r0 + r1 * r1) / (r0 + r1);
            if best.as_ref().map_or(true, |b| score > b.score) {
                let (a, b) = (v[k].0, v[k + 1].0);
                let mut threshold = 0.5 * (a + b);
                if !(threshold >= a && threshold < b) {
                    threshold = a;
                }
                *best = Some(BestSplit { score, feature: f, threshold });
            }
        }
        true
    }

    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        let counts = self.counts(idx);
        if counts[0] == 0 || counts[1] == 0 || self.max_depth.is_some_and(|m| depth >= m) {
            return TreeNode::leaf(counts);
        }
        let d = self.cols.len();
        let mut best = None;
        let mut evaluated = 0;
        // draw features without replacement; constant ones do not count
        // towards the candidate budget
        for t in 0..d {
            let j = rng.gen_range(t..d);
            self.order.swap(t, j);
            let f = self.order[t];
            if self.evaluate_feature(f, idx, counts, &mut best) {
                evaluated += 1;
                if evaluated == self.candidates {
                    break;
                }
            }
        }
        let Some(BestSplit { feature, threshold, .. }) = best else {
            return TreeNode::leaf(counts);
        };
        let col = &self.cols[feature];
        let mut split = 0;
        for k in 0..idx.len() {
            if col[idx[k]] <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (li, ri) = idx.split_at_mut(split);
        let left = self.build(li, depth + 1, rng);
        let right = self.build(ri, depth + 1, rng);
        TreeNode {
            counts,
            feature: Some(feature),
            threshold: Some(threshold),
            left: Some(Box::new(left)),
            right: Some(Box::new(right)),
        }
    }
}

/// `rows` are already standardized; labels must contain both classes.
pub fn fit_forest(rows: &[Vec<f64>], labels: &[u8], params: &ForestParams, rng: &mut ChaCha8Rng) -> ForestModel {
    let n = rows.len();
    let d = rows[0].len();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut b = Builder {
        cols,
        labels,
        max_depth: params.max_depth,
        candidates: params.candidates(d),
        scratch: Vec::with_capacity(n),
        order: (0..d).collect(),
    };
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let mut idx: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        // node feature draws start from a fresh order for every tree
        b.order = (0..d).collect();
        b.order.shuffle(rng);
        trees.push(b.build(&mut idx, 0, rng));
    }
    ForestModel { trees }
}
