//! CART regression trees with squared-error splits, shared by the random
//! forest and the gradient-boosted ensemble.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Minimum squared-error reduction (sum form) required to split; the
    /// boosted ensemble passes its gamma here.
    pub min_gain: f64,
    /// Features examined per node. When below the total width a fresh
    /// uniform subset is drawn at every node.
    pub n_candidate_features: usize,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Best squared-error split over the candidate features. Ties break to
/// the lowest feature index, then the lowest threshold: features are
/// scanned in ascending index order, thresholds in ascending value order,
/// and only strictly better gains replace the incumbent.
fn best_split(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitChoice> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&r| y[r]).sum();

    let mut best: Option<SplitChoice> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (x[r][f], y[r])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += pairs[i].1;
            if pairs[i].0 == pairs[i + 1].0 {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_samples_leaf || n_right < min_samples_leaf {
                continue;
            }
            // SSE reduction in its numerically stable form:
            // gain = nL·nR/n · (meanL − meanR)², never negative.
            let mean_left = left_sum / n_left as f64;
            let mean_right = (total - left_sum) / n_right as f64;
            let diff = mean_left - mean_right;
            let gain = (n_left as f64) * (n_right as f64) / n as f64 * diff * diff;
            if best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: (pairs[i].0 + pairs[i + 1].0) / 2.0,
                    gain,
                });
            }
        }
    }
    best
}

impl RegressionTree {
    /// Grow a tree on the given rows (duplicates allowed, as produced by
    /// bootstrap sampling). Row indices refer into `x`/`y`.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        rows: &[usize],
        config: &TreeConfig,
        rng: &mut ChaCha8Rng,
    ) -> RegressionTree {
        let mut tree = RegressionTree { nodes: Vec::new() };
        tree.grow(x, y, rows, config, rng, 0);
        tree
    }

    fn grow(
        &mut self,
        x: &[Vec<f64>],
        y: &[f64],
        rows: &[usize],
        config: &TreeConfig,
        rng: &mut ChaCha8Rng,
        depth: usize,
    ) -> usize {
        let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
        let leaf = |nodes: &mut Vec<TreeNode>| {
            nodes.push(TreeNode::Leaf { value: mean });
            nodes.len() - 1
        };

        let constant = rows.iter().all(|&r| y[r] == y[rows[0]]);
        if constant
            || rows.len() < config.min_samples_split
            || config.max_depth.is_some_and(|d| depth >= d)
        {
            return leaf(&mut self.nodes);
        }

        let width = x[0].len();
        let features: Vec<usize> = if config.n_candidate_features >= width {
            (0..width).collect()
        } else {
            let mut sampled =
                rand::seq::index::sample(rng, width, config.n_candidate_features).into_vec();
            sampled.sort_unstable();
            sampled
        };

        let Some(split) = best_split(x, y, rows, &features, config.min_samples_leaf) else {
            return leaf(&mut self.nodes);
        };
        if split.gain <= config.min_gain {
            return leaf(&mut self.nodes);
        }

        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        for &r in rows {
            if x[r][split.feature] <= split.threshold {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        if left_rows.is_empty() || right_rows.is_empty() {
            return leaf(&mut self.nodes);
        }

        let node = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: mean }); // placeholder
        let left = self.grow(x, y, &left_rows, config, rng, depth + 1);
        let right = self.grow(x, y, &right_rows, config, rng, depth + 1);
        self.nodes[node] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        node
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        // The root is node 0 when the tree is non-trivial; a pure-leaf
        // tree also stores it at 0.
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}
