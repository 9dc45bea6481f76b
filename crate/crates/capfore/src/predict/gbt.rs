//! Gradient-boosted trees for squared error: stagewise additive CART
//! trees fit to residuals, with a minimum-gain split threshold (gamma) and
//! per-tree row subsampling. The prediction is the initial mean plus the
//! learning-rate-scaled sum of tree outputs.

use rayon::iter::{IntoParallelIterator, ParallelIterator};
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeConfig};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
    /// Minimum squared-error reduction required to split.
    pub gamma: f64,
    /// Row fraction drawn (without replacement) per boosting stage.
    pub subsample: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: Some(16),
            gamma: 0.0,
            subsample: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Train MSE after each boosting stage.
    pub train_loss: Vec<f64>,
    pub seed: u64,
}

pub fn fit_gbt(x: &[Vec<f64>], y: &[f64], params: &GbtParams, seed_val: u64) -> Result<GbtModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("empty training set".into()));
    }
    if params.learning_rate <= 0.0 {
        return Err(Error::InvalidHyperparam(format!(
            "gbt learning rate must be positive, got {}",
            params.learning_rate
        )));
    }
    let n = x.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let config = TreeConfig {
        max_depth: params.max_depth,
        min_samples_split: 2,
        min_samples_leaf: 1,
        min_gain: params.gamma,
        n_candidate_features: usize::MAX,
    };

    let mut preds = vec![base; n];
    let mut residuals: Vec<f64> = y.iter().zip(&preds).map(|(t, p)| t - p).collect();
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut train_loss = Vec::with_capacity(params.n_estimators);

    for stage in 0..params.n_estimators {
        let mut rng = seed::rng(seed::derive(seed_val, &format!("gbt-stage-{stage}")));
        let rows: Vec<usize> = if params.subsample >= 1.0 {
            (0..n).collect()
        } else {
            let m = ((params.subsample * n as f64).round() as usize).clamp(1, n);
            let mut sampled = rand::seq::index::sample(&mut rng, n, m).into_vec();
            sampled.sort_unstable();
            sampled
        };
        let tree = RegressionTree::fit(x, &residuals, &rows, &config, &mut rng);
        for r in 0..n {
            preds[r] += params.learning_rate * tree.predict_row(&x[r]);
            residuals[r] = y[r] - preds[r];
        }
        let mse = residuals.iter().map(|r| r * r).sum::<f64>() / n as f64;
        train_loss.push(mse);
        trees.push(tree);
    }

    Ok(GbtModel {
        base,
        learning_rate: params.learning_rate,
        trees,
        train_loss,
        seed: seed_val,
    })
}

impl GbtModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict_row(row))
                    .sum::<f64>()
    }

    /// Batch prediction; trees are walked in parallel per row.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        (0..rows.len())
            .into_par_iter()
            .map(|i| self.predict_row(&rows[i]))
            .collect()
    }
}
