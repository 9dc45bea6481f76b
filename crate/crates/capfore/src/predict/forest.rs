//! Random forest regression: CART trees on bootstrap samples with
//! per-node feature subsetting; the prediction is the mean of tree leaf
//! means.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeConfig};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Fraction(f64),
    Sqrt,
}

impl MaxFeatures {
    fn count(&self, width: usize) -> usize {
        let m = match self {
            MaxFeatures::Fraction(f) => (f * width as f64).round() as usize,
            MaxFeatures::Sqrt => (width as f64).sqrt().round() as usize,
        };
        m.clamp(1, width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    /// Sample fraction per tree. Below 1.0 each tree draws
    /// `round(max_samples * n)` rows with replacement; at 1.0 every tree
    /// sees the full training set exactly once.
    pub max_samples: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Fraction(1.0),
            max_samples: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    pub seed: u64,
}

/// Fit the ensemble. Trees get independent sub-seeds, so they can be
/// grown in parallel with a deterministic result.
pub fn fit_forest(x: &[Vec<f64>], y: &[f64], params: &ForestParams, seed_val: u64) -> Result<ForestModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("empty training set".into()));
    }
    if params.n_estimators == 0 {
        return Err(Error::InvalidHyperparam("forest needs at least one tree".into()));
    }
    let n = x.len();
    let width = x[0].len();
    let config = TreeConfig {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        min_samples_leaf: params.min_samples_leaf,
        min_gain: 0.0,
        n_candidate_features: params.max_features.count(width),
    };

    let trees: Vec<RegressionTree> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed_val, &format!("rf-tree-{t}")));
            let rows: Vec<usize> = if params.max_samples >= 1.0 {
                (0..n).collect()
            } else {
                let n_boot = ((params.max_samples * n as f64).round() as usize).clamp(1, n);
                (0..n_boot).map(|_| rng.gen_range(0..n)).collect()
            };
            RegressionTree::fit(x, y, &rows, &config, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        trees,
        seed: seed_val,
    })
}

impl ForestModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<f64>) {
        let x = vec![
            vec![0.0, 3.0],
            vec![1.0, 1.0],
            vec![2.0, 4.0],
            vec![3.0, 1.5],
            vec![4.0, 0.5],
        ];
        let y = vec![0.15, 0.9, 0.35, 0.7, 0.55];
        (x, y)
    }

    #[test]
    fn single_full_tree_memorizes_five_distinct_rows() {
        let (x, y) = toy();
        let params = ForestParams {
            n_estimators: 1,
            ..ForestParams::default()
        };
        let model = fit_forest(&x, &y, &params, 0).unwrap();
        for (row, target) in x.iter().zip(&y) {
            assert_eq!(model.predict_row(row), *target);
        }
    }

    #[test]
    fn predictions_stay_within_target_range() {
        let (x, y) = toy();
        let params = ForestParams {
            n_estimators: 30,
            max_features: MaxFeatures::Sqrt,
            max_samples: 0.8,
            ..ForestParams::default()
        };
        let model = fit_forest(&x, &y, &params, 3).unwrap();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for probe in [&[10.0, -5.0][..], &[-3.0, 2.0][..], &[2.5, 2.5][..]] {
            let p = model.predict_row(probe);
            assert!(p >= lo && p <= hi);
        }
    }

    #[test]
    fn same_seed_same_model() {
        let (x, y) = toy();
        let params = ForestParams {
            n_estimators: 10,
            max_samples: 0.8,
            ..ForestParams::default()
        };
        let a = fit_forest(&x, &y, &params, 11).unwrap();
        let b = fit_forest(&x, &y, &params, 11).unwrap();
        assert_eq!(a, b);
        let c = fit_forest(&x, &y, &params, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert!(fit_forest(&[], &[], &ForestParams::default(), 0).is_err());
    }
}
