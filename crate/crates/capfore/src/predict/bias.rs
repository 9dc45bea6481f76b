//! The matrix-completion view of the data and the model + task bias
//! baseline `ŷ = μ + b_u + b_i`.
//!
//! A "user" u is a model (family, n_param); an "item" i is an n-shot task
//! (task, n_shot). The baseline is fit by alternating closed-form updates:
//! each block of parameters has an exact least-squares update given the
//! others, so sweeps converge quickly and deterministically.

use serde::{Deserialize, Serialize};

use crate::record::{ExperimentRecord, RecordSet};
use crate::{Error, Result};

pub type UserKey = (String, u64);
pub type ItemKey = (String, u32);

/// Training records re-indexed as (user, item, score) triples with
/// per-user and per-item row lists. Row order follows the training index
/// order, so accumulation order is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interactions {
    pub users: Vec<UserKey>,
    pub items: Vec<ItemKey>,
    pub user_of_row: Vec<usize>,
    pub item_of_row: Vec<usize>,
    pub y: Vec<f64>,
    pub user_rows: Vec<Vec<usize>>,
    pub item_rows: Vec<Vec<usize>>,
}

impl Interactions {
    pub fn from_fold(set: &RecordSet, train: &[usize]) -> Result<Interactions> {
        if train.is_empty() {
            return Err(Error::EmptyInput("empty training set".into()));
        }
        let mut users: Vec<UserKey> = train
            .iter()
            .map(|&i| {
                let r = &set.records[i];
                (r.model_family.clone(), r.n_param_total)
            })
            .collect();
        users.sort();
        users.dedup();
        let mut items: Vec<ItemKey> = train
            .iter()
            .map(|&i| {
                let r = &set.records[i];
                (r.task.clone(), r.n_shot)
            })
            .collect();
        items.sort();
        items.dedup();

        let mut user_of_row = Vec::with_capacity(train.len());
        let mut item_of_row = Vec::with_capacity(train.len());
        let mut y = Vec::with_capacity(train.len());
        let mut user_rows = vec![Vec::new(); users.len()];
        let mut item_rows = vec![Vec::new(); items.len()];
        for (row, &idx) in train.iter().enumerate() {
            let r = &set.records[idx];
            let u = users
                .binary_search(&(r.model_family.clone(), r.n_param_total))
                .unwrap();
            let i = items.binary_search(&(r.task.clone(), r.n_shot)).unwrap();
            user_of_row.push(u);
            item_of_row.push(i);
            y.push(r.score_norm);
            user_rows[u].push(row);
            item_rows[i].push(row);
        }
        Ok(Interactions {
            users,
            items,
            user_of_row,
            item_of_row,
            y,
            user_rows,
            item_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn user_index(&self, rec: &ExperimentRecord) -> Option<usize> {
        self.users
            .binary_search_by(|(f, p)| {
                f.as_str()
                    .cmp(rec.model_family.as_str())
                    .then(p.cmp(&rec.n_param_total))
            })
            .ok()
    }

    pub fn item_index(&self, rec: &ExperimentRecord) -> Option<usize> {
        self.items
            .binary_search_by(|(t, s)| t.as_str().cmp(rec.task.as_str()).then(s.cmp(&rec.n_shot)))
            .ok()
    }
}

pub(crate) fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            tol: 1e-8,
            max_sweeps: 200,
        }
    }
}

/// Fitted bias model. Users or items unseen in training contribute zero
/// bias at predict time; predictions are clamped to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasModel {
    pub mu: f64,
    pub users: Vec<UserKey>,
    pub user_bias: Vec<f64>,
    pub items: Vec<ItemKey>,
    pub item_bias: Vec<f64>,
    pub seed: u64,
    pub sweeps_run: usize,
}

/// Minimize the train MSE of `μ + b_u + b_i` by alternating exact
/// per-block updates until the largest parameter change drops below
/// `tol` or `max_sweeps` sweeps have run.
pub fn fit_baseline(
    set: &RecordSet,
    train: &[usize],
    params: &BaselineParams,
    seed: u64,
) -> Result<BiasModel> {
    let inter = Interactions::from_fold(set, train)?;
    let n = inter.n_rows() as f64;
    let mut mu = inter.y.iter().sum::<f64>() / n;
    let mut bu = vec![0.0; inter.users.len()];
    let mut bi = vec![0.0; inter.items.len()];

    let mut sweeps_run = 0;
    for sweep in 0..params.max_sweeps {
        sweeps_run = sweep + 1;
        let mut max_delta: f64 = 0.0;

        let residual_mu: f64 = (0..inter.n_rows())
            .map(|r| inter.y[r] - bu[inter.user_of_row[r]] - bi[inter.item_of_row[r]])
            .sum::<f64>()
            / n;
        max_delta = max_delta.max((residual_mu - mu).abs());
        mu = residual_mu;

        for (u, rows) in inter.user_rows.iter().enumerate() {
            let mean = rows
                .iter()
                .map(|&r| inter.y[r] - mu - bi[inter.item_of_row[r]])
                .sum::<f64>()
                / rows.len() as f64;
            max_delta = max_delta.max((mean - bu[u]).abs());
            bu[u] = mean;
        }

        for (i, rows) in inter.item_rows.iter().enumerate() {
            let mean = rows
                .iter()
                .map(|&r| inter.y[r] - mu - bu[inter.user_of_row[r]])
                .sum::<f64>()
                / rows.len() as f64;
            max_delta = max_delta.max((mean - bi[i]).abs());
            bi[i] = mean;
        }

        if max_delta < params.tol {
            break;
        }
    }

    Ok(BiasModel {
        mu,
        users: inter.users,
        user_bias: bu,
        items: inter.items,
        item_bias: bi,
        seed,
        sweeps_run,
    })
}

impl BiasModel {
    pub fn predict(&self, rec: &ExperimentRecord) -> f64 {
        let bu = self
            .users
            .binary_search_by(|(f, p)| {
                f.as_str()
                    .cmp(rec.model_family.as_str())
                    .then(p.cmp(&rec.n_param_total))
            })
            .map(|u| self.user_bias[u])
            .unwrap_or(0.0);
        let bi = self
            .items
            .binary_search_by(|(t, s)| {
                t.as_str().cmp(rec.task.as_str()).then(s.cmp(&rec.n_shot))
            })
            .map(|i| self.item_bias[i])
            .unwrap_or(0.0);
        clamp01(self.mu + bu + bi)
    }

    /// Train mean squared error of the unclamped bias model; used by the
    /// optimality property test.
    pub fn train_mse(&self, set: &RecordSet, train: &[usize]) -> f64 {
        let mut sse = 0.0;
        for &idx in train {
            let r = &set.records[idx];
            let u = self
                .users
                .binary_search(&(r.model_family.clone(), r.n_param_total))
                .unwrap();
            let i = self
                .items
                .binary_search(&(r.task.clone(), r.n_shot))
                .unwrap();
            let pred = self.mu + self.user_bias[u] + self.item_bias[i];
            sse += (pred - r.score_norm) * (pred - r.score_norm);
        }
        sse / train.len() as f64
    }
}
