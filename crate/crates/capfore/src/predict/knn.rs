//! Neighborhood models over the user-item matrix. The model axis finds
//! the k models most similar to the query's model and averages their
//! scores on the query item; the task axis is symmetric over n-shot tasks.
//!
//! Similarity is Pearson correlation over co-rated entries with a minimum
//! overlap; negative similarities get zero weight. When no neighbor
//! qualifies the prediction falls back item mean → user mean → global
//! mean, so predictions are total.

use serde::{Deserialize, Serialize};

use super::bias::{Interactions, ItemKey, UserKey};
use crate::metrics::pearson;
use crate::record::{ExperimentRecord, RecordSet};
use crate::{Error, Result};

/// Sorted (index, score) pairs; the map form of a user's or item's
/// ratings, kept as a vec so models serialize to plain JSON.
type Ratings = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnAxis {
    Model,
    Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub min_overlap: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 10,
            min_overlap: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub axis: KnnAxis,
    pub k: usize,
    pub min_overlap: usize,
    pub seed: u64,
    users: Vec<UserKey>,
    items: Vec<ItemKey>,
    /// item -> score, per user.
    user_ratings: Vec<Ratings>,
    /// user -> score, per item.
    item_ratings: Vec<Ratings>,
    global_mean: f64,
}

pub fn fit_knn(
    set: &RecordSet,
    train: &[usize],
    axis: KnnAxis,
    params: &KnnParams,
    seed: u64,
) -> Result<KnnModel> {
    if params.k < 1 {
        return Err(Error::InvalidHyperparam("knn needs k >= 1".into()));
    }
    let inter = Interactions::from_fold(set, train)?;
    let mut user_ratings: Vec<Ratings> = vec![Vec::new(); inter.users.len()];
    let mut item_ratings: Vec<Ratings> = vec![Vec::new(); inter.items.len()];
    for row in 0..inter.n_rows() {
        let u = inter.user_of_row[row];
        let i = inter.item_of_row[row];
        user_ratings[u].push((i, inter.y[row]));
        item_ratings[i].push((u, inter.y[row]));
    }
    for r in user_ratings.iter_mut().chain(item_ratings.iter_mut()) {
        r.sort_by_key(|(k, _)| *k);
    }
    let global_mean = inter.y.iter().sum::<f64>() / inter.n_rows() as f64;
    Ok(KnnModel {
        axis,
        k: params.k,
        min_overlap: params.min_overlap,
        seed,
        users: inter.users,
        items: inter.items,
        user_ratings,
        item_ratings,
        global_mean,
    })
}

/// Pearson similarity over the co-rated entries of two rating maps, or
/// `None` if the overlap is below `min_overlap` or the correlation is
/// undefined.
fn co_rating_similarity(a: &Ratings, b: &Ratings, min_overlap: usize) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                xs.push(a[i].1);
                ys.push(b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    if xs.len() < min_overlap {
        return None;
    }
    pearson(&xs, &ys)
}

impl KnnModel {
    fn user_index(&self, rec: &ExperimentRecord) -> Option<usize> {
        self.users
            .binary_search_by(|(f, p)| {
                f.as_str()
                    .cmp(rec.model_family.as_str())
                    .then(p.cmp(&rec.n_param_total))
            })
            .ok()
    }

    fn item_index(&self, rec: &ExperimentRecord) -> Option<usize> {
        self.items
            .binary_search_by(|(t, s)| {
                t.as_str().cmp(rec.task.as_str()).then(s.cmp(&rec.n_shot))
            })
            .ok()
    }

    fn mean(values: &Ratings) -> Option<f64> {
        if values.is_empty() {
            None
        } else {
            Some(values.iter().map(|(_, v)| v).sum::<f64>() / values.len() as f64)
        }
    }

    fn fallback(&self, user: Option<usize>, item: Option<usize>) -> f64 {
        item.and_then(|i| Self::mean(&self.item_ratings[i]))
            .or_else(|| user.and_then(|u| Self::mean(&self.user_ratings[u])))
            .unwrap_or(self.global_mean)
    }

    /// The k most similar qualified neighbors as (index, similarity,
    /// score) triples, most similar first; index breaks ties. For the
    /// model axis the candidates are the other users who rated item `i`;
    /// for the task axis, the other items user `u` rated.
    fn ranked_neighbors(&self, u: usize, i: usize) -> Vec<(usize, f64, f64)> {
        let mut scored: Vec<(usize, f64, f64)> = match self.axis {
            KnnAxis::Model => self.item_ratings[i]
                .iter()
                .filter(|&&(v, _)| v != u)
                .filter_map(|&(v, score)| {
                    co_rating_similarity(
                        &self.user_ratings[u],
                        &self.user_ratings[v],
                        self.min_overlap,
                    )
                    .map(|sim| (v, sim, score))
                })
                .collect(),
            KnnAxis::Task => self.user_ratings[u]
                .iter()
                .filter(|&&(j, _)| j != i)
                .filter_map(|&(j, score)| {
                    co_rating_similarity(
                        &self.item_ratings[i],
                        &self.item_ratings[j],
                        self.min_overlap,
                    )
                    .map(|sim| (j, sim, score))
                })
                .collect(),
        };
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(self.k);
        scored
    }

    pub fn predict(&self, rec: &ExperimentRecord) -> f64 {
        let user = self.user_index(rec);
        let item = self.item_index(rec);
        let (u, i) = match (user, item) {
            (Some(u), Some(i)) => (u, i),
            _ => return self.fallback(user, item),
        };

        let mut num = 0.0;
        let mut den = 0.0;
        for &(_, sim, score) in &self.ranked_neighbors(u, i) {
            let w = sim.max(0.0);
            num += w * score;
            den += w;
        }
        if den > 0.0 {
            num / den
        } else {
            self.fallback(user, item)
        }
    }

    /// The neighbor scores a query would average over, for tests.
    #[cfg(test)]
    fn neighbor_scores(&self, rec: &ExperimentRecord) -> Vec<f64> {
        let (u, i) = match (self.user_index(rec), self.item_index(rec)) {
            (Some(u), Some(i)) => (u, i),
            _ => return Vec::new(),
        };
        self.ranked_neighbors(u, i)
            .into_iter()
            .filter(|&(_, sim, _)| sim > 0.0)
            .map(|(_, _, s)| s)
            .collect()
    }
}
