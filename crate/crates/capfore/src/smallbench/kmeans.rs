//! Seeded k-means over task embeddings and the two clustering-based
//! subset constructions: pick each cluster's member closest to its
//! centroid, optionally restricted to globally high-value tasks.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SubsetCandidate, TaskValueTable};
use crate::predict::TaskEmbedding;
use crate::{seed, Error, Result};

const MAX_LLOYD_ITERS: usize = 100;
const DEFAULT_RESTARTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sse: f64,
    /// Within-cluster SSE after every Lloyd iteration; non-increasing.
    pub sse_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Distance-weighted (k-means++-style) seeding.
fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut draw = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                draw -= d;
                if draw <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining points coincide with a centroid.
            rng.gen_range(0..points.len())
        };
        centroids.push(points[next].clone());
    }
    centroids
}

/// One seeded k-means run: distance-weighted seeding plus Lloyd updates.
/// Empty clusters are refilled with the farthest point of the largest
/// cluster, keeping k clusters without a restart.
pub fn lloyd_kmeans(points: &[Vec<f64>], k: usize, seed_val: u64) -> Result<KmeansResult> {
    if points.is_empty() || k == 0 || k > points.len() {
        return Err(Error::InvalidConfig(format!(
            "k-means needs 1 <= k <= n, got k={k}, n={}",
            points.len()
        )));
    }
    let dim = points[0].len();
    let mut rng = seed::rng(seed_val);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignments = vec![0usize; points.len()];
    let mut sse_history = Vec::new();

    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(p, &centroids);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let largest = (0..k).max_by_key(|&c| counts[c]).unwrap();
            let farthest = (0..points.len())
                .filter(|&i| assignments[i] == largest)
                .max_by(|&a, &b| {
                    sq_dist(&points[a], &centroids[largest])
                        .total_cmp(&sq_dist(&points[b], &centroids[largest]))
                })
                .unwrap();
            assignments[farthest] = empty;
            counts[largest] -= 1;
            counts[empty] += 1;
            changed = true;
        }

        for (c, centroid) in centroids.iter_mut().enumerate() {
            if counts[c] == 0 {
                continue;
            }
            let mut mean = vec![0.0; dim];
            for (i, p) in points.iter().enumerate() {
                if assignments[i] == c {
                    for (m, v) in mean.iter_mut().zip(p) {
                        *m += v;
                    }
                }
            }
            for m in mean.iter_mut() {
                *m /= counts[c] as f64;
            }
            *centroid = mean;
        }

        let sse: f64 = points
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| sq_dist(p, &centroids[a]))
            .sum();
        sse_history.push(sse);
        if !changed {
            break;
        }
    }

    let sse = *sse_history.last().unwrap();
    Ok(KmeansResult {
        assignments,
        centroids,
        sse,
        sse_history,
    })
}

fn best_of_restarts(points: &[Vec<f64>], k: usize, seed_val: u64) -> Result<KmeansResult> {
    let mut best: Option<KmeansResult> = None;
    for r in 0..DEFAULT_RESTARTS {
        let run = lloyd_kmeans(points, k, seed::derive(seed_val, &format!("kmeans-restart-{r}")))?;
        if best.as_ref().map_or(true, |b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

fn embedding_points(embeddings: &TaskEmbedding) -> (Vec<String>, Vec<Vec<f64>>) {
    let tasks: Vec<String> = embeddings.keys().cloned().collect();
    let points: Vec<Vec<f64>> = embeddings.values().cloned().collect();
    (tasks, points)
}

/// Per-cluster member lists in cluster order, each sorted by task name.
fn cluster_members(assignments: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        members[a].push(i);
    }
    members
}

fn closest_member(
    candidates: &[usize],
    points: &[Vec<f64>],
    tasks: &[String],
    centroid: &[f64],
) -> usize {
    *candidates
        .iter()
        .min_by(|&&a, &&b| {
            sq_dist(&points[a], centroid)
                .total_cmp(&sq_dist(&points[b], centroid))
                .then(tasks[a].cmp(&tasks[b]))
        })
        .unwrap()
}

/// Cluster the task embeddings into b groups (5 seeded restarts, lowest
/// SSE kept) and select each cluster's task closest to its centroid.
pub fn kmeans_select(embeddings: &TaskEmbedding, b: usize, seed_val: u64) -> Result<SubsetCandidate> {
    let (tasks, points) = embedding_points(embeddings);
    let run = best_of_restarts(&points, b, seed_val)?;
    let mut selected = BTreeSet::new();
    for (c, members) in cluster_members(&run.assignments, b).iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let pick = closest_member(members, &points, &tasks, &run.centroids[c]);
        selected.insert(tasks[pick].clone());
    }
    debug_assert_eq!(selected.len(), b);
    Ok(SubsetCandidate::new(selected))
}

/// `kmeans_select` with the per-cluster choice restricted to tasks in the
/// global top quarter by task value; clusters with no eligible member fall
/// back to their unrestricted pick and are flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSelection {
    pub candidate: SubsetCandidate,
    pub fallback_tasks: Vec<String>,
}

pub fn kmeans_value_select(
    embeddings: &TaskEmbedding,
    values: &TaskValueTable,
    b: usize,
    seed_val: u64,
) -> Result<ValueSelection> {
    if values.len() < b {
        return Err(Error::InvalidConfig(format!(
            "task-value table covers {} tasks, budget is {b}",
            values.len()
        )));
    }
    let (tasks, points) = embedding_points(embeddings);

    // Top 25% globally by value, ties broken by task id.
    let mut ranked: Vec<(&String, f64)> = values.iter().map(|(t, v)| (t, v.value)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    let top_n = (values.len() as f64 * 0.25).ceil() as usize;
    let eligible: BTreeSet<&String> = ranked.iter().take(top_n).map(|(t, _)| *t).collect();

    let run = best_of_restarts(&points, b, seed_val)?;
    let mut selected = BTreeSet::new();
    let mut fallback_tasks = Vec::new();
    for (c, members) in cluster_members(&run.assignments, b).iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let valuable: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| eligible.contains(&tasks[i]))
            .collect();
        let pick = if valuable.is_empty() {
            let pick = closest_member(members, &points, &tasks, &run.centroids[c]);
            fallback_tasks.push(tasks[pick].clone());
            pick
        } else {
            closest_member(&valuable, &points, &tasks, &run.centroids[c])
        };
        selected.insert(tasks[pick].clone());
    }
    Ok(ValueSelection {
        candidate: SubsetCandidate::new(selected),
        fallback_tasks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smallbench::TaskValue;
    use rand::Rng;

    fn planted_embeddings(per_cluster: usize, spread: f64) -> TaskEmbedding {
        let centers = [[0.0, 0.0], [10.0, 10.0]];
        let mut rng = seed::rng(42);
        let mut out = TaskEmbedding::new();
        for (c, center) in centers.iter().enumerate() {
            for i in 0..per_cluster {
                let v = vec![
                    center[0] + rng.gen_range(-spread..spread),
                    center[1] + rng.gen_range(-spread..spread),
                ];
                out.insert(format!("c{c}_t{i}"), v);
            }
        }
        out
    }

    #[test]
    fn budget_equal_to_task_count_selects_every_task() {
        let emb = planted_embeddings(3, 0.5);
        let cand = kmeans_select(&emb, 6, 0).unwrap();
        assert_eq!(cand.budget(), 6);
        let all: BTreeSet<String> = emb.keys().cloned().collect();
        assert_eq!(cand.tasks, all);
    }

    #[test]
    fn two_planted_clusters_give_one_pick_each() {
        let emb = planted_embeddings(5, 0.5);
        let cand = kmeans_select(&emb, 2, 7).unwrap();
        assert_eq!(cand.budget(), 2);
        let sides: BTreeSet<char> = cand.tasks.iter().map(|t| t.chars().nth(1).unwrap()).collect();
        assert_eq!(sides, BTreeSet::from(['0', '1']));
    }

    #[test]
    fn lloyd_sse_is_non_increasing() {
        let emb = planted_embeddings(8, 3.0);
        let points: Vec<Vec<f64>> = emb.values().cloned().collect();
        for s in 0..5 {
            let run = lloyd_kmeans(&points, 3, s).unwrap();
            for w in run.sse_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "sse rose: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn equal_values_reduce_value_select_to_plain_kmeans() {
        let emb = planted_embeddings(5, 0.5);
        let values: TaskValueTable = emb
            .keys()
            .map(|t| {
                (
                    t.clone(),
                    TaskValue {
                        value: 0.5,
                        support: 3,
                    },
                )
            })
            .collect();
        let plain = kmeans_select(&emb, 2, 11).unwrap();
        let valued = kmeans_value_select(&emb, &values, 2, 11).unwrap();
        // With all values tied, the top-25% cut keeps the lexicographically
        // first quarter, which may exclude a cluster entirely; every pick
        // is then either eligible or a flagged fallback equal to the plain
        // pick.
        for task in &valued.candidate.tasks {
            assert!(
                plain.tasks.contains(task) || valued.fallback_tasks.contains(task),
                "unexpected pick {task}"
            );
        }
        assert_eq!(valued.candidate.budget(), 2);
    }

    #[test]
    fn high_value_tasks_win_their_clusters() {
        let emb = planted_embeddings(4, 0.5);
        // One planted high-value task per cluster; everything else low.
        let mut values = TaskValueTable::new();
        for t in emb.keys() {
            let v = if t == "c0_t2" || t == "c1_t3" { 0.9 } else { 0.1 };
            values.insert(
                t.clone(),
                TaskValue {
                    value: v,
                    support: 5,
                },
            );
        }
        let sel = kmeans_value_select(&emb, &values, 2, 3).unwrap();
        assert_eq!(
            sel.candidate.tasks,
            BTreeSet::from(["c0_t2".to_string(), "c1_t3".to_string()])
        );
        assert!(sel.fallback_tasks.is_empty());
    }

    #[test]
    fn every_pick_is_top_quarter_or_flagged() {
        let emb = planted_embeddings(8, 4.0);
        let mut rng = seed::rng(17);
        let values: TaskValueTable = emb
            .keys()
            .map(|t| {
                (
                    t.clone(),
                    TaskValue {
                        value: rng.gen(),
                        support: 1,
                    },
                )
            })
            .collect();
        let mut ranked: Vec<(&String, f64)> = values.iter().map(|(t, v)| (t, v.value)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let top_n = (values.len() as f64 * 0.25).ceil() as usize;
        let eligible: BTreeSet<&String> = ranked.iter().take(top_n).map(|(t, _)| *t).collect();

        let sel = kmeans_value_select(&emb, &values, 4, 23).unwrap();
        for task in &sel.candidate.tasks {
            assert!(eligible.contains(task) || sel.fallback_tasks.contains(task));
        }
    }
}
