//! Evaluation metrics: RMSE, R², task-average correlations, grouped
//! evaluation, and win/tie/loss model comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::record::RecordSet;
use crate::{Error, Result};

/// Root mean square error.
pub fn rmse(preds: &[f64], actuals: &[f64]) -> Result<f64> {
    if preds.len() != actuals.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: actuals.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("rmse of zero pairs".into()));
    }
    let n = preds.len() as f64;
    let sse: f64 = preds
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((sse / n).sqrt())
}

/// Coefficient of determination: `1 - SSE / SST` with SST the total
/// variance around the mean of `actuals`. Zero total variance is an
/// explicit error so callers can decide whether to skip the group.
pub fn r2(preds: &[f64], actuals: &[f64]) -> Result<f64> {
    if preds.len() != actuals.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: actuals.len(),
        });
    }
    if preds.len() < 2 {
        return Err(Error::EmptyInput("r2 needs at least 2 pairs".into()));
    }
    let n = actuals.len() as f64;
    let mean = actuals.iter().sum::<f64>() / n;
    let sst: f64 = actuals.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sse: f64 = preds
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok(1.0 - sse / sst)
}

/// Pearson correlation, or `None` when undefined (fewer than 2 points or
/// zero variance on either side).
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Kendall rank correlation, tau-b (tie-corrected):
///
/// `tau_b = (P - Q) / sqrt((n0 - n1) (n0 - n2))`
///
/// with P/Q the concordant/discordant pair counts, `n0 = n(n-1)/2`, and
/// `n1`/`n2` the tied-pair counts in each input. Discordant pairs are
/// counted by merge-sort inversion counting, O(n log n). Returns `None`
/// when the denominator is zero (all tied on either side).
pub fn kendall_tau_b(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(ys[a].total_cmp(&ys[b])));

    let n0 = n as u64 * (n as u64 - 1) / 2;
    let tied = |sorted_runs: &[u64]| -> u64 { sorted_runs.iter().map(|t| t * (t - 1) / 2).sum() };

    // Tie runs in x, and joint (x, y) ties, over the x-sorted order.
    let mut x_runs = Vec::new();
    let mut xy_runs = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        x_runs.push((j - i) as u64);
        let mut k = i;
        while k < j {
            let mut m = k;
            while m < j && ys[order[m]] == ys[order[k]] {
                m += 1;
            }
            xy_runs.push((m - k) as u64);
            k = m;
        }
        i = j;
    }
    let n1 = tied(&x_runs);
    let n3 = tied(&xy_runs);

    // Tie runs in y.
    let mut y_sorted: Vec<f64> = ys.to_vec();
    y_sorted.sort_by(f64::total_cmp);
    let mut y_runs = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && y_sorted[j] == y_sorted[i] {
            j += 1;
        }
        y_runs.push((j - i) as u64);
        i = j;
    }
    let n2 = tied(&y_runs);

    if n0 == n1 || n0 == n2 {
        return None;
    }

    // Discordant pairs: inversions of y in the x-sorted (y-ascending
    // within ties) order. Pairs tied in x sort y-ascending and contribute
    // no inversions.
    let mut seq: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
    let discordant = count_inversions(&mut seq);

    let con_minus_dis = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * discordant as i64;
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    Some(con_minus_dis as f64 / denom)
}

/// Count pairs (i < j) with `seq[i] > seq[j]` by merge sort.
fn count_inversions(seq: &mut [f64]) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = seq.split_at_mut(mid);
    let mut inv = count_inversions(left) + count_inversions(right);

    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            merged.push(left[i]);
            i += 1;
        } else {
            inv += (left.len() - i) as u64;
            merged.push(right[j]);
            j += 1;
        }
    }
    merged.extend_from_slice(&left[i..]);
    merged.extend_from_slice(&right[j..]);
    seq.copy_from_slice(&merged);
    inv
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationKind {
    Pearson,
    Kendall,
}

/// A task-averaged correlation plus how many task groups were usable.
/// Groups where the statistic is undefined (fewer than 2 rows, or zero
/// variance / all ties) are excluded from the average and counted as
/// skipped rather than silently propagating NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskAverage {
    pub value: f64,
    pub groups_used: usize,
    pub groups_skipped: usize,
}

/// Group rows by task, compute the correlation within each group, and
/// average over the groups where it is defined.
pub fn task_avg_correlation(
    preds: &[f64],
    actuals: &[f64],
    tasks: &[&str],
    kind: CorrelationKind,
) -> Result<TaskAverage> {
    if preds.len() != actuals.len() || preds.len() != tasks.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: actuals.len().max(tasks.len()),
        });
    }
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((p, a), t) in preds.iter().zip(actuals).zip(tasks) {
        let entry = groups.entry(t).or_default();
        entry.0.push(*p);
        entry.1.push(*a);
    }
    let mut sum = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for (ps, ys) in groups.values() {
        let stat = match kind {
            CorrelationKind::Pearson => pearson(ps, ys),
            CorrelationKind::Kendall => kendall_tau_b(ps, ys),
        };
        match stat {
            Some(v) => {
                sum += v;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if used == 0 {
        return Err(Error::NoDefinedGroups);
    }
    Ok(TaskAverage {
        value: sum / used as f64,
        groups_used: used,
        groups_skipped: skipped,
    })
}

/// Full evaluation of one prediction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub rmse: f64,
    pub r2: f64,
    pub task_avg_pearson: Option<f64>,
    pub task_avg_kendall: Option<f64>,
    pub n: usize,
}

/// Compute RMSE, R², and both task-average correlations in one pass.
pub fn evaluate(preds: &[f64], actuals: &[f64], tasks: &[&str]) -> Result<EvalResult> {
    let rmse = rmse(preds, actuals)?;
    let r2 = r2(preds, actuals)?;
    let pear = task_avg_correlation(preds, actuals, tasks, CorrelationKind::Pearson)
        .ok()
        .map(|t| t.value);
    let kend = task_avg_correlation(preds, actuals, tasks, CorrelationKind::Kendall)
        .ok()
        .map(|t| t.value);
    Ok(EvalResult {
        rmse,
        r2,
        task_avg_pearson: pear,
        task_avg_kendall: kend,
        n: preds.len(),
    })
}

/// Grouping keys for per-group test evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    NShot,
    Family,
    /// Four buckets of models by `n_param_total` quartiles, computed over
    /// the distinct models of the dataset, upper-inclusive.
    ParamBucket,
    EmergentFlag,
    Task,
}

/// Metrics for one test group. `r2` is `None` when the group's total
/// variance is zero — flagged, not silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEval {
    pub group: String,
    pub n: usize,
    pub rmse: f64,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedResult {
    pub key: GroupKey,
    pub groups: Vec<GroupEval>,
}

/// Quartile boundaries over the distinct models' parameter counts.
/// Buckets are upper-inclusive: bucket `i` holds models with
/// `n_param <= q_i` not already in an earlier bucket.
fn param_bucket_bounds(set: &RecordSet) -> Vec<u64> {
    let mut params: Vec<u64> = set.models.iter().map(|(_, p)| *p).collect();
    params.sort_unstable();
    let m = params.len();
    (1..=3)
        .map(|q| params[(q * m / 4).saturating_sub(1).min(m - 1)])
        .collect()
}

fn param_bucket(bounds: &[u64], n_param: u64) -> usize {
    bounds.iter().position(|&b| n_param <= b).unwrap_or(3) + 1
}

/// Evaluate predictions per test group under the given key.
pub fn grouped_evaluation(
    set: &RecordSet,
    test_idx: &[usize],
    preds: &[f64],
    key: GroupKey,
) -> Result<GroupedResult> {
    if preds.len() != test_idx.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: test_idx.len(),
        });
    }
    if key == GroupKey::EmergentFlag && set.emergent_tasks.is_empty() {
        return Err(Error::NoEmergentTasks);
    }
    let bounds = if key == GroupKey::ParamBucket {
        param_bucket_bounds(set)
    } else {
        Vec::new()
    };

    let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (&idx, &p) in test_idx.iter().zip(preds) {
        let r = &set.records[idx];
        let label = match key {
            GroupKey::NShot => format!("n_shot={}", r.n_shot),
            GroupKey::Family => r.model_family.clone(),
            GroupKey::ParamBucket => format!("bucket_{}", param_bucket(&bounds, r.n_param_total)),
            GroupKey::EmergentFlag => {
                if set.emergent_tasks.contains(&r.task) {
                    "emergent".to_string()
                } else {
                    "non_emergent".to_string()
                }
            }
            GroupKey::Task => r.task.clone(),
        };
        let entry = groups.entry(label).or_default();
        entry.0.push(p);
        entry.1.push(r.score_norm);
    }

    let mut out = Vec::with_capacity(groups.len());
    for (label, (ps, ys)) in groups {
        let rmse = rmse(&ps, &ys)?;
        let r2 = r2(&ps, &ys).ok();
        out.push(GroupEval {
            group: label,
            n: ps.len(),
            rmse,
            r2,
        });
    }
    Ok(GroupedResult { key, groups: out })
}

/// Mean normalized score per task for one model, taken over the shots
/// observed for that (model, task) pair.
pub fn model_task_scores(set: &RecordSet, family: &str, n_param: u64) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in &set.records {
        if r.model_family == family && r.n_param_total == n_param {
            let e = sums.entry(r.task.clone()).or_insert((0.0, 0));
            e.0 += r.score_norm;
            e.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(t, (s, n))| (t, s / n as f64))
        .collect()
}

/// Win/tie/loss fractions over the shared task set. A wins on a task when
/// its score exceeds B's by more than `tie_tol`; within `tie_tol` is a tie.
/// The three fractions sum to 1.
pub fn compare_models(
    scores_a: &BTreeMap<String, f64>,
    scores_b: &BTreeMap<String, f64>,
    tie_tol: f64,
) -> Result<(f64, f64, f64)> {
    let mut wins_a = 0usize;
    let mut ties = 0usize;
    let mut wins_b = 0usize;
    let mut shared = 0usize;
    for (task, &a) in scores_a {
        if let Some(&b) = scores_b.get(task) {
            shared += 1;
            let diff = a - b;
            if diff > tie_tol {
                wins_a += 1;
            } else if diff < -tie_tol {
                wins_b += 1;
            } else {
                ties += 1;
            }
        }
    }
    if shared == 0 {
        return Err(Error::EmptySharedTasks);
    }
    let n = shared as f64;
    Ok((wins_a as f64 / n, ties as f64 / n, wins_b as f64 / n))
}
