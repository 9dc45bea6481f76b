//! The subset problem: find a budget-b set of tasks whose results, used as
//! the only observations of an unseen model family, let a predictor
//! recover the family's performance on all remaining tasks.
//!
//! A candidate is scored by nested cross-validation over model families —
//! every ordered (dev, test) family pair once, 6×5 = 30 fits for six
//! families — while the search methods use a cheaper single-fold proxy
//! objective that scores the dev cell and never touches the test cell.

mod kmeans;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::r2;
use crate::predict::{fit, FitContext, Hyperparams, ModelFamily};
use crate::record::RecordSet;
use crate::splits::make_smallbench_fold;
use crate::{seed, Error, Result};

pub use kmeans::{kmeans_select, kmeans_value_select, lloyd_kmeans, KmeansResult, ValueSelection};

/// The default evaluation budgets.
pub const DEFAULT_BUDGETS: [usize; 6] = [4, 8, 16, 24, 32, 42];

/// A task subset under evaluation; its budget is the set size.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubsetCandidate {
    pub tasks: BTreeSet<String>,
}

impl SubsetCandidate {
    pub fn new(tasks: BTreeSet<String>) -> SubsetCandidate {
        SubsetCandidate { tasks }
    }

    pub fn budget(&self) -> usize {
        self.tasks.len()
    }
}

/// The predictor fitted inside each evaluation fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerPredictor {
    pub family: ModelFamily,
    pub hp: Hyperparams,
}

impl Default for InnerPredictor {
    fn default() -> Self {
        InnerPredictor {
            family: ModelFamily::Mlp,
            hp: Hyperparams::default_for(ModelFamily::Mlp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub l_dev: String,
    pub l_test: String,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetEvaluation {
    pub mean_r2: f64,
    pub fold_scores: Vec<FoldScore>,
}

/// Nested cross-validation over model families: one fit per ordered
/// (L_dev, L_test) pair, scoring R² on the held-out T_test × L_test cell,
/// averaged over all pairs. Fits run in parallel with per-pair sub-seeds.
pub fn evaluate_subset(
    set: &RecordSet,
    candidate: &SubsetCandidate,
    inner: &InnerPredictor,
    families: &[String],
    seed_val: u64,
) -> Result<SubsetEvaluation> {
    if families.len() < 2 {
        return Err(Error::EmptyInput(
            "subset evaluation needs at least two families".into(),
        ));
    }
    let mut pairs = Vec::new();
    for dev in families {
        for test in families {
            if dev != test {
                pairs.push((dev.clone(), test.clone()));
            }
        }
    }
    let fold_scores: Vec<FoldScore> = pairs
        .par_iter()
        .map(|(l_dev, l_test)| -> Result<FoldScore> {
            let fold = make_smallbench_fold(set, &candidate.tasks, l_dev, l_test)?;
            let ctx = FitContext {
                set,
                train: &fold.train,
                dev: &fold.dev,
                seed: seed::derive(seed_val, &format!("smallbench/{l_dev}/{l_test}")),
            };
            let model = fit(inner.family, &inner.hp, &ctx)?;
            let preds = model.predict_indices(set, &fold.test)?;
            let actuals: Vec<f64> = fold.test.iter().map(|&i| set.records[i].score_norm).collect();
            Ok(FoldScore {
                l_dev: l_dev.clone(),
                l_test: l_test.clone(),
                r2: r2(&preds, &actuals)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mean_r2 = fold_scores.iter().map(|f| f.r2).sum::<f64>() / fold_scores.len() as f64;
    Ok(SubsetEvaluation {
        mean_r2,
        fold_scores,
    })
}

/// The single-fold proxy objective used during search: fit on one fixed
/// (L_dev, L_test) fold and score R² on the dev cell (T_test × L_dev), so
/// the test cell stays held out for final evaluation. Scores are cached
/// per candidate.
pub struct SearchObjective<'a> {
    set: &'a RecordSet,
    pub l_dev: String,
    pub l_test: String,
    inner: InnerPredictor,
    seed: u64,
    cache: Mutex<HashMap<Vec<String>, f64>>,
}

impl<'a> SearchObjective<'a> {
    pub fn new(
        set: &'a RecordSet,
        l_dev: &str,
        l_test: &str,
        inner: InnerPredictor,
        seed_val: u64,
    ) -> SearchObjective<'a> {
        SearchObjective {
            set,
            l_dev: l_dev.to_string(),
            l_test: l_test.to_string(),
            inner,
            seed: seed_val,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// The lexicographically first ordered pair of distinct families; the
    /// fold used when no explicit pair is configured.
    pub fn default_pair(set: &RecordSet) -> Result<(String, String)> {
        if set.families.len() < 2 {
            return Err(Error::EmptyInput("search needs at least two families".into()));
        }
        Ok((set.families[0].clone(), set.families[1].clone()))
    }

    pub fn score(&self, tasks: &BTreeSet<String>) -> Result<f64> {
        let key: Vec<String> = tasks.iter().cloned().collect();
        if let Some(&hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit);
        }
        let fold = make_smallbench_fold(self.set, tasks, &self.l_dev, &self.l_test)?;
        let ctx = FitContext {
            set: self.set,
            train: &fold.train,
            dev: &fold.dev,
            seed: seed::derive(self.seed, "search-objective"),
        };
        let model = fit(self.inner.family, &self.inner.hp, &ctx)?;
        let preds = model.predict_indices(self.set, &fold.dev)?;
        let actuals: Vec<f64> = fold.dev.iter().map(|&i| self.set.records[i].score_norm).collect();
        let score = r2(&preds, &actuals)?;
        self.cache.lock().unwrap().insert(key, score);
        Ok(score)
    }
}

/// One scored candidate in a search history. `accepted` marks the
/// evaluations the search advanced on: the chosen addition per greedy
/// step, beam survivors, new best-so-far for best-of-n, and accepted
/// moves for simulated annealing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub tasks: Vec<String>,
    pub score: f64,
    pub accepted: bool,
}

/// Append-only search history, replayable to identical scores given the
/// seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub method: String,
    pub seed: u64,
    pub entries: Vec<TraceEntry>,
}

impl SearchTrace {
    fn new(method: &str, seed: u64) -> SearchTrace {
        SearchTrace {
            method: method.to_string(),
            seed,
            entries: Vec::new(),
        }
    }

    fn push(&mut self, tasks: &BTreeSet<String>, score: f64) -> usize {
        self.entries.push(TraceEntry {
            iteration: self.entries.len(),
            tasks: tasks.iter().cloned().collect(),
            score,
            accepted: false,
        });
        self.entries.len() - 1
    }
}

fn validate_budgets(budgets: &[usize], n_tasks: usize) -> Result<()> {
    if budgets.is_empty() {
        return Err(Error::EmptyInput("no budgets requested".into()));
    }
    if !budgets.windows(2).all(|w| w[0] < w[1]) || budgets[0] == 0 {
        return Err(Error::InvalidConfig(
            "budgets must be strictly increasing and positive".into(),
        ));
    }
    let max = *budgets.last().unwrap();
    if max > n_tasks {
        return Err(Error::BudgetTooLarge {
            budget: max,
            tasks: n_tasks,
        });
    }
    Ok(())
}

/// Forward greedy selection: grow the subset one task at a time, scoring
/// every possible addition and keeping the best (ties go to the
/// lexicographically smallest task id). Candidates at the requested
/// budgets are nested by construction.
pub fn greedy_search<F>(
    tasks: &[String],
    budgets: &[usize],
    mut objective: F,
) -> Result<(BTreeMap<usize, SubsetCandidate>, SearchTrace)>
where
    F: FnMut(&BTreeSet<String>) -> Result<f64>,
{
    validate_budgets(budgets, tasks.len())?;
    let mut sorted: Vec<String> = tasks.to_vec();
    sorted.sort();

    let mut trace = SearchTrace::new("greedy", 0);
    let mut current: BTreeSet<String> = BTreeSet::new();
    let mut results = BTreeMap::new();
    for b in 1..=*budgets.last().unwrap() {
        let mut best: Option<(f64, BTreeSet<String>, usize)> = None;
        for task in sorted.iter().filter(|t| !current.contains(*t)) {
            let mut cand = current.clone();
            cand.insert(task.clone());
            let score = objective(&cand)?;
            let entry = trace.push(&cand, score);
            if best.as_ref().map_or(true, |(s, _, _)| score > *s) {
                best = Some((score, cand, entry));
            }
        }
        let (_, chosen, entry) = best.expect("at least one addition per step");
        trace.entries[entry].accepted = true;
        current = chosen;
        if budgets.contains(&b) {
            results.insert(b, SubsetCandidate::new(current.clone()));
        }
    }
    Ok((results, trace))
}

/// Evaluate `n` uniformly drawn size-b subsets and keep the best; ties go
/// to the lexicographically smaller candidate, matching the brute-force
/// oracle's tie-break. The full trace is retained for task-value
/// computation.
pub fn best_of_n<F>(
    tasks: &[String],
    b: usize,
    n: usize,
    seed_val: u64,
    mut objective: F,
) -> Result<(SubsetCandidate, f64, SearchTrace)>
where
    F: FnMut(&BTreeSet<String>) -> Result<f64>,
{
    if n == 0 {
        return Err(Error::EmptyInput("best-of-n needs n >= 1".into()));
    }
    validate_budgets(&[b], tasks.len())?;
    let mut sorted: Vec<String> = tasks.to_vec();
    sorted.sort();

    let mut rng = seed::rng(seed_val);
    let mut trace = SearchTrace::new("best_of_n", seed_val);
    let mut best: Option<(BTreeSet<String>, f64)> = None;
    for _ in 0..n {
        let cand: BTreeSet<String> = rand::seq::index::sample(&mut rng, sorted.len(), b)
            .iter()
            .map(|i| sorted[i].clone())
            .collect();
        let score = objective(&cand)?;
        let entry = trace.push(&cand, score);
        let better = match &best {
            None => true,
            Some((c, s)) => score > *s || (score == *s && cand < *c),
        };
        if better {
            trace.entries[entry].accepted = true;
            best = Some((cand, score));
        }
    }
    let (cand, score) = best.unwrap();
    Ok((SubsetCandidate::new(cand), score, trace))
}

/// Randomized beam search: keep the `q` best partial subsets per depth and
/// score only a sampled `expansion_fraction` of the possible additions per
/// beam element, so the runtime matches greedy search. With q = 1 and
/// fraction 1 this reduces to greedy search trace-for-trace.
pub fn beam_search<F>(
    tasks: &[String],
    budgets: &[usize],
    q: usize,
    expansion_fraction: f64,
    seed_val: u64,
    mut objective: F,
) -> Result<(BTreeMap<usize, SubsetCandidate>, SearchTrace)>
where
    F: FnMut(&BTreeSet<String>) -> Result<f64>,
{
    if q == 0 {
        return Err(Error::InvalidConfig("beam width must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&expansion_fraction) || expansion_fraction == 0.0 {
        return Err(Error::InvalidConfig(
            "expansion fraction must be in (0, 1]".into(),
        ));
    }
    validate_budgets(budgets, tasks.len())?;
    let mut sorted: Vec<String> = tasks.to_vec();
    sorted.sort();

    let mut rng = seed::rng(seed_val);
    let mut trace = SearchTrace::new("beam", seed_val);
    let mut beam: Vec<BTreeSet<String>> = vec![BTreeSet::new()];
    let mut results = BTreeMap::new();
    for depth in 1..=*budgets.last().unwrap() {
        let mut scored: BTreeMap<BTreeSet<String>, (f64, usize)> = BTreeMap::new();
        for element in &beam {
            let remaining: Vec<&String> =
                sorted.iter().filter(|t| !element.contains(*t)).collect();
            let picks: Vec<&String> = if expansion_fraction >= 1.0 {
                remaining
            } else {
                let m = ((remaining.len() as f64 * expansion_fraction).round() as usize)
                    .clamp(1, remaining.len());
                let mut idx = rand::seq::index::sample(&mut rng, remaining.len(), m).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| remaining[i]).collect()
            };
            for task in picks {
                let mut cand = element.clone();
                cand.insert(task.clone());
                if scored.contains_key(&cand) {
                    continue;
                }
                let score = objective(&cand)?;
                let entry = trace.push(&cand, score);
                scored.insert(cand, (score, entry));
            }
        }
        let mut ranked: Vec<(BTreeSet<String>, (f64, usize))> = scored.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.total_cmp(&a.1 .0).then(a.0.cmp(&b.0)));
        ranked.truncate(q);
        for (_, (_, entry)) in &ranked {
            trace.entries[*entry].accepted = true;
        }
        beam = ranked.iter().map(|(c, _)| c.clone()).collect();
        if budgets.contains(&depth) {
            results.insert(depth, SubsetCandidate::new(beam[0].clone()));
        }
    }
    Ok((results, trace))
}

/// Cooling schedule for simulated annealing: geometric decay applied
/// every `decay_every` iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub iterations: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            t0: 0.02,
            decay: 0.95,
            decay_every: 10,
            iterations: 500,
        }
    }
}

/// Start from a seeded random size-b subset and propose single-task swaps;
/// improving moves are always accepted, worsening moves with probability
/// exp(Δ / temperature). The best candidate ever visited is returned.
pub fn simulated_annealing<F>(
    tasks: &[String],
    b: usize,
    schedule: &AnnealSchedule,
    seed_val: u64,
    mut objective: F,
) -> Result<(SubsetCandidate, f64, SearchTrace)>
where
    F: FnMut(&BTreeSet<String>) -> Result<f64>,
{
    validate_budgets(&[b], tasks.len())?;
    let mut sorted: Vec<String> = tasks.to_vec();
    sorted.sort();

    let mut rng = seed::rng(seed_val);
    let mut trace = SearchTrace::new("simulated_annealing", seed_val);

    let mut current: Vec<String> = {
        let mut pool = sorted.clone();
        pool.shuffle(&mut rng);
        let mut start: Vec<String> = pool.into_iter().take(b).collect();
        start.sort();
        start
    };
    let current_set: BTreeSet<String> = current.iter().cloned().collect();
    let mut cur_score = objective(&current_set)?;
    let first = trace.push(&current_set, cur_score);
    trace.entries[first].accepted = true;
    let mut best = (current_set, cur_score);

    for iter in 0..schedule.iterations {
        let temp = schedule.t0 * schedule.decay.powi((iter / schedule.decay_every.max(1)) as i32);
        let outside: Vec<&String> = sorted.iter().filter(|t| !current.contains(t)).collect();
        if outside.is_empty() {
            break; // b == |T|: no swap exists
        }
        let drop_idx = rng.gen_range(0..current.len());
        let add = outside[rng.gen_range(0..outside.len())].clone();
        let mut proposal = current.clone();
        proposal[drop_idx] = add;
        proposal.sort();
        let proposal_set: BTreeSet<String> = proposal.iter().cloned().collect();
        let score = objective(&proposal_set)?;
        let entry = trace.push(&proposal_set, score);

        let delta = score - cur_score;
        let accept = if delta > 0.0 {
            true
        } else if temp > 0.0 {
            rng.gen::<f64>() < (delta / temp).exp()
        } else {
            false
        };
        if accept {
            trace.entries[entry].accepted = true;
            current = proposal;
            cur_score = score;
        }
        if score > best.1 || (score == best.1 && proposal_set < best.0) {
            best = (proposal_set, score);
        }
    }
    Ok((SubsetCandidate::new(best.0), best.1, trace))
}

/// A task's mean objective over the trials containing it, with the trial
/// count as support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskValue {
    pub value: f64,
    pub support: usize,
}

pub type TaskValueTable = BTreeMap<String, TaskValue>;

/// Aggregate a search history into per-task values: a task's value is the
/// average score of the trials whose candidate contains it.
pub fn task_values(trace: &SearchTrace) -> Result<TaskValueTable> {
    if trace.entries.is_empty() {
        return Err(Error::EmptyInput("task values need a non-empty trace".into()));
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for entry in &trace.entries {
        for task in &entry.tasks {
            let e = sums.entry(task.clone()).or_insert((0.0, 0));
            e.0 += entry.score;
            e.1 += 1;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(t, (sum, n))| {
            (
                t,
                TaskValue {
                    value: sum / n as f64,
                    support: n,
                },
            )
        })
        .collect())
}

const BBLITE: &str = include_str!("../../data/bblite.txt");
const BBHARD: &str = include_str!("../../data/bbhard.txt");

fn parse_task_lines(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

/// The shipped fixed subsets: `bblite` (42 tasks) and `bbhard` (24 tasks).
pub fn load_fixed_subset(name: &str) -> Result<SubsetCandidate> {
    match name {
        "bblite" => Ok(SubsetCandidate::new(parse_task_lines(BBLITE))),
        "bbhard" => Ok(SubsetCandidate::new(parse_task_lines(BBHARD))),
        other => Err(Error::UnknownSubsetName(other.to_string())),
    }
}

/// A custom subset from a file of task ids, one per line.
pub fn subset_from_file(path: &Path) -> Result<SubsetCandidate> {
    let text = std::fs::read_to_string(path)?;
    Ok(SubsetCandidate::new(parse_task_lines(&text)))
}

/// Tasks in the candidate that the dataset does not contain; reported so
/// callers can warn rather than fail.
pub fn missing_tasks(candidate: &SubsetCandidate, set: &RecordSet) -> Vec<String> {
    let known: BTreeSet<&str> = set.tasks.iter().map(String::as_str).collect();
    candidate
        .tasks
        .iter()
        .filter(|t| !known.contains(t.as_str()))
        .cloned()
        .collect()
}
