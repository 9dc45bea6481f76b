//! The command-line pipeline: ingest → stats → evaluate → search →
//! report, driven by a strict JSON config. Every command is reproducible
//! from (inputs, config, seed); every output file embeds the config hash;
//! input files are never mutated.

mod report;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::featurize::build_schema;
use crate::metrics::{self, EvalResult, GroupKey};
use crate::predict::{
    self, extract_task_embeddings, FitContext, FittedModel, Hyperparams, HyperparamSpace,
    ModelFamily,
};
use crate::record::{
    self, filter_records, load_emergent_tasks, load_records, load_task_metadata, summarize,
    FilterPolicy, FilterReport, RecordSet,
};
use crate::smallbench::{
    self, best_of_n, beam_search, evaluate_subset, greedy_search, kmeans_select,
    kmeans_value_select, load_fixed_subset, missing_tasks, simulated_annealing, subset_from_file,
    task_values, AnnealSchedule, InnerPredictor, SearchObjective, SearchTrace, SubsetCandidate,
};
use crate::splits::{
    make_composition_folds, make_cv_folds, make_extrapolation_fold, CvLevel, ExtrapolationHoldout,
    Fold, SVariant,
};
use crate::synth::SynthSpec;
use crate::{seed, Error, Result};

pub use report::{render_bar_chart, render_line_chart, Series};

/// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_)
        | Error::InvalidHyperparam(_)
        | Error::UnknownSubsetName(_)
        | Error::BudgetTooLarge { .. }
        | Error::CombinatorialLimit(..) => 1,
        Error::Numeric(_) | Error::ZeroVariance | Error::NoDefinedGroups => 3,
        _ => 2,
    }
}

/// One split protocol selection, parsed from a short code: `l1`, `l2.1`,
/// `l2.2`, `l3`, `l3comp`, or `e1:s1` … `e2.2:s3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SplitChoice {
    Cv(CvLevel),
    Composition,
    Extrapolation(ExtrapolationHoldout, SVariant),
}

impl SplitChoice {
    pub fn code(&self) -> String {
        match self {
            SplitChoice::Cv(CvLevel::L1) => "l1".into(),
            SplitChoice::Cv(CvLevel::L2_1) => "l2.1".into(),
            SplitChoice::Cv(CvLevel::L2_2) => "l2.2".into(),
            SplitChoice::Cv(CvLevel::L3) => "l3".into(),
            SplitChoice::Composition => "l3comp".into(),
            SplitChoice::Extrapolation(holdout, variant) => {
                let e = match holdout {
                    ExtrapolationHoldout::Shot(3) => "e1".to_string(),
                    ExtrapolationHoldout::Shot(s) => format!("e1[{s}]"),
                    ExtrapolationHoldout::LargestModel(f) if f == "GPT-3" => "e2.1".into(),
                    ExtrapolationHoldout::LargestModel(f) if f == "PaLM" => "e2.2".into(),
                    ExtrapolationHoldout::LargestModel(f) => format!("e2[{f}]"),
                };
                let s = match variant {
                    SVariant::S1 => "s1",
                    SVariant::S2 => "s2",
                    SVariant::S3 => "s3",
                };
                format!("{e}:{s}")
            }
        }
    }

    pub fn parse(code: &str) -> Result<SplitChoice> {
        let bad = || Error::InvalidConfig(format!("unknown split code `{code}`"));
        match code {
            "l1" => return Ok(SplitChoice::Cv(CvLevel::L1)),
            "l2.1" => return Ok(SplitChoice::Cv(CvLevel::L2_1)),
            "l2.2" => return Ok(SplitChoice::Cv(CvLevel::L2_2)),
            "l3" => return Ok(SplitChoice::Cv(CvLevel::L3)),
            "l3comp" => return Ok(SplitChoice::Composition),
            _ => {}
        }
        let (e, s) = code.split_once(':').ok_or_else(bad)?;
        let holdout = match e {
            "e1" => ExtrapolationHoldout::e1(),
            "e2.1" => ExtrapolationHoldout::e2_1(),
            "e2.2" => ExtrapolationHoldout::e2_2(),
            _ => {
                // e1[<shot>] and e2[<family>] generalize the named slices.
                if let Some(inner) = e.strip_prefix("e1[").and_then(|r| r.strip_suffix(']')) {
                    ExtrapolationHoldout::Shot(
                        inner.parse().map_err(|_| bad())?,
                    )
                } else if let Some(inner) = e.strip_prefix("e2[").and_then(|r| r.strip_suffix(']')) {
                    ExtrapolationHoldout::LargestModel(inner.to_string())
                } else {
                    return Err(bad());
                }
            }
        };
        let variant = match s {
            "s1" => SVariant::S1,
            "s2" => SVariant::S2,
            "s3" => SVariant::S3,
            _ => return Err(bad()),
        };
        Ok(SplitChoice::Extrapolation(holdout, variant))
    }
}

impl TryFrom<String> for SplitChoice {
    type Error = Error;
    fn try_from(s: String) -> Result<SplitChoice> {
        SplitChoice::parse(&s)
    }
}

impl From<SplitChoice> for String {
    fn from(s: SplitChoice) -> String {
        s.code()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorChoice {
    pub family: ModelFamily,
    /// Explicit hyperparameters; omitted means defaults, or a fold-1
    /// random search when `hp_search_samples` is set.
    #[serde(default)]
    pub hp: Option<Hyperparams>,
    #[serde(default)]
    pub hp_search_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    #[serde(rename = "full_30")]
    Full30,
    SingleSearchFold,
}

fn default_budgets() -> Vec<usize> {
    smallbench::DEFAULT_BUDGETS.to_vec()
}

fn default_best_of() -> usize {
    5000
}

fn default_repetitions() -> usize {
    5
}

fn default_beam_width() -> usize {
    4
}

fn default_fold_mode() -> FoldMode {
    FoldMode::Full30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallbenchConfig {
    /// Methods to run: `bblite`, `bbhard`, `random`, `greedy`,
    /// `best_of_n`, `beam`, `simulated_annealing`, `kmeans`,
    /// `kmeans_value`, or `file:<path>` for a custom task list.
    pub methods: Vec<String>,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<usize>,
    /// Predictor fitted inside evaluation and search folds.
    #[serde(default)]
    pub inner: Option<PredictorChoice>,
    #[serde(default = "default_best_of")]
    pub best_of_samples: usize,
    /// Candidates per budget for the random baseline and k-means inits.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_beam_width")]
    pub beam_width: usize,
    #[serde(default)]
    pub anneal: Option<AnnealSchedule>,
    #[serde(default = "default_fold_mode")]
    pub protocol: FoldMode,
    /// The fixed (L_dev, L_test) pair used by search; defaults to the
    /// lexicographically first ordered pair.
    #[serde(default)]
    pub search_pair: Option<(String, String)>,
}

fn default_true() -> bool {
    true
}

/// Ingest-time filtering knobs. Defaults reproduce the six sequential
/// criteria; criterion 6 turns on when a task-metadata file is supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    #[serde(default = "default_true")]
    pub drop_programmatic: bool,
    /// Replaces the default six-family keep-list.
    pub keep_families: Option<Vec<String>>,
    /// Disables the family keep-list entirely (criterion 2).
    pub no_family_filter: bool,
    #[serde(default = "default_true")]
    pub drop_all_zero_tasks: bool,
    #[serde(default = "default_true")]
    pub restrict_metrics: bool,
    #[serde(default = "default_true")]
    pub drop_aggregates: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            drop_programmatic: true,
            keep_families: None,
            no_family_filter: false,
            drop_all_zero_tasks: true,
            restrict_metrics: true,
            drop_aggregates: true,
        }
    }
}

impl FilterConfig {
    fn to_policy(&self) -> FilterPolicy {
        let mut policy = FilterPolicy {
            drop_programmatic: self.drop_programmatic,
            drop_all_zero_tasks: self.drop_all_zero_tasks,
            drop_aggregates: self.drop_aggregates,
            ..FilterPolicy::default()
        };
        if let Some(families) = &self.keep_families {
            policy.family_keep = Some(families.iter().cloned().collect());
        }
        if self.no_family_filter {
            policy.family_keep = None;
        }
        if !self.restrict_metrics {
            policy.allowed_metrics = None;
        }
        policy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub records: Option<String>,
    pub task_metadata: Option<String>,
    pub emergent_tasks: Option<String>,
    pub out_dir: Option<String>,
    pub seed: u64,
    pub filter: FilterConfig,
    /// Cross-validation fold count for the L splits.
    pub folds: Option<usize>,
    pub splits: Vec<SplitChoice>,
    pub predictors: Vec<PredictorChoice>,
    /// Grouped test evaluation keys for `evaluate`: `n_shot`, `family`,
    /// `param_bucket`, `emergent_flag`, `task`.
    pub grouped_by: Vec<GroupKey>,
    pub smallbench: Option<SmallbenchConfig>,
    pub synth: Option<SynthSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(config)
    }

    /// Stable hash of the effective configuration; embedded in every
    /// output file.
    pub fn hash(&self, seed_val: u64) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(self).expect("config serializes").as_bytes());
        hasher.update(seed_val.to_le_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().fold(String::new(), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }
}

/// Resolved command environment: config plus the CLI flag overrides.
pub struct Env {
    pub config: RunConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub hash: String,
}

impl Env {
    pub fn new(config: RunConfig, seed: Option<u64>, out: Option<PathBuf>) -> Result<Env> {
        let seed = seed.unwrap_or(config.seed);
        let out_dir = out
            .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let hash = config.hash(seed);
        Ok(Env {
            config,
            seed,
            out_dir,
            hash,
        })
    }

    fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }

    fn records_path(&self, flag: Option<&Path>) -> Result<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.config.records.as_ref().map(PathBuf::from))
            .ok_or_else(|| {
                Error::InvalidConfig("no records file given (flag --records or config.records)".into())
            })
    }

    fn load_dataset(&self, flag: Option<&Path>) -> Result<RecordSet> {
        let path = self.records_path(flag)?;
        let mut set = load_records(&path)?;
        if let Some(p) = &self.config.emergent_tasks {
            set.set_emergent_tasks(load_emergent_tasks(Path::new(p))?);
        }
        Ok(set)
    }

    fn write_csv(&self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        self.ensure_out_dir()?;
        let path = self.out_dir.join(name);
        let mut text = format!("# config_hash={}\n{header}\n", self.hash);
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Plain line-oriented file with a config-hash comment, readable by
    /// `subset_from_file`.
    fn write_lines(&self, name: &str, rows: &[String]) -> Result<PathBuf> {
        self.ensure_out_dir()?;
        let path = self.out_dir.join(name);
        let mut text = format!("# config_hash={}\n", self.hash);
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(&path, text)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        self.ensure_out_dir()?;
        let path = self.out_dir.join(name);
        let wrapped = serde_json::json!({
            "config_hash": self.hash,
            "data": value,
        });
        fs::write(&path, serde_json::to_string_pretty(&wrapped)?)?;
        Ok(path)
    }
}

/// Load, filter, and persist the canonical dataset plus the filter report.
pub fn cmd_ingest(env: &Env, records_flag: Option<&Path>) -> Result<(FilterReport, PathBuf)> {
    let raw = env.load_dataset(records_flag)?;
    let mut policy = env.config.filter.to_policy();
    if let Some(meta) = &env.config.task_metadata {
        policy = policy.with_task_metadata(load_task_metadata(Path::new(meta))?);
    }
    let (filtered, report) = filter_records(&raw, &policy)?;

    env.ensure_out_dir()?;
    let out_path = env.out_dir.join("records_filtered.csv");
    let mut buf = format!("# config_hash={}\n", env.hash).into_bytes();
    record::write_records(&mut buf, &filtered, record::FileFormat::Csv)?;
    fs::write(&out_path, buf)?;
    env.write_json("filter_report.json", &report)?;
    env.write_json("stats.json", &summarize(&filtered))?;
    log::info!(
        "ingest: {} -> {} records ({} removed)",
        report.input,
        report.output,
        report.total_removed()
    );
    Ok((report, out_path))
}

/// Print dataset statistics as JSON.
pub fn cmd_stats(env: &Env, records_flag: Option<&Path>) -> Result<String> {
    let set = env.load_dataset(records_flag)?;
    let stats = summarize(&set);
    Ok(serde_json::to_string_pretty(&stats)?)
}

/// Folds for one split choice.
fn build_folds(set: &RecordSet, choice: &SplitChoice, k: usize, seed_val: u64) -> Result<Vec<Fold>> {
    let split_seed = seed::derive(seed_val, &format!("split:{}", choice.code()));
    match choice {
        SplitChoice::Cv(level) => make_cv_folds(set, *level, k, split_seed),
        SplitChoice::Composition => make_composition_folds(set, split_seed),
        SplitChoice::Extrapolation(holdout, variant) => Ok(vec![make_extrapolation_fold(
            set, holdout, *variant, split_seed,
        )?]),
    }
}

/// Resolve a predictor's hyperparameters: explicit, fold-1 random search
/// (samples logged as JSON-lines under `label`), or defaults.
fn resolve_hyperparams(
    env: &Env,
    set: &RecordSet,
    choice: &PredictorChoice,
    fold1: &Fold,
    label: &str,
) -> Result<Hyperparams> {
    if let Some(hp) = &choice.hp {
        return Ok(hp.clone());
    }
    match choice.hp_search_samples {
        Some(n) => {
            let ctx = FitContext {
                set,
                train: &fold1.train,
                dev: &fold1.dev,
                seed: seed::derive(env.seed, "hp-search-fit"),
            };
            let space = HyperparamSpace::default();
            let result = predict::random_hyperparameter_search(
                &space,
                n,
                choice.family,
                &ctx,
                env.seed,
            )?;
            let lines: Vec<String> = result
                .samples
                .iter()
                .map(|s| serde_json::to_string(s).map_err(Error::from))
                .collect::<Result<_>>()?;
            env.write_lines(
                &format!("hp_samples_{label}_{}.jsonl", choice.family.as_str()),
                &lines,
            )?;
            Ok(result.best)
        }
        None => Ok(Hyperparams::default_for(choice.family)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldEval {
    pub split: String,
    pub predictor: String,
    pub fold: usize,
    #[serde(flatten)]
    pub result: EvalResult,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Run the configured split × predictor grid: per-fold metrics, mean ± std
/// aggregates, and optional grouped test evaluations, written as CSV and
/// JSON.
pub fn cmd_evaluate(env: &Env, records_flag: Option<&Path>) -> Result<Vec<FoldEval>> {
    if env.config.splits.is_empty() || env.config.predictors.is_empty() {
        return Err(Error::InvalidConfig(
            "evaluate needs at least one split and one predictor".into(),
        ));
    }
    let set = env.load_dataset(records_flag)?;
    let k = env.config.folds.unwrap_or(10);

    let mut per_fold: Vec<FoldEval> = Vec::new();
    let mut grouped_rows: Vec<String> = Vec::new();

    for split in &env.config.splits {
        let folds = build_folds(&set, split, k, env.seed)?;
        for choice in &env.config.predictors {
            let label = choice.family.as_str().to_string();
            let hp = resolve_hyperparams(env, &set, choice, &folds[0], &split.code())?;
            log::info!("evaluate: split={} predictor={label}", split.code());

            // Fold fits are independent; fan them out and keep fold order
            // canonical in the output.
            let fold_outputs: Vec<(FoldEval, Vec<f64>)> = folds
                .par_iter()
                .enumerate()
                .map(|(fold_no, fold)| -> Result<(FoldEval, Vec<f64>)> {
                    let ctx = FitContext {
                        set: &set,
                        train: &fold.train,
                        dev: &fold.dev,
                        seed: seed::derive(
                            env.seed,
                            &format!("fit:{}:{}:{}", split.code(), label, fold_no),
                        ),
                    };
                    let model = predict::fit(choice.family, &hp, &ctx)?;
                    let preds = model.predict_indices(&set, &fold.test)?;
                    let actuals: Vec<f64> =
                        fold.test.iter().map(|&i| set.records[i].score_norm).collect();
                    let tasks: Vec<&str> =
                        fold.test.iter().map(|&i| set.records[i].task.as_str()).collect();
                    let result = metrics::evaluate(&preds, &actuals, &tasks)?;
                    Ok((
                        FoldEval {
                            split: split.code(),
                            predictor: label.clone(),
                            fold: fold_no,
                            result,
                        },
                        preds,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;

            // Pool test predictions across folds for grouped evaluation;
            // under CV every record appears in test exactly once.
            let mut pooled_idx: Vec<usize> = Vec::new();
            let mut pooled_preds: Vec<f64> = Vec::new();
            for ((eval, preds), fold) in fold_outputs.into_iter().zip(&folds) {
                pooled_idx.extend_from_slice(&fold.test);
                pooled_preds.extend(preds);
                per_fold.push(eval);
            }

            for key in &env.config.grouped_by {
                if *key == GroupKey::EmergentFlag && set.emergent_tasks.is_empty() {
                    // No emergent-task file loaded: grouping is disabled,
                    // not fatal.
                    log::warn!("emergent grouping requested but no emergent-task file is loaded");
                    continue;
                }
                let grouped = metrics::grouped_evaluation(&set, &pooled_idx, &pooled_preds, *key)?;
                for g in grouped.groups {
                    grouped_rows.push(format!(
                        "{},{},{:?},{},{},{},{}",
                        split.code(),
                        label,
                        grouped.key,
                        g.group,
                        g.n,
                        g.rmse,
                        fmt_opt(g.r2)
                    ));
                }
            }
        }
    }

    // Per-fold rows.
    let fold_rows: Vec<String> = per_fold
        .iter()
        .map(|f| {
            format!(
                "{},{},{},{},{},{},{},{}",
                f.split,
                f.predictor,
                f.fold,
                f.result.n,
                f.result.rmse,
                f.result.r2,
                fmt_opt(f.result.task_avg_pearson),
                fmt_opt(f.result.task_avg_kendall)
            )
        })
        .collect();
    env.write_csv(
        "evaluate_folds.csv",
        "split,predictor,fold,n,rmse,r2,task_avg_pearson,task_avg_kendall",
        &fold_rows,
    )?;

    // Aggregates in long form: one row per (split, predictor, metric).
    let mut agg: BTreeMap<(String, String), Vec<&FoldEval>> = BTreeMap::new();
    for f in &per_fold {
        agg.entry((f.split.clone(), f.predictor.clone())).or_default().push(f);
    }
    let mut summary_rows = Vec::new();
    for ((split, predictor), folds) in &agg {
        let metric_values: [(&str, Vec<f64>); 4] = [
            ("rmse", folds.iter().map(|f| f.result.rmse).collect()),
            ("r2", folds.iter().map(|f| f.result.r2).collect()),
            (
                "task_avg_pearson",
                folds.iter().filter_map(|f| f.result.task_avg_pearson).collect(),
            ),
            (
                "task_avg_kendall",
                folds.iter().filter_map(|f| f.result.task_avg_kendall).collect(),
            ),
        ];
        for (metric, values) in metric_values {
            if values.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&values);
            summary_rows.push(format!("{split},{predictor},{metric},{mean},{std}"));
        }
    }
    env.write_csv(
        "evaluate_summary.csv",
        "split,predictor,metric,mean,std",
        &summary_rows,
    )?;

    if !env.config.grouped_by.is_empty() {
        env.write_csv(
            "evaluate_grouped.csv",
            "split,predictor,key,group,n,rmse,r2",
            &grouped_rows,
        )?;
    }
    env.write_json("evaluate_folds.json", &per_fold)?;
    Ok(per_fold)
}

/// Train the configured MLP on the first L1 fold and dump per-task
/// embedding vectors.
pub fn cmd_embed_tasks(env: &Env, records_flag: Option<&Path>) -> Result<PathBuf> {
    let set = env.load_dataset(records_flag)?;
    let model = fit_embedding_mlp(env, &set)?;
    let embeddings = extract_task_embeddings(&model)?;
    let path = env.write_json("task_embeddings.json", &embeddings)?;
    let schema = build_schema(&set)?;
    env.write_json("feature_schema.json", &schema.slot_names())?;
    Ok(path)
}

fn fit_embedding_mlp(env: &Env, set: &RecordSet) -> Result<FittedModel> {
    let choice = env
        .config
        .predictors
        .iter()
        .find(|p| p.family == ModelFamily::Mlp)
        .cloned()
        .unwrap_or(PredictorChoice {
            family: ModelFamily::Mlp,
            hp: None,
            hp_search_samples: None,
        });
    let k = env.config.folds.unwrap_or(10);
    let folds = make_cv_folds(set, CvLevel::L1, k, seed::derive(env.seed, "split:l1"))?;
    let hp = resolve_hyperparams(env, set, &choice, &folds[0], "embed")?;
    let ctx = FitContext {
        set,
        train: &folds[0].train,
        dev: &folds[0].dev,
        seed: seed::derive(env.seed, "embed-mlp"),
    };
    predict::fit(ModelFamily::Mlp, &hp, &ctx)
}

/// Generate a synthetic dataset and its ground truth.
pub fn cmd_synth(env: &Env) -> Result<PathBuf> {
    let spec = env
        .config
        .synth
        .clone()
        .ok_or_else(|| Error::InvalidConfig("synth needs a config.synth section".into()))?;
    let (set, truth) = crate::synth::generate(&spec)?;
    env.ensure_out_dir()?;
    let path = env.out_dir.join("synth_records.csv");
    let mut buf = format!("# config_hash={}\n", env.hash).into_bytes();
    record::write_records(&mut buf, &set, record::FileFormat::Csv)?;
    fs::write(&path, buf)?;
    env.write_json("synth_ground_truth.json", &truth)?;
    log::info!("synth: wrote {} records", set.len());
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchRow {
    pub method: String,
    pub b: usize,
    pub mean_r2: f64,
    pub std_r2: f64,
}

struct SearchRun<'a> {
    env: &'a Env,
    set: &'a RecordSet,
    cfg: &'a SmallbenchConfig,
    inner: InnerPredictor,
    l_dev: String,
    l_test: String,
    rows: Vec<SearchRow>,
    /// best_of_n traces per budget, reused for task values.
    bon_traces: BTreeMap<usize, SearchTrace>,
    bon_candidates: BTreeMap<usize, SubsetCandidate>,
}

impl<'a> SearchRun<'a> {
    /// Score a candidate under the configured protocol and record a row.
    fn record(
        &mut self,
        method: &str,
        b: usize,
        candidates: &[SubsetCandidate],
    ) -> Result<()> {
        let mut scores = Vec::with_capacity(candidates.len());
        for (rep, cand) in candidates.iter().enumerate() {
            let seed_val = seed::derive(self.env.seed, &format!("eval:{method}:{b}:{rep}"));
            let score = match self.cfg.protocol {
                FoldMode::Full30 => {
                    evaluate_subset(self.set, cand, &self.inner, &self.set.families, seed_val)?
                        .mean_r2
                }
                FoldMode::SingleSearchFold => {
                    let fold = crate::splits::make_smallbench_fold(
                        self.set,
                        &cand.tasks,
                        &self.l_dev,
                        &self.l_test,
                    )?;
                    let ctx = FitContext {
                        set: self.set,
                        train: &fold.train,
                        dev: &fold.dev,
                        seed: seed_val,
                    };
                    let model = predict::fit(self.inner.family, &self.inner.hp, &ctx)?;
                    let preds = model.predict_indices(self.set, &fold.test)?;
                    let actuals: Vec<f64> = fold
                        .test
                        .iter()
                        .map(|&i| self.set.records[i].score_norm)
                        .collect();
                    metrics::r2(&preds, &actuals)?
                }
            };
            scores.push(score);
        }
        let (mean, std) = mean_std(&scores);
        self.rows.push(SearchRow {
            method: method.to_string(),
            b,
            mean_r2: mean,
            std_r2: std,
        });
        // Persist the chosen subsets alongside the scores.
        for (rep, cand) in candidates.iter().enumerate() {
            let suffix = if candidates.len() > 1 {
                format!("_{rep}")
            } else {
                String::new()
            };
            let rows: Vec<String> = cand.tasks.iter().cloned().collect();
            self.env
                .write_lines(&format!("subset_{method}_{b}{suffix}.txt"), &rows)?;
        }
        Ok(())
    }

    fn write_trace(&self, name: &str, trace: &SearchTrace) -> Result<()> {
        let lines: Vec<String> = trace
            .entries
            .iter()
            .map(|e| serde_json::to_string(e).map_err(Error::from))
            .collect::<Result<_>>()?;
        self.env.write_lines(&format!("trace_{name}.jsonl"), &lines)?;
        Ok(())
    }

    fn fixed_candidate(&mut self, method: &str, cand: SubsetCandidate) -> Result<()> {
        let missing = missing_tasks(&cand, self.set);
        if !missing.is_empty() {
            log::warn!(
                "{method}: {} listed tasks are not in the dataset: {missing:?}",
                missing.len()
            );
        }
        let tasks: std::collections::BTreeSet<String> = cand
            .tasks
            .iter()
            .filter(|t| !missing.contains(t))
            .cloned()
            .collect();
        let b = tasks.len();
        self.record(method, b, &[SubsetCandidate::new(tasks)])
    }

    fn objective(&self, seed_label: &str) -> SearchObjective<'a> {
        SearchObjective::new(
            self.set,
            &self.l_dev,
            &self.l_test,
            self.inner.clone(),
            seed::derive(self.env.seed, seed_label),
        )
    }

    fn ensure_bon_trace(&mut self, b: usize) -> Result<()> {
        if self.bon_traces.contains_key(&b) {
            return Ok(());
        }
        let obj = self.objective("search:best_of_n");
        let (cand, _, trace) = best_of_n(
            &self.set.tasks,
            b,
            self.cfg.best_of_samples,
            seed::derive(self.env.seed, &format!("best_of_n:{b}")),
            |c| obj.score(c),
        )?;
        self.write_trace(&format!("best_of_n_{b}"), &trace)?;
        self.bon_traces.insert(b, trace);
        // Stash the winning candidate so a later `best_of_n` method pass
        // does not repeat the search.
        self.bon_candidates.insert(b, cand);
        Ok(())
    }
}

/// Run the configured subset-construction methods over the budgets and
/// emit the results table, traces, and chosen subsets.
pub fn cmd_search(env: &Env, records_flag: Option<&Path>) -> Result<Vec<SearchRow>> {
    let cfg = env
        .config
        .smallbench
        .clone()
        .ok_or_else(|| Error::InvalidConfig("search needs a config.smallbench section".into()))?;
    if cfg.methods.is_empty() {
        return Err(Error::InvalidConfig("search needs at least one method".into()));
    }
    let set = env.load_dataset(records_flag)?;
    let inner = match &cfg.inner {
        Some(choice) => {
            let k = env.config.folds.unwrap_or(10);
            let folds = make_cv_folds(&set, CvLevel::L1, k, seed::derive(env.seed, "split:l1"))?;
            InnerPredictor {
                family: choice.family,
                hp: resolve_hyperparams(env, &set, choice, &folds[0], "search-inner")?,
            }
        }
        None => InnerPredictor::default(),
    };
    let (l_dev, l_test) = match &cfg.search_pair {
        Some((d, t)) => (d.clone(), t.clone()),
        None => SearchObjective::default_pair(&set)?,
    };

    let mut run = SearchRun {
        env,
        set: &set,
        cfg: &cfg,
        inner,
        l_dev,
        l_test,
        rows: Vec::new(),
        bon_traces: BTreeMap::new(),
        bon_candidates: BTreeMap::new(),
    };

    for method in &cfg.methods {
        log::info!("search: method {method}");
        match method.as_str() {
            "bblite" | "bbhard" => {
                let cand = load_fixed_subset(method)?;
                run.fixed_candidate(method, cand)?;
            }
            m if m.starts_with("file:") => {
                let cand = subset_from_file(Path::new(&m["file:".len()..]))?;
                run.fixed_candidate("file", cand)?;
            }
            "random" => {
                for &b in &cfg.budgets {
                    let mut candidates = Vec::new();
                    for rep in 0..cfg.repetitions {
                        let mut rng =
                            seed::rng(seed::derive(env.seed, &format!("random:{b}:{rep}")));
                        let cand: std::collections::BTreeSet<String> =
                            rand::seq::index::sample(&mut rng, set.tasks.len(), b)
                                .iter()
                                .map(|i| set.tasks[i].clone())
                                .collect();
                        candidates.push(SubsetCandidate::new(cand));
                    }
                    run.record("random", b, &candidates)?;
                }
            }
            "greedy" => {
                let obj = run.objective("search:greedy");
                let (results, trace) =
                    greedy_search(&set.tasks, &cfg.budgets, |c| obj.score(c))?;
                run.write_trace("greedy", &trace)?;
                for (b, cand) in results {
                    run.record("greedy", b, &[cand])?;
                }
            }
            "best_of_n" => {
                for &b in &cfg.budgets {
                    run.ensure_bon_trace(b)?;
                    let cand = run.bon_candidates[&b].clone();
                    run.record("best_of_n", b, &[cand])?;
                }
            }
            "beam" => {
                let obj = run.objective("search:beam");
                let (results, trace) = beam_search(
                    &set.tasks,
                    &cfg.budgets,
                    cfg.beam_width,
                    1.0 / cfg.beam_width as f64,
                    seed::derive(env.seed, "beam"),
                    |c| obj.score(c),
                )?;
                run.write_trace("beam", &trace)?;
                for (b, cand) in results {
                    run.record("beam", b, &[cand])?;
                }
            }
            "simulated_annealing" => {
                let schedule = cfg.anneal.unwrap_or_default();
                for &b in &cfg.budgets {
                    let obj = run.objective("search:sa");
                    let (cand, _, trace) = simulated_annealing(
                        &set.tasks,
                        b,
                        &schedule,
                        seed::derive(env.seed, &format!("sa:{b}")),
                        |c| obj.score(c),
                    )?;
                    run.write_trace(&format!("simulated_annealing_{b}"), &trace)?;
                    run.record("simulated_annealing", b, &[cand])?;
                }
            }
            "kmeans" => {
                let model = fit_embedding_mlp(env, &set)?;
                let embeddings = extract_task_embeddings(&model)?;
                for &b in &cfg.budgets {
                    let candidates: Vec<SubsetCandidate> = (0..cfg.repetitions)
                        .map(|rep| {
                            kmeans_select(
                                &embeddings,
                                b,
                                seed::derive(env.seed, &format!("kmeans:{b}:{rep}")),
                            )
                        })
                        .collect::<Result<_>>()?;
                    run.record("kmeans", b, &candidates)?;
                }
            }
            "kmeans_value" => {
                let model = fit_embedding_mlp(env, &set)?;
                let embeddings = extract_task_embeddings(&model)?;
                for &b in &cfg.budgets {
                    run.ensure_bon_trace(b)?;
                    let values = task_values(&run.bon_traces[&b])?;
                    let candidates: Vec<SubsetCandidate> = (0..cfg.repetitions)
                        .map(|rep| {
                            kmeans_value_select(
                                &embeddings,
                                &values,
                                b,
                                seed::derive(env.seed, &format!("kmeans_value:{b}:{rep}")),
                            )
                            .map(|s| s.candidate)
                        })
                        .collect::<Result<_>>()?;
                    run.record("kmeans_value", b, &candidates)?;
                }
            }
            other => {
                return Err(Error::InvalidConfig(format!("unknown search method `{other}`")))
            }
        }
    }

    let rows: Vec<String> = run
        .rows
        .iter()
        .map(|r| format!("{},{},{},{}", r.method, r.b, r.mean_r2, r.std_r2))
        .collect();
    env.write_csv("search_results.csv", "method,b,mean_r2,std_r2", &rows)?;
    env.write_json("search_results.json", &run.rows)?;
    Ok(run.rows)
}


/// Render result files into SVG charts plus the underlying CSV. Search
/// results (`method,b,mean_r2,std_r2`) become R²-vs-budget polylines;
/// evaluate summaries (`split,predictor,metric,mean,std`) become grouped
/// R² bars.
pub fn cmd_report(env: &Env, files: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if files.is_empty() {
        return Err(Error::InvalidConfig("report needs at least one results file".into()));
    }
    // Validate everything before writing anything.
    let mut parsed: Vec<(String, report::ChartData)> = Vec::new();
    for file in files {
        let data = report::parse_results_csv(file)?;
        let stem = file
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("results")
            .to_string();
        parsed.push((stem, data));
    }
    let mut written = Vec::new();
    for (stem, data) in parsed {
        let (svg, csv) = report::render(&data, &env.hash)?;
        env.ensure_out_dir()?;
        let svg_path = env.out_dir.join(format!("report_{stem}.svg"));
        fs::write(&svg_path, svg)?;
        let csv_path = env.out_dir.join(format!("report_{stem}.csv"));
        fs::write(&csv_path, csv)?;
        written.push(svg_path);
        written.push(csv_path);
    }
    Ok(written)
}
