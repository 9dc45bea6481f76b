use thiserror::Error;

/// Crate-wide error type. Variants are grouped by where they surface:
/// data loading, split construction, model fitting, and numeric evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row at line {line}: {msg}")]
    MalformedRow { line: u64, msg: String },

    #[error("duplicate record key ({family}, {n_param}, {task}, {n_shot})")]
    DuplicateKey {
        family: String,
        n_param: u64,
        task: String,
        n_shot: u32,
    },

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("score {score} out of legal range [{lo}, {hi}] for metric {metric} at line {line}")]
    ScoreOutOfRange {
        line: u64,
        metric: String,
        score: f64,
        lo: f64,
        hi: f64,
    },

    #[error("task `{0}` has no entry in the task-metadata file")]
    MissingTaskMetadata(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{got} groups available but {want} folds requested")]
    TooFewGroups { got: usize, want: usize },

    #[error("held-out slice is empty: {0}")]
    EmptyHoldout(String),

    #[error("empty test cell: {0}")]
    EmptyTestCell(String),

    #[error("unknown categorical value `{value}` for slot kind {kind}")]
    UnknownCategorical { kind: String, value: String },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparam(String),

    #[error("operation requires an MLP model, got {0}")]
    NotAnMlp(String),

    #[error("length mismatch: {left} predictions vs {right} actuals")]
    LengthMismatch { left: usize, right: usize },

    #[error("total variance is zero; R^2 is undefined")]
    ZeroVariance,

    #[error("no group has a defined correlation")]
    NoDefinedGroups,

    #[error("emergent grouping requested but no emergent-task file is loaded")]
    NoEmergentTasks,

    #[error("models share no scored task")]
    EmptySharedTasks,

    #[error("budget {budget} exceeds task count {tasks}")]
    BudgetTooLarge { budget: usize, tasks: usize },

    #[error("{0} subsets exceed the brute-force limit of {1}")]
    CombinatorialLimit(u128, u128),

    #[error("unknown fixed subset `{0}` (expected bblite or bbhard)")]
    UnknownSubsetName(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("results schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
