//! Fixed-width feature encoding of experiment records, with train-only
//! standardization of the numeric slots.
//!
//! Layout, in order: one binary slot per model family, one per model
//! (family, n_param), 6 numeric parameter features (total / non-embedding /
//! FLOP-matched counts and their natural logs), one binary slot per task,
//! one per metric, and the shot count. Total width is
//! `|families| + |models| + 6 + |tasks| + |metrics| + 1`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::record::{ExperimentRecord, Metric, RecordSet};
use crate::{Error, Result};

pub const NUM_PARAM_FEATURES: usize = 6;

/// Slot layout derived from a dataset. Slot order is the sorted order of
/// the `RecordSet` index lists, so the schema is deterministic for a fixed
/// dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SchemaParts", into = "SchemaParts")]
pub struct FeatureSchema {
    pub families: Vec<String>,
    pub models: Vec<(String, u64)>,
    pub tasks: Vec<String>,
    pub metrics: Vec<Metric>,
    family_index: HashMap<String, usize>,
    model_index: HashMap<(String, u64), usize>,
    task_index: HashMap<String, usize>,
}

/// Canonical serialized form: the ordered slot lists. Lookup tables are
/// rebuilt on deserialization.
#[derive(Serialize, Deserialize)]
struct SchemaParts {
    families: Vec<String>,
    models: Vec<(String, u64)>,
    tasks: Vec<String>,
    metrics: Vec<Metric>,
}

impl From<SchemaParts> for FeatureSchema {
    fn from(p: SchemaParts) -> Self {
        FeatureSchema::from_parts(p.families, p.models, p.tasks, p.metrics)
    }
}

impl From<FeatureSchema> for SchemaParts {
    fn from(s: FeatureSchema) -> Self {
        SchemaParts {
            families: s.families,
            models: s.models,
            tasks: s.tasks,
            metrics: s.metrics,
        }
    }
}

/// Enumerate every distinct family, model, task, and metric in sorted
/// order. Errors on an empty dataset.
pub fn build_schema(set: &RecordSet) -> Result<FeatureSchema> {
    if set.is_empty() {
        return Err(Error::EmptyInput("cannot build a schema from an empty dataset".into()));
    }
    let mut metrics: Vec<Metric> = set.records.iter().map(|r| r.metric).collect();
    metrics.sort();
    metrics.dedup();
    let mut schema = FeatureSchema {
        families: set.families.clone(),
        models: set.models.clone(),
        tasks: set.tasks.clone(),
        metrics,
        family_index: HashMap::new(),
        model_index: HashMap::new(),
        task_index: HashMap::new(),
    };
    schema.rebuild_indexes();
    Ok(schema)
}

impl FeatureSchema {
    fn rebuild_indexes(&mut self) {
        self.family_index = self
            .families
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        self.model_index = self
            .models
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        self.task_index = self
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    /// Restore lookup tables after deserialization.
    pub fn from_parts(
        families: Vec<String>,
        models: Vec<(String, u64)>,
        tasks: Vec<String>,
        metrics: Vec<Metric>,
    ) -> FeatureSchema {
        let mut s = FeatureSchema {
            families,
            models,
            tasks,
            metrics,
            family_index: HashMap::new(),
            model_index: HashMap::new(),
            task_index: HashMap::new(),
        };
        s.rebuild_indexes();
        s
    }

    pub fn width(&self) -> usize {
        self.families.len()
            + self.models.len()
            + NUM_PARAM_FEATURES
            + self.tasks.len()
            + self.metrics.len()
            + 1
    }

    fn numeric_offset(&self) -> usize {
        self.families.len() + self.models.len()
    }

    fn task_offset(&self) -> usize {
        self.numeric_offset() + NUM_PARAM_FEATURES
    }

    fn metric_offset(&self) -> usize {
        self.task_offset() + self.tasks.len()
    }

    pub fn shot_slot(&self) -> usize {
        self.width() - 1
    }

    /// Indices of the slots the standardizer touches: the 6 parameter
    /// features plus the shot count.
    pub fn numeric_slots(&self) -> Vec<usize> {
        let off = self.numeric_offset();
        let mut slots: Vec<usize> = (off..off + NUM_PARAM_FEATURES).collect();
        slots.push(self.shot_slot());
        slots
    }

    /// Input slot index of a task's one-hot feature.
    pub fn task_slot(&self, task: &str) -> Option<usize> {
        self.task_index.get(task).map(|i| self.task_offset() + i)
    }

    /// Ordered human-readable slot names, for provenance output.
    pub fn slot_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for f in &self.families {
            names.push(format!("family:{f}"));
        }
        for (f, p) in &self.models {
            names.push(format!("model:{f}/{p}"));
        }
        names.push("n_param_total".into());
        names.push("n_param_nonembed".into());
        names.push("n_param_flopmatched".into());
        names.push("ln_n_param_total".into());
        names.push("ln_n_param_nonembed".into());
        names.push("ln_n_param_flopmatched".into());
        for t in &self.tasks {
            names.push(format!("task:{t}"));
        }
        for m in &self.metrics {
            names.push(format!("metric:{}", m.as_str()));
        }
        names.push("n_shot".into());
        names
    }

    /// Encode one record. Missing non-embedding / FLOP-matched counts fall
    /// back to the total count before the log is taken.
    pub fn encode(&self, record: &ExperimentRecord) -> Result<Vec<f64>> {
        let unknown = |kind: &str, value: String| Error::UnknownCategorical {
            kind: kind.to_string(),
            value,
        };
        let fam = *self
            .family_index
            .get(&record.model_family)
            .ok_or_else(|| unknown("family", record.model_family.clone()))?;
        let model_key = (record.model_family.clone(), record.n_param_total);
        let model = *self
            .model_index
            .get(&model_key)
            .ok_or_else(|| unknown("model", format!("{}/{}", model_key.0, model_key.1)))?;
        let task = *self
            .task_index
            .get(&record.task)
            .ok_or_else(|| unknown("task", record.task.clone()))?;
        let metric = self
            .metrics
            .iter()
            .position(|m| *m == record.metric)
            .ok_or_else(|| unknown("metric", record.metric.as_str().to_string()))?;

        let mut v = vec![0.0; self.width()];
        v[fam] = 1.0;
        v[self.families.len() + model] = 1.0;

        let total = record.n_param_total as f64;
        let nonembed = record.n_param_nonembed.unwrap_or(record.n_param_total) as f64;
        let flop = record.n_param_flopmatched.unwrap_or(record.n_param_total) as f64;
        let off = self.numeric_offset();
        v[off] = total;
        v[off + 1] = nonembed;
        v[off + 2] = flop;
        v[off + 3] = total.ln();
        v[off + 4] = nonembed.ln();
        v[off + 5] = flop.ln();

        v[self.task_offset() + task] = 1.0;
        v[self.metric_offset() + metric] = 1.0;
        v[self.shot_slot()] = record.n_shot as f64;
        Ok(v)
    }
}

/// Per-slot mean and standard deviation fitted on training rows only.
/// Standard deviation is the population (1/n) form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub slots: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Fit standardization statistics for the schema's numeric slots over the
/// given training rows.
pub fn fit_standardizer(schema: &FeatureSchema, rows: &[Vec<f64>]) -> Result<Standardizer> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("standardizer fit needs at least one row".into()));
    }
    let slots = schema.numeric_slots();
    let n = rows.len() as f64;
    let mut means = Vec::with_capacity(slots.len());
    let mut stds = Vec::with_capacity(slots.len());
    for &s in &slots {
        let mean = rows.iter().map(|r| r[s]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[s] - mean) * (r[s] - mean)).sum::<f64>() / n;
        means.push(mean);
        stds.push(var.sqrt());
    }
    Ok(Standardizer { slots, means, stds })
}

impl Standardizer {
    /// Apply the frozen statistics to one row in place. Degenerate
    /// (zero-std) columns map to 0; binary slots are untouched.
    pub fn transform(&self, row: &mut [f64]) {
        for (i, &s) in self.slots.iter().enumerate() {
            if self.stds[i] > 0.0 {
                row[s] = (row[s] - self.means[i]) / self.stds[i];
            } else {
                row[s] = 0.0;
            }
        }
    }

    pub fn transformed(&self, mut row: Vec<f64>) -> Vec<f64> {
        self.transform(&mut row);
        row
    }
}
