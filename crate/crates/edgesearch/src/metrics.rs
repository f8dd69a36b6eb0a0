//! Relative-delta scoring of a multi-task model against single-task
//! baselines: per-metric percent deltas (sign-corrected for error
//! metrics), per-task means, and the overall mean across tasks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("baseline value for a delta must be nonzero")]
    ZeroBaseline,
    #[error("cannot average an empty list of deltas")]
    Empty,
    #[error("metric value missing for task `{task}` metric `{metric}`")]
    Missing { task: String, metric: String },
    #[error("report parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Whether larger values of a metric are better (accuracy-like) or worse
/// (error-like).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// Declared scale of a metric's raw values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricScale {
    /// Values in [0, 1] (or unbounded errors).
    #[default]
    Unit,
    /// Values reported on a 0-100 scale, e.g. mIoU percentages.
    Percent,
}

/// How an error metric is folded into the (0, 1] range before entering
/// the geometric accuracy product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// v -> 1 / (1 + v); total for any nonnegative error.
    #[default]
    Reciprocal,
    /// v -> max(eps, 1 - v); for errors known to be bounded by 1.
    OneMinus,
    /// v -> v; for values already in (0, 1].
    Identity,
}

/// Identity, direction, and reward weight of one evaluation metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub id: String,
    pub direction: Direction,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub scale: MetricScale,
    /// Overrides the reward config's default transform for this metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Transform>,
}

fn default_weight() -> f64 {
    1.0
}

/// A task and its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    #[serde(rename = "metric")]
    pub metrics: Vec<MetricSpec>,
}

/// Raw metric values keyed by task id, then metric id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    values: BTreeMap<String, BTreeMap<String, f64>>,
}

impl MetricReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task: &str, metric: &str, value: f64) {
        self.values
            .entry(task.to_string())
            .or_default()
            .insert(metric.to_string(), value);
    }

    pub fn get(&self, task: &str, metric: &str) -> Result<f64, MetricError> {
        self.values
            .get(task)
            .and_then(|m| m.get(metric))
            .copied()
            .ok_or_else(|| MetricError::Missing {
                task: task.to_string(),
                metric: metric.to_string(),
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.values.iter().flat_map(|(task, metrics)| {
            metrics
                .iter()
                .map(move |(metric, &v)| (task.as_str(), metric.as_str(), v))
        })
    }

    pub fn len(&self) -> usize {
        self.values.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Comma-separated export: `task,metric,value` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,metric,value\n");
        for (task, metric, value) in self.iter() {
            out.push_str(&format!("{task},{metric},{value}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, MetricError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MetricError::Parse {
            line: 1,
            reason: "empty report".into(),
        })?;
        if header.trim() != "task,metric,value" {
            return Err(MetricError::Parse {
                line: 1,
                reason: format!("unexpected header `{header}`"),
            });
        }
        let mut report = MetricReport::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(MetricError::Parse {
                    line: i + 1,
                    reason: "expected 3 fields".into(),
                });
            }
            let value = fields[2].parse::<f64>().map_err(|_| MetricError::Parse {
                line: i + 1,
                reason: format!("bad value `{}`", fields[2]),
            })?;
            report.insert(fields[0], fields[1], value);
        }
        Ok(report)
    }
}

/// Percent delta of `value` against `baseline`, sign-corrected so that an
/// improvement is always positive.
pub fn delta_metric(value: f64, baseline: f64, direction: Direction) -> Result<f64, MetricError> {
    if baseline == 0.0 {
        return Err(MetricError::ZeroBaseline);
    }
    let sign = match direction {
        Direction::HigherBetter => 1.0,
        Direction::LowerBetter => -1.0,
    };
    Ok(sign * (value - baseline) / baseline * 100.0)
}

/// Per-task score: arithmetic mean of its metric deltas.
pub fn delta_task(deltas: &[f64]) -> Result<f64, MetricError> {
    if deltas.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(deltas.iter().sum::<f64>() / deltas.len() as f64)
}

/// Overall score: arithmetic mean of the per-task scores.
pub fn delta_overall(task_deltas: &[f64]) -> Result<f64, MetricError> {
    delta_task(task_deltas)
}

/// Full delta table for a model report against a baseline report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub per_metric: Vec<MetricDelta>,
    pub per_task: Vec<TaskDelta>,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub baseline: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDelta {
    pub task: String,
    pub delta: f64,
}

/// Computes every per-metric delta, the per-task means, and the overall
/// mean for the declared tasks.
pub fn delta_table(
    model: &MetricReport,
    baseline: &MetricReport,
    tasks: &[TaskSpec],
) -> Result<DeltaTable, MetricError> {
    let mut per_metric = Vec::new();
    let mut per_task = Vec::new();
    for task in tasks {
        let mut deltas = Vec::new();
        for metric in &task.metrics {
            let value = model.get(&task.id, &metric.id)?;
            let base = baseline.get(&task.id, &metric.id)?;
            let delta = delta_metric(value, base, metric.direction)?;
            deltas.push(delta);
            per_metric.push(MetricDelta {
                task: task.id.clone(),
                metric: metric.id.clone(),
                value,
                baseline: base,
                delta,
            });
        }
        per_task.push(TaskDelta {
            task: task.id.clone(),
            delta: delta_task(&deltas)?,
        });
    }
    let overall = delta_overall(&per_task.iter().map(|t| t.delta).collect::<Vec<_>>())?;
    Ok(DeltaTable {
        per_metric,
        per_task,
        overall,
    })
}

impl DeltaTable {
    /// Structured-text rendering: metric rows, task rows, then the
    /// overall row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,task,metric,value,baseline,delta\n");
        for m in &self.per_metric {
            out.push_str(&format!(
                "metric,{},{},{},{},{:.4}\n",
                m.task, m.metric, m.value, m.baseline, m.delta
            ));
        }
        for t in &self.per_task {
            out.push_str(&format!("task,{},,,,{:.4}\n", t.task, t.delta));
        }
        out.push_str(&format!("overall,,,,,{:.4}\n", self.overall));
        out
    }
}
