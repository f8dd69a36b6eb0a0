//! Latency-penalized multi-task search reward.
//!
//! Accuracy is a nested geometric aggregation: a weighted geometric mean
//! of normalized metrics within each task, then an unweighted geometric
//! mean across tasks. The scalar reward is `acc * (latency / target)^beta`
//! with `beta = p` within the latency budget and `q` above it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{Direction, MetricReport, MetricScale, MetricSpec, TaskSpec, Transform};

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("normalized metric value must be in (0, 1], got {0}")]
    OutOfRange(f64),
    #[error("metric weights must not all be zero")]
    ZeroWeights,
    #[error("cannot aggregate an empty task list")]
    Empty,
    #[error("reward config invalid: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
}

const MIN_NORMALIZED: f64 = 1e-12;

/// Latency budget and penalty exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    /// Target latency budget, seconds.
    pub target_latency_s: f64,
    /// Exponent applied while within budget; 0 makes the budget a hard
    /// constraint with no bonus for being faster.
    #[serde(default)]
    pub p: f64,
    /// Exponent applied over budget.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Default transform folding error metrics into (0, 1].
    #[serde(default)]
    pub transform: Transform,
}

fn default_q() -> f64 {
    -0.07
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.target_latency_s > 0.0) {
            return Err(RewardError::BadConfig("target_latency_s must be > 0".into()));
        }
        if !(self.q <= self.p && self.p <= 0.0) {
            return Err(RewardError::BadConfig(
                "exponents must satisfy q <= p <= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Accuracy, latency, and the scalarized reward of one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub acc: f64,
    pub latency_s: f64,
    pub reward: f64,
    pub within_budget: bool,
}

/// Folds one raw metric value into (0, 1] so it can enter the geometric
/// product. Percent-scaled metrics are divided by 100 first.
pub fn normalize_metric(
    value: f64,
    direction: Direction,
    scale: MetricScale,
    transform: Transform,
) -> Result<f64, RewardError> {
    let value = match scale {
        MetricScale::Unit => value,
        MetricScale::Percent => value / 100.0,
    };
    let normalized = match direction {
        Direction::HigherBetter => match transform {
            Transform::Identity | Transform::Reciprocal | Transform::OneMinus => value,
        },
        Direction::LowerBetter => match transform {
            Transform::Reciprocal => 1.0 / (1.0 + value),
            Transform::OneMinus => (1.0 - value).max(MIN_NORMALIZED),
            Transform::Identity => value,
        },
    };
    if !(normalized > 0.0 && normalized <= 1.0) {
        return Err(RewardError::OutOfRange(normalized));
    }
    Ok(normalized)
}

/// Weighted geometric mean of normalized metric values within one task.
pub fn task_accuracy(weighted_values: &[(f64, f64)]) -> Result<f64, RewardError> {
    if weighted_values.is_empty() {
        return Err(RewardError::Empty);
    }
    let weight_sum: f64 = weighted_values.iter().map(|&(_, w)| w).sum();
    if weight_sum <= 0.0 {
        return Err(RewardError::ZeroWeights);
    }
    let mut log_sum = 0.0;
    for &(v, w) in weighted_values {
        if !(v > 0.0 && v <= 1.0) {
            return Err(RewardError::OutOfRange(v));
        }
        log_sum += w * v.ln();
    }
    Ok((log_sum / weight_sum).exp())
}

/// Unweighted geometric mean of the per-task accuracies.
pub fn multitask_accuracy(task_accs: &[f64]) -> Result<f64, RewardError> {
    if task_accs.is_empty() {
        return Err(RewardError::Empty);
    }
    let mut log_sum = 0.0;
    for &v in task_accs {
        if !(v > 0.0 && v <= 1.0) {
            return Err(RewardError::OutOfRange(v));
        }
        log_sum += v.ln();
    }
    Ok((log_sum / task_accs.len() as f64).exp())
}

/// Applies the latency penalty case split to a scalar accuracy.
pub fn reward(acc: f64, latency_s: f64, cfg: &RewardConfig) -> CandidateScore {
    let within_budget = latency_s <= cfg.target_latency_s;
    let beta = if within_budget { cfg.p } else { cfg.q };
    let reward = acc * (latency_s / cfg.target_latency_s).powf(beta);
    CandidateScore {
        acc,
        latency_s,
        reward,
        within_budget,
    }
}

fn metric_accuracy_inputs(
    report: &MetricReport,
    task: &TaskSpec,
    default_transform: Transform,
) -> Result<Vec<(f64, f64)>, RewardError> {
    task.metrics
        .iter()
        .map(|m: &MetricSpec| {
            let raw = report.get(&task.id, &m.id)?;
            let transform = m.transform.unwrap_or(default_transform);
            let v = normalize_metric(raw, m.direction, m.scale, transform)?;
            Ok((v, m.weight))
        })
        .collect()
}

/// Full scoring pipeline: normalize a metric report over the declared
/// tasks, aggregate, and apply the latency penalty.
pub fn score_report(
    report: &MetricReport,
    tasks: &[TaskSpec],
    latency_s: f64,
    cfg: &RewardConfig,
) -> Result<CandidateScore, RewardError> {
    let task_accs = tasks
        .iter()
        .map(|t| task_accuracy(&metric_accuracy_inputs(report, t, cfg.transform)?))
        .collect::<Result<Vec<_>, _>>()?;
    let acc = multitask_accuracy(&task_accs)?;
    Ok(reward(acc, latency_s, cfg))
}
