//! Pluggable metric providers for candidate architectures, plus the
//! scoring pipeline that turns a genome into a scalar reward.
//!
//! The engine itself never trains networks. Proxy-task results either
//! come from the deterministic surrogate (testing, demos) or from a
//! lookup table ingested from externally produced measurements.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{architecture_cost, CostError, HardwareProfile};
use crate::metrics::{Direction, MetricReport, MetricScale, TaskSpec};
use crate::reward::{score_report, CandidateScore, RewardConfig, RewardError};
use crate::search_space::{BackboneSkeleton, Genome, LayerType};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no lookup entry for genome `{key}`")]
    Miss { key: String },
    #[error("lookup table parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate lookup key `{key}` at line {line}")]
    DuplicateKey { key: String, line: usize },
    #[error("evaluation failed for `{key}`: {reason}")]
    Failed { key: String, reason: String },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// Result of evaluating one candidate: raw task metrics and an optional
/// measured latency that overrides the analytical cost model.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    pub latency_override_s: Option<f64>,
}

/// A provider of task metrics for candidate genomes. Implementations must
/// be deterministic, or deterministic given an explicit seed, and safe
/// for concurrent invocation.
pub trait Evaluator: Sync {
    fn evaluate(&self, genome: &Genome) -> Result<Evaluation, EvalError>;
}

/// Deterministic synthetic evaluator: a logistic function of an additive
/// score over the genome's decision fields, mapped into each metric's
/// declared range, with optional seeded Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Contribution weight of the layer-type decision (IBN 0, fused 1).
    #[serde(default)]
    pub layer_type_weight: f64,
    /// Contribution weight of the kernel decision (k3 0, k5 1).
    #[serde(default)]
    pub kernel_weight: f64,
    /// Contribution weight of the channel multiplier (its numeric value).
    #[serde(default)]
    pub multiplier_weight: f64,
    /// Contribution weight of the expansion decision (e3 0, e6 1).
    #[serde(default)]
    pub expansion_weight: f64,
    /// Constant added to the summed contributions before the logistic.
    #[serde(default)]
    pub bias: f64,
    /// Gaussian noise applied in unit score space, i.e. as a fraction of
    /// each metric's range. Zero disables noise.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            layer_type_weight: 0.4,
            kernel_weight: 0.2,
            multiplier_weight: 0.6,
            expansion_weight: 0.3,
            bias: -1.5,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

pub struct SurrogateEvaluator {
    cfg: SurrogateConfig,
    tasks: Vec<TaskSpec>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

impl SurrogateEvaluator {
    pub fn new(cfg: SurrogateConfig, tasks: Vec<TaskSpec>) -> Self {
        SurrogateEvaluator { cfg, tasks }
    }

    /// Noise-free unit score in (0, 1); monotone in every positive-weight
    /// decision, so the argmax over any enumerable space is the per-field
    /// greedy choice.
    pub fn deterministic_score(&self, genome: &Genome) -> f64 {
        let total: f64 = genome
            .choices()
            .iter()
            .map(|c| {
                let lt = match c.layer_type {
                    LayerType::Ibn => 0.0,
                    LayerType::FusedIbn => 1.0,
                };
                let k = if c.kernel.size() == 5 { 1.0 } else { 0.0 };
                let e = if c.expansion.ratio() == 6 { 1.0 } else { 0.0 };
                self.cfg.layer_type_weight * lt
                    + self.cfg.kernel_weight * k
                    + self.cfg.multiplier_weight * c.multiplier.as_f64()
                    + self.cfg.expansion_weight * e
            })
            .sum();
        logistic(self.cfg.bias + total)
    }
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(&self, genome: &Genome) -> Result<Evaluation, EvalError> {
        let s = self.deterministic_score(genome);
        // noise is a pure function of (seed, genome); re-evaluating the
        // same candidate always yields the same report
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.cfg.seed ^ fnv1a(genome.key().as_bytes()));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut report = MetricReport::new();
        for task in &self.tasks {
            for metric in &task.metrics {
                let noisy = if self.cfg.noise_sigma > 0.0 {
                    (s + self.cfg.noise_sigma * normal.sample(&mut rng)).clamp(1e-6, 1.0 - 1e-6)
                } else {
                    s
                };
                let unit_value = match metric.direction {
                    Direction::HigherBetter => noisy,
                    Direction::LowerBetter => 1.0 - noisy,
                };
                let value = match metric.scale {
                    MetricScale::Unit => unit_value,
                    MetricScale::Percent => unit_value * 100.0,
                };
                report.insert(&task.id, &metric.id, value);
            }
        }
        Ok(Evaluation {
            report,
            latency_override_s: None,
        })
    }
}

/// Key used in lookup tables to carry a measured latency for a candidate.
pub const LATENCY_TASK: &str = "latency";
pub const LATENCY_METRIC: &str = "seconds";

/// Exact-match evaluator over an ingested table of externally measured
/// metrics, keyed by canonical genome key.
pub struct LookupEvaluator {
    entries: BTreeMap<String, Evaluation>,
}

impl LookupEvaluator {
    /// Parses the documented table format: a header line, then one record
    /// per candidate of the form `key,task,metric,value[,task,metric,value...]`.
    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(EvalError::Parse {
            line: 1,
            reason: "empty lookup table".into(),
        })?;
        if header.trim() != "genome_key,task,metric,value" {
            return Err(EvalError::Parse {
                line: 1,
                reason: format!("unexpected header `{header}`"),
            });
        }
        let mut entries = BTreeMap::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 4 || !(fields.len() - 1).is_multiple_of(3) {
                return Err(EvalError::Parse {
                    line: lineno,
                    reason: "expected a key followed by (task, metric, value) triples".into(),
                });
            }
            let key = fields[0].to_string();
            let mut report = MetricReport::new();
            let mut latency = None;
            for triple in fields[1..].chunks(3) {
                let value = triple[2].parse::<f64>().map_err(|_| EvalError::Parse {
                    line: lineno,
                    reason: format!("bad value `{}`", triple[2]),
                })?;
                if triple[0] == LATENCY_TASK && triple[1] == LATENCY_METRIC {
                    latency = Some(value);
                } else {
                    report.insert(triple[0], triple[1], value);
                }
            }
            if entries.contains_key(&key) {
                return Err(EvalError::DuplicateKey { key, line: lineno });
            }
            entries.insert(
                key,
                Evaluation {
                    report,
                    latency_override_s: latency,
                },
            );
        }
        Ok(LookupEvaluator { entries })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Parse {
            line: 0,
            reason: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_csv(&text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Evaluator for LookupEvaluator {
    fn evaluate(&self, genome: &Genome) -> Result<Evaluation, EvalError> {
        let key = genome.key();
        self.entries
            .get(&key)
            .cloned()
            .ok_or(EvalError::Miss { key })
    }
}

/// Maps a genome to `(metrics, score)`: the contract the evolution
/// controller drives.
pub trait CandidateScorer: Sync {
    fn score(&self, genome: &Genome) -> Result<(MetricReport, CandidateScore), EvalError>;
}

/// The full scoring pipeline: evaluate metrics, estimate latency with the
/// analytical cost model (unless the evaluator measured one), normalize,
/// aggregate, and apply the latency penalty.
pub struct PipelineScorer<E> {
    pub evaluator: E,
    pub skeleton: BackboneSkeleton,
    pub tasks: Vec<TaskSpec>,
    pub hardware: HardwareProfile,
    pub reward: RewardConfig,
    pub input_hw: (u32, u32),
}

impl<E: Evaluator> PipelineScorer<E> {
    pub fn latency_for(&self, genome: &Genome) -> Result<f64, EvalError> {
        let arch = self.skeleton.decode(genome);
        Ok(architecture_cost(&arch, self.input_hw, &self.hardware)?.total_latency_s)
    }
}

impl<E: Evaluator> CandidateScorer for PipelineScorer<E> {
    fn score(&self, genome: &Genome) -> Result<(MetricReport, CandidateScore), EvalError> {
        let evaluation = self.evaluator.evaluate(genome)?;
        let latency_s = match evaluation.latency_override_s {
            Some(measured) => measured,
            None => self.latency_for(genome)?,
        };
        let score = score_report(&evaluation.report, &self.tasks, latency_s, &self.reward)?;
        Ok((evaluation.report, score))
    }
}
