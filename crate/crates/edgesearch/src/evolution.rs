//! Aging (regularized) evolution over the genome space.
//!
//! Steady state: every step samples a tournament from the population
//! without replacement, mutates the winner, evaluates the child, and
//! evicts the oldest population member. Ties in a tournament go to the
//! older candidate. Sequential runs are bit-reproducible per seed.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluators::{CandidateScorer, EvalError};
use crate::metrics::{MetricReport, TaskSpec};
use crate::reward::CandidateScore;
use crate::search_space::{BackboneSkeleton, Genome};

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("evolution config invalid: {0}")]
    BadConfig(String),
    #[error("initial evaluation failed for `{key}`: {source}")]
    InitFailed { key: String, source: EvalError },
    #[error("checkpoint schema version {found} unsupported (expected {expected})")]
    BadSchema { expected: u32, found: u32 },
    #[error("checkpoint parse error: {0}")]
    BadCheckpoint(String),
    #[error("checkpoint sink error: {0}")]
    Sink(String),
}

/// Controller settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    #[serde(default = "default_population")]
    pub population_size: usize,
    #[serde(default = "default_tournament")]
    pub tournament_size: usize,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_population() -> usize {
    50
}
fn default_tournament() -> usize {
    10
}
fn default_generations() -> usize {
    2000
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: default_population(),
            tournament_size: default_tournament(),
            generations: default_generations(),
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        if self.population_size == 0 {
            return Err(EvolutionError::BadConfig("population_size must be >= 1".into()));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return Err(EvolutionError::BadConfig(
                "tournament_size must be in 1..=population_size".into(),
            ));
        }
        Ok(())
    }
}

/// One evaluated genome in the run history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedCandidate {
    pub genome: Genome,
    pub key: String,
    pub score: CandidateScore,
    pub metrics: MetricReport,
    pub birth_index: u64,
    pub failed: bool,
}

/// Population (FIFO over history indices) plus the append-only history
/// and the controller RNG.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchState {
    population: VecDeque<usize>,
    history: Vec<EvaluatedCandidate>,
    rng: ChaCha8Rng,
}

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Versioned on-disk form of a [`SearchState`].
#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    schema_version: u32,
    state: SearchState,
}

impl SearchState {
    pub fn population(&self) -> impl Iterator<Item = &EvaluatedCandidate> {
        self.population.iter().map(|&i| &self.history[i])
    }

    pub fn history(&self) -> &[EvaluatedCandidate] {
        &self.history
    }

    /// Steps taken after initialization.
    pub fn steps_taken(&self) -> usize {
        self.history.len() - self.population.len()
    }

    /// Best successful candidate so far, by reward then age.
    pub fn best(&self) -> Option<&EvaluatedCandidate> {
        self.history
            .iter()
            .filter(|c| !c.failed)
            .max_by(|a, b| {
                a.score
                    .reward
                    .partial_cmp(&b.score.reward)
                    .unwrap()
                    .then(b.birth_index.cmp(&a.birth_index))
            })
    }

    pub fn to_checkpoint_json(&self) -> String {
        serde_json::to_string_pretty(&Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            state: self.clone(),
        })
        .expect("state serializes")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self, EvolutionError> {
        let checkpoint: Checkpoint =
            serde_json::from_str(text).map_err(|e| EvolutionError::BadCheckpoint(e.to_string()))?;
        if checkpoint.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(EvolutionError::BadSchema {
                expected: CHECKPOINT_SCHEMA_VERSION,
                found: checkpoint.schema_version,
            });
        }
        Ok(checkpoint.state)
    }
}

fn failed_candidate(genome: Genome, birth_index: u64) -> EvaluatedCandidate {
    let key = genome.key();
    EvaluatedCandidate {
        genome,
        key,
        score: CandidateScore {
            acc: 0.0,
            latency_s: 0.0,
            reward: 0.0,
            within_budget: false,
        },
        metrics: MetricReport::new(),
        birth_index,
        failed: true,
    }
}

fn evaluate_into(genome: Genome, birth_index: u64, scorer: &dyn CandidateScorer) -> EvaluatedCandidate {
    match scorer.score(&genome) {
        Ok((metrics, score)) => {
            let key = genome.key();
            EvaluatedCandidate {
                genome,
                key,
                score,
                metrics,
                birth_index,
                failed: false,
            }
        }
        Err(_) => failed_candidate(genome, birth_index),
    }
}

/// Fills the population with random evaluated genomes. Unlike steps,
/// initialization aborts on evaluator failure.
pub fn initialize(
    cfg: &EvolutionConfig,
    space: &BackboneSkeleton,
    scorer: &dyn CandidateScorer,
) -> Result<SearchState, EvolutionError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.population_size);
    let mut population = VecDeque::with_capacity(cfg.population_size);
    for birth_index in 0..cfg.population_size {
        let genome = space.random_genome(&mut rng);
        let key = genome.key();
        let (metrics, score) = scorer
            .score(&genome)
            .map_err(|source| EvolutionError::InitFailed { key: key.clone(), source })?;
        population.push_back(history.len());
        history.push(EvaluatedCandidate {
            genome,
            key,
            score,
            metrics,
            birth_index: birth_index as u64,
            failed: false,
        });
    }
    Ok(SearchState {
        population,
        history,
        rng,
    })
}

/// Tournament winner: highest reward, ties to the lowest birth index.
fn select_parent<'a>(state: &'a SearchState, tournament: &[usize]) -> &'a EvaluatedCandidate {
    tournament
        .iter()
        .map(|&slot| &state.history[state.population[slot]])
        .max_by(|a, b| {
            a.score
                .reward
                .partial_cmp(&b.score.reward)
                .unwrap()
                .then(b.birth_index.cmp(&a.birth_index))
        })
        .expect("tournament is nonempty")
}

/// One steady-state step: tournament, mutate, evaluate, evict oldest.
/// Evaluator failures are recorded as reward-0 candidates and the search
/// continues.
pub fn step(
    state: &mut SearchState,
    cfg: &EvolutionConfig,
    space: &BackboneSkeleton,
    scorer: &dyn CandidateScorer,
) {
    let tournament =
        rand::seq::index::sample(&mut state.rng, state.population.len(), cfg.tournament_size)
            .into_vec();
    let parent_genome = select_parent(state, &tournament).genome.clone();
    let child_genome = space.mutate(&parent_genome, &mut state.rng);
    let birth_index = state.history.len() as u64;
    let child = evaluate_into(child_genome, birth_index, scorer);
    state.population.push_back(state.history.len());
    state.history.push(child);
    state.population.pop_front();
}

/// Speculative batch: selects `batch` parents against the current
/// population snapshot, evaluates the children concurrently, and commits
/// them in birth order. Breaks seed-determinism relative to sequential
/// stepping; the scorer must be safe for concurrent use.
pub fn step_batch(
    state: &mut SearchState,
    cfg: &EvolutionConfig,
    space: &BackboneSkeleton,
    scorer: &(dyn CandidateScorer + Sync),
    batch: usize,
) {
    let mut children = Vec::with_capacity(batch);
    for _ in 0..batch {
        let tournament =
            rand::seq::index::sample(&mut state.rng, state.population.len(), cfg.tournament_size)
                .into_vec();
        let parent_genome = select_parent(state, &tournament).genome.clone();
        children.push(space.mutate(&parent_genome, &mut state.rng));
    }
    let first_birth = state.history.len() as u64;
    let evaluated: Vec<EvaluatedCandidate> = std::thread::scope(|scope| {
        let handles: Vec<_> = children
            .into_iter()
            .enumerate()
            .map(|(i, genome)| {
                scope.spawn(move || evaluate_into(genome, first_birth + i as u64, scorer))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread")).collect()
    });
    for child in evaluated {
        state.population.push_back(state.history.len());
        state.history.push(child);
        state.population.pop_front();
    }
}

/// Periodic checkpoint observer: interval in steps plus the sink
/// invoked with the current state.
pub type CheckpointSink<'a> = (usize, &'a mut dyn FnMut(&SearchState) -> Result<(), String>);

/// Runs initialization plus `generations` steps, invoking the checkpoint
/// sink every `checkpoint_every` steps (and once at the end) when given.
pub fn run(
    cfg: &EvolutionConfig,
    space: &BackboneSkeleton,
    scorer: &dyn CandidateScorer,
    checkpoint: Option<CheckpointSink>,
) -> Result<SearchState, EvolutionError> {
    let state = initialize(cfg, space, scorer)?;
    resume(state, cfg, space, scorer, checkpoint)
}

/// Continues a (possibly checkpointed) state until `cfg.generations`
/// total steps have been taken.
pub fn resume(
    mut state: SearchState,
    cfg: &EvolutionConfig,
    space: &BackboneSkeleton,
    scorer: &dyn CandidateScorer,
    mut checkpoint: Option<CheckpointSink>,
) -> Result<SearchState, EvolutionError> {
    cfg.validate()?;
    while state.steps_taken() < cfg.generations {
        step(&mut state, cfg, space, scorer);
        if let Some((every, sink)) = checkpoint.as_mut() {
            if *every > 0 && state.steps_taken().is_multiple_of(*every) {
                sink(&state).map_err(EvolutionError::Sink)?;
            }
        }
    }
    if let Some((_, sink)) = checkpoint.as_mut() {
        sink(&state).map_err(EvolutionError::Sink)?;
    }
    Ok(state)
}

/// Candidates not dominated in (accuracy higher, latency lower), sorted
/// by latency. Failed evaluations are excluded.
pub fn pareto_front(history: &[EvaluatedCandidate]) -> Vec<&EvaluatedCandidate> {
    let mut alive: Vec<&EvaluatedCandidate> = history.iter().filter(|c| !c.failed).collect();
    alive.sort_by(|a, b| {
        a.score
            .latency_s
            .partial_cmp(&b.score.latency_s)
            .unwrap()
            .then(b.score.acc.partial_cmp(&a.score.acc).unwrap())
    });
    let mut front: Vec<&EvaluatedCandidate> = Vec::new();
    let mut best_acc = f64::NEG_INFINITY;
    let mut i = 0;
    while i < alive.len() {
        // group of equal latency
        let mut j = i;
        while j < alive.len() && alive[j].score.latency_s == alive[i].score.latency_s {
            j += 1;
        }
        let group_max = alive[i].score.acc; // group sorted acc-descending
        if group_max > best_acc {
            front.extend(
                alive[i..j]
                    .iter()
                    .filter(|c| c.score.acc == group_max)
                    .copied(),
            );
            best_acc = group_max;
        }
        i = j;
    }
    front
}

/// History log: one comma-separated record per candidate with a header
/// row. Metric columns follow the task specs in declaration order.
pub fn history_csv(history: &[EvaluatedCandidate], tasks: &[TaskSpec]) -> String {
    let mut header = String::from("birth_index,genome_key,failed");
    for task in tasks {
        for metric in &task.metrics {
            header.push_str(&format!(",{}.{}", task.id, metric.id));
        }
    }
    header.push_str(",acc,latency_s,reward,within_budget\n");
    let mut out = header;
    for c in history {
        out.push_str(&format!("{},{},{}", c.birth_index, c.key, c.failed));
        for task in tasks {
            for metric in &task.metrics {
                match c.metrics.get(&task.id, &metric.id) {
                    Ok(v) => out.push_str(&format!(",{v}")),
                    Err(_) => out.push(','),
                }
            }
        }
        out.push_str(&format!(
            ",{},{:e},{},{}\n",
            c.score.acc, c.score.latency_s, c.score.reward, c.score.within_budget
        ));
    }
    out
}
