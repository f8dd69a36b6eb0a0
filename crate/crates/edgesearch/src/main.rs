//! Command-line entry point: searches, decodes, cost reports, reward
//! evaluation, delta tables, and the synthetic depth-loss study.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use edgesearch::config::{EngineConfig, EvaluatorConfig};
use edgesearch::cost::{architecture_cost, HardwareProfile};
use edgesearch::depth::{toy_depth_experiment, DepthScenario};
use edgesearch::evaluators::{
    CandidateScorer, LookupEvaluator, PipelineScorer, SurrogateConfig, SurrogateEvaluator,
};
use edgesearch::evolution::{self, SearchState};
use edgesearch::metrics::{delta_table, MetricReport, TaskSpec};
use edgesearch::reward::score_report;
use edgesearch::search_space::{Architecture, ArchRow, BackboneSkeleton, Genome, LayerKind};

const EXIT_USAGE: i32 = 1;
const EXIT_RUNTIME: i32 = 2;
const CHECKPOINT_EVERY: usize = 25;

#[derive(Parser)]
#[command(name = "edgesearch", version, about = "Hardware-aware architecture search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an evolutionary search from an engine config.
    Search {
        config: PathBuf,
        /// Override the config's controller seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's total step budget.
        #[arg(long)]
        generations: Option<usize>,
        /// Continue from a checkpoint file instead of a fresh population.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Speculative children evaluated per batch (breaks seed
        /// determinism relative to sequential runs).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Decode a genome key to its architecture table.
    Decode { genome_key: String },
    /// Analytical cost report for a genome.
    Cost {
        genome_key: String,
        /// Hardware profile TOML; defaults to the built-in profile.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Input resolution as HxW.
        #[arg(long, default_value = "256x256")]
        resolution: String,
        /// Report only the fixed stem layer.
        #[arg(long)]
        stem_only: bool,
    },
    /// Score a metric report file at a given latency.
    RewardEval {
        report: PathBuf,
        #[arg(long)]
        latency: f64,
        /// Engine config providing the task specs and reward settings.
        #[arg(long)]
        config: PathBuf,
    },
    /// Delta table of a model report against a baseline report.
    Metrics {
        model: PathBuf,
        baseline: PathBuf,
        /// Engine config (or any TOML with the same `[[task]]` layout)
        /// declaring metric directions.
        specs: PathBuf,
    },
    /// Synthetic depth-regression study: plain absolute error vs the
    /// composite loss, across seeds.
    JaredSim {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Scenario TOML overriding the built-in constants.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

/// An error carrying its process exit code.
struct CliError {
    code: i32,
    error: anyhow::Error,
}

fn usage<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError {
        code: EXIT_USAGE,
        error: e.into(),
    }
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError {
        code: EXIT_RUNTIME,
        error: e.into(),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits; everything else is usage
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Search {
            config,
            seed,
            generations,
            resume,
            parallel,
        } => cmd_search(&config, seed, generations, resume.as_deref(), parallel),
        Command::Decode { genome_key } => cmd_decode(&genome_key),
        Command::Cost {
            genome_key,
            profile,
            resolution,
            stem_only,
        } => cmd_cost(&genome_key, profile.as_deref(), &resolution, stem_only),
        Command::RewardEval {
            report,
            latency,
            config,
        } => cmd_reward_eval(&report, latency, &config),
        Command::Metrics {
            model,
            baseline,
            specs,
        } => cmd_metrics(&model, &baseline, &specs),
        Command::JaredSim {
            seeds,
            lambda,
            scenario,
        } => cmd_jared_sim(seeds, lambda, scenario.as_deref()),
    };
    if let Err(CliError { code, error }) = result {
        eprintln!("error: {error:#}");
        std::process::exit(code);
    }
}

/// Writes via a temp file in the same directory plus rename, so readers
/// never observe a partial file.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Everything needed to reproduce and locate a run's artifacts.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    engine_version: String,
    config: EngineConfig,
    seed: u64,
    generations: usize,
    parallel: usize,
    started_unix_s: u64,
    finished_unix_s: u64,
    history_path: PathBuf,
    checkpoint_path: PathBuf,
    best_architecture_path: PathBuf,
    pareto_path: PathBuf,
    best_genome_key: Option<String>,
    best_reward: Option<f64>,
}

fn build_scorer(cfg: &EngineConfig) -> Result<Box<dyn CandidateScorer>, CliError> {
    let skeleton = BackboneSkeleton::full();
    let input_hw = (cfg.input_resolution[0], cfg.input_resolution[1]);
    match &cfg.evaluator {
        EvaluatorConfig::Surrogate { noise_sigma, seed } => {
            let surrogate = SurrogateEvaluator::new(
                SurrogateConfig {
                    noise_sigma: *noise_sigma,
                    seed: *seed,
                    ..SurrogateConfig::default()
                },
                cfg.tasks.clone(),
            );
            Ok(Box::new(PipelineScorer {
                evaluator: surrogate,
                skeleton,
                tasks: cfg.tasks.clone(),
                hardware: cfg.hardware.clone(),
                reward: cfg.reward.clone(),
                input_hw,
            }))
        }
        EvaluatorConfig::Lookup { path } => {
            let table = LookupEvaluator::from_file(path).map_err(usage)?;
            Ok(Box::new(PipelineScorer {
                evaluator: table,
                skeleton,
                tasks: cfg.tasks.clone(),
                hardware: cfg.hardware.clone(),
                reward: cfg.reward.clone(),
                input_hw,
            }))
        }
    }
}

fn pareto_csv(state: &SearchState) -> String {
    let mut out = String::from("genome_key,acc,latency_s,reward,birth_index\n");
    for c in evolution::pareto_front(state.history()) {
        out.push_str(&format!(
            "{},{},{:e},{},{}\n",
            c.key, c.score.acc, c.score.latency_s, c.score.reward, c.birth_index
        ));
    }
    out
}

fn cmd_search(
    config_path: &Path,
    seed: Option<u64>,
    generations: Option<usize>,
    resume_from: Option<&Path>,
    parallel: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = EngineConfig::load(config_path).map_err(usage)?;
    if let Some(seed) = seed {
        cfg.evolution.seed = seed;
    }
    if let Some(generations) = generations {
        cfg.evolution.generations = generations;
    }
    let parallel = parallel.unwrap_or(1).max(1);
    let scorer = build_scorer(&cfg)?;
    let space = BackboneSkeleton::full();
    let evo = cfg.evolution.clone();

    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating {}", cfg.output_dir.display()))
        .map_err(runtime)?;
    let history_path = cfg.output_dir.join("history.csv");
    let checkpoint_path = cfg.output_dir.join("checkpoint.json");
    let best_architecture_path = cfg.output_dir.join("best_architecture.csv");
    let pareto_path = cfg.output_dir.join("pareto.csv");
    let manifest_path = cfg.output_dir.join("manifest.json");
    let started_unix_s = unix_now();

    let mut state = match resume_from {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading checkpoint {}", path.display()))
                .map_err(runtime)?;
            SearchState::from_checkpoint_json(&text).map_err(runtime)?
        }
        None => evolution::initialize(&evo, &space, scorer.as_ref()).map_err(runtime)?,
    };

    let mut sink = |s: &SearchState| -> Result<(), String> {
        write_atomic(&checkpoint_path, &s.to_checkpoint_json()).map_err(|e| e.to_string())
    };
    if parallel <= 1 {
        state = evolution::resume(
            state,
            &evo,
            &space,
            scorer.as_ref(),
            Some((CHECKPOINT_EVERY, &mut sink)),
        )
        .map_err(runtime)?;
    } else {
        while state.steps_taken() < evo.generations {
            let batch = parallel.min(evo.generations - state.steps_taken());
            evolution::step_batch(&mut state, &evo, &space, scorer.as_ref(), batch);
            if state.steps_taken() % CHECKPOINT_EVERY < batch {
                sink(&state).map_err(|e| runtime(anyhow!(e)))?;
            }
        }
        sink(&state).map_err(|e| runtime(anyhow!(e)))?;
    }

    write_atomic(&history_path, &evolution::history_csv(state.history(), &cfg.tasks))
        .map_err(runtime)?;
    write_atomic(&pareto_path, &pareto_csv(&state)).map_err(runtime)?;

    let best = state.best();
    if let Some(best) = best {
        let arch = space.decode(&best.genome);
        write_atomic(&best_architecture_path, &arch.to_csv()).map_err(runtime)?;
    }

    let manifest = RunManifest {
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seed: evo.seed,
        generations: evo.generations,
        parallel,
        started_unix_s,
        finished_unix_s: unix_now(),
        history_path: history_path.clone(),
        checkpoint_path: checkpoint_path.clone(),
        best_architecture_path: best_architecture_path.clone(),
        pareto_path: pareto_path.clone(),
        best_genome_key: best.map(|b| b.key.clone()),
        best_reward: best.map(|b| b.score.reward),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .context("serializing manifest")
        .map_err(runtime)?;
    write_atomic(&manifest_path, &manifest_json).map_err(runtime)?;

    println!(
        "search complete: {} candidates evaluated ({} steps), artifacts in {}",
        state.history().len(),
        state.steps_taken(),
        cfg.output_dir.display()
    );
    if let Some(best) = best {
        println!("best: {} reward={:.6}", best.key, best.score.reward);
    }
    Ok(())
}

fn cmd_decode(genome_key: &str) -> Result<(), CliError> {
    let space = BackboneSkeleton::full();
    let genome = Genome::parse_key(genome_key, space.blocks()).map_err(usage)?;
    print!("{}", space.decode(&genome).to_csv());
    Ok(())
}

fn parse_resolution(text: &str) -> anyhow::Result<(u32, u32)> {
    let (h, w) = text
        .split_once('x')
        .ok_or_else(|| anyhow!("resolution must be HxW, got `{text}`"))?;
    Ok((
        h.parse().map_err(|_| anyhow!("bad height `{h}`"))?,
        w.parse().map_err(|_| anyhow!("bad width `{w}`"))?,
    ))
}

fn cmd_cost(
    genome_key: &str,
    profile: Option<&Path>,
    resolution: &str,
    stem_only: bool,
) -> Result<(), CliError> {
    let hw = match profile {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading profile {}", path.display()))
                .map_err(usage)?;
            HardwareProfile::from_toml(&text)
                .map_err(|e| usage(anyhow!("profile invalid: {e}")))?
        }
        None => HardwareProfile::default(),
    };
    let input_hw = parse_resolution(resolution).map_err(usage)?;
    let space = BackboneSkeleton::full();
    let genome = Genome::parse_key(genome_key, space.blocks()).map_err(usage)?;
    let mut arch = space.decode(&genome);
    if stem_only {
        arch = Architecture {
            rows: vec![ArchRow {
                expansion: None,
                ..arch.rows[0].clone()
            }],
        };
        debug_assert_eq!(arch.rows[0].layer, LayerKind::Conv2d);
    }
    let report = architecture_cost(&arch, input_hw, &hw).map_err(runtime)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn cmd_reward_eval(report_path: &Path, latency: f64, config_path: &Path) -> Result<(), CliError> {
    let cfg = EngineConfig::load(config_path).map_err(usage)?;
    let text = std::fs::read_to_string(report_path)
        .with_context(|| format!("reading report {}", report_path.display()))
        .map_err(usage)?;
    let report = MetricReport::from_csv(&text).map_err(usage)?;
    let score = score_report(&report, &cfg.tasks, latency, &cfg.reward).map_err(runtime)?;
    println!("acc,{}", score.acc);
    println!("latency_s,{:e}", score.latency_s);
    println!("reward,{}", score.reward);
    println!("within_budget,{}", score.within_budget);
    Ok(())
}

/// Task declarations standalone file: the `[[task]]` subset of an engine
/// config (a full engine config also parses).
#[derive(Deserialize)]
struct TaskSpecsFile {
    #[serde(rename = "task")]
    tasks: Vec<TaskSpec>,
}

fn cmd_metrics(model: &Path, baseline: &Path, specs: &Path) -> Result<(), CliError> {
    let read = |path: &Path| -> Result<MetricReport, CliError> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading report {}", path.display()))
            .map_err(usage)?;
        MetricReport::from_csv(&text).map_err(usage)
    };
    let model = read(model)?;
    let baseline = read(baseline)?;
    let text = std::fs::read_to_string(specs)
        .with_context(|| format!("reading specs {}", specs.display()))
        .map_err(usage)?;
    let specs: TaskSpecsFile =
        toml::from_str(&text).map_err(|e| usage(anyhow!("specs invalid: {e}")))?;
    let table = delta_table(&model, &baseline, &specs.tasks).map_err(runtime)?;
    print!("{}", table.to_csv());
    Ok(())
}

fn cmd_jared_sim(seeds: u64, lambda: f64, scenario: Option<&Path>) -> Result<(), CliError> {
    let scenario = match scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading scenario {}", path.display()))
                .map_err(usage)?;
            toml::from_str::<DepthScenario>(&text)
                .map_err(|e| usage(anyhow!("scenario invalid: {e}")))?
        }
        None => DepthScenario::default(),
    };
    let plain = toy_depth_experiment(&scenario, 0.0, seeds).map_err(runtime)?;
    let composite = toy_depth_experiment(&scenario, lambda, seeds).map_err(runtime)?;
    println!("loss,lambda,abs_err,abs_err_std_pct,rel_err,rel_err_std_pct,diverged_seeds");
    for summary in [&plain, &composite] {
        println!(
            "{},{},{:.6},{:.2},{:.6},{:.2},{}",
            if summary.lambda == 0.0 { "l1" } else { "l1+rel" },
            summary.lambda,
            summary.mean_abs_err,
            summary.abs_err_std_pct,
            summary.mean_rel_err,
            summary.rel_err_std_pct,
            summary.diverged_seeds
        );
    }
    Ok(())
}
