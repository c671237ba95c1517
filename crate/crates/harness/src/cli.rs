//! Command-line interface.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use rampmerge_core::{action_space, Approach};
use rampmerge_sac::{load_policy, CheckpointHeader, Policy};

use crate::compare::{Comparison, SUMMARY_FILE};
use crate::config::{load_config, RunConfig};
use crate::error::{HarnessError, Result};
use crate::metrics::{write_episodes_csv, RunLabel, RunSummary};
use crate::rollout::{evaluate, trace_episode, Actor};
use crate::training::{run_training, TrainReport, CONFIG_FILE};

pub const EPISODES_FILE: &str = "episodes.csv";

#[derive(Debug, Parser)]
#[command(name = "rampmerge", version, about = "Train, evaluate and compare on-ramp merging controllers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy and write policy.bin, train_log.csv and config.json.
    Train(TrainArgs),
    /// Evaluate a policy (or random actions) and write episodes.csv and summary.json.
    Eval(EvalArgs),
    /// Tabulate several evaluation runs side by side.
    Compare(CompareArgs),
    /// Record one episode step by step.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file overlaid on the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one setting, e.g. `--set env.reward.w_j=0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub approach: Approach,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent runs; the best is kept.
    #[arg(long)]
    pub repeats: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate. Its directory's config.json is used unless --config is given.
    #[arg(long, required_unless_present = "random", conflicts_with = "random")]
    pub policy: Option<PathBuf>,
    /// Uniform random actions instead of a policy.
    #[arg(long, requires = "approach")]
    pub random: bool,
    #[arg(long)]
    pub approach: Option<Approach>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample actions instead of taking the mean.
    #[arg(long)]
    pub stochastic: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Evaluation output directories, each holding a summary.json.
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[arg(long, required_unless_present = "random", conflicts_with = "random")]
    pub policy: Option<PathBuf>,
    #[arg(long, requires = "approach")]
    pub random: bool,
    #[arg(long)]
    pub approach: Option<Approach>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub stochastic: bool,
    /// Per-step CSV of the merger, its neighbours and the powertrain.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every vehicle's state per step here.
    #[arg(long)]
    pub vehicles: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Compare(a) => cmd_compare(&a).map(|_| ()),
        Command::Trace(a) => cmd_trace(&a),
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<TrainReport> {
    let mut cfg = load_config(a.config.config.as_deref(), &a.config.overrides)?.with_approach(a.approach);
    if let Some(s) = a.steps {
        cfg.train.steps = s;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(r) = a.repeats {
        cfg.train.repeats = r;
    }
    cfg.validate()?;
    info!("training {} for {} steps, seed {}, config {}", cfg.approach(), cfg.train.steps, cfg.train.seed, cfg.config_hash());
    let report = run_training(&cfg, &a.out)?;
    info!("wrote {}", report.out.display());
    Ok(report)
}

/// A checkpoint with the configuration it is evaluated under.
pub struct LoadedPolicy {
    pub policy: Policy,
    pub header: CheckpointHeader,
    pub config: RunConfig,
}

/// Loads a checkpoint and the configuration to run it under, refusing any
/// mismatch in approach, dimensions or action limits.
pub fn load_checked(path: &Path, config: &ConfigArgs, approach: Option<Approach>) -> Result<LoadedPolicy> {
    let (policy, header) = load_policy(path)?;
    let sibling = path.parent().map(|p| p.join(CONFIG_FILE)).filter(|p| p.is_file());
    let file = config.config.clone().or(sibling);
    let mut cfg = load_config(file.as_deref(), &config.overrides)?;
    let trained_for: Approach = header.meta.approach.parse().map_err(|e| HarnessError::Checkpoint(format!("{e}")))?;
    cfg = cfg.with_approach(approach.unwrap_or(trained_for));
    let ap = cfg.approach();
    header.expect(ap.name(), ap.obs_dim(), ap.action_dim())?;
    let bounds = action_space(ap, &cfg.env.phev, &cfg.env.road);
    if bounds.low != header.meta.action_low || bounds.high != header.meta.action_high {
        return Err(HarnessError::Checkpoint(format!(
            "checkpoint action limits {:?}..{:?} differ from the configured {:?}..{:?}",
            header.meta.action_low, header.meta.action_high, bounds.low, bounds.high
        )));
    }
    Ok(LoadedPolicy { policy, header, config: cfg })
}

pub fn cmd_eval(a: &EvalArgs) -> Result<RunSummary> {
    let loaded = match &a.policy {
        Some(p) => Some(load_checked(p, &a.config, a.approach)?),
        None => None,
    };
    let mut cfg = match &loaded {
        Some(l) => l.config.clone(),
        None => {
            let approach = a.approach.ok_or_else(|| HarnessError::Usage("--random needs --approach".into()))?;
            load_config(a.config.config.as_deref(), &a.config.overrides)?.with_approach(approach)
        }
    };
    if let Some(n) = a.episodes {
        cfg.eval.episodes = n;
    }
    if let Some(s) = a.seed {
        cfg.eval.seed = s;
    }
    if let Some(t) = a.threads {
        cfg.eval.threads = t;
    }
    cfg.eval.stochastic |= a.stochastic;
    cfg.validate()?;

    let actor = match &loaded {
        Some(l) if cfg.eval.stochastic => Actor::Sampled(&l.policy),
        Some(l) => Actor::Mean(&l.policy),
        None => Actor::Random,
    };
    info!("evaluating {} over {} episodes, seed {}", cfg.approach(), cfg.eval.episodes, cfg.eval.seed);
    let episodes = evaluate(&cfg.env, &actor, cfg.eval.episodes, cfg.eval.seed, cfg.eval.threads)?;
    let label = RunLabel {
        approach: cfg.approach().name().into(),
        policy: a.policy.as_ref().map_or_else(|| "random".into(), |p| p.display().to_string()),
        seed: cfg.eval.seed,
        config_hash: loaded.as_ref().map_or_else(|| cfg.config_hash(), |l| l.header.meta.config_hash.clone()),
        scenario_hash: cfg.scenario_hash(),
        deterministic: actor.is_deterministic(),
    };
    let summary = RunSummary::from_episodes(label, &episodes);
    fs::create_dir_all(&a.out).map_err(|e| HarnessError::io(&a.out, e))?;
    write_episodes_csv(&a.out.join(EPISODES_FILE), &episodes)?;
    summary.write(&a.out.join(SUMMARY_FILE))?;
    info!(
        "{}: collision {:.4}, stop {:.4}, saturation {:.4}, cost {:.5}, jerk {:.4}",
        summary.approach,
        summary.collision_rate,
        summary.stop_rate,
        summary.saturation_rate,
        summary.avg_combined_cost,
        summary.avg_jerk
    );
    Ok(summary)
}

pub fn cmd_compare(a: &CompareArgs) -> Result<Comparison> {
    let cmp = Comparison::load(&a.runs)?;
    cmp.write_all(&a.out)?;
    print!("{}", cmp.markdown());
    Ok(cmp)
}

pub fn cmd_trace(a: &TraceArgs) -> Result<()> {
    let loaded = match &a.policy {
        Some(p) => Some(load_checked(p, &a.config, a.approach)?),
        None => None,
    };
    let cfg = match &loaded {
        Some(l) => l.config.clone(),
        None => {
            let approach = a.approach.ok_or_else(|| HarnessError::Usage("--random needs --approach".into()))?;
            load_config(a.config.config.as_deref(), &a.config.overrides)?.with_approach(approach)
        }
    };
    let actor = match &loaded {
        Some(l) if a.stochastic => Actor::Sampled(&l.policy),
        Some(l) => Actor::Mean(&l.policy),
        None => Actor::Random,
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let m = trace_episode(&cfg.env, &actor, a.seed, &a.out, a.vehicles.as_deref())?;
    info!(
        "traced {} steps: collided {}, stopped {}, succeeded {}, cost {:.5}",
        m.episode_steps, m.collided, m.stopped, m.succeeded, m.combined_cost
    );
    Ok(())
}
