//! Experiment runner: configuration, training with repeat selection,
//! parallel evaluation, comparison tables and episode traces.

pub mod cli;
pub mod compare;
pub mod config;
pub mod error;
pub mod metrics;
pub mod rollout;
pub mod training;

pub use compare::Comparison;
pub use config::{load_config, resolve, RunConfig};
pub use error::{HarnessError, Result};
pub use metrics::{EpisodeMetrics, RunSummary};
pub use rollout::{episode_seed, evaluate, trace_episode, Actor, TrainingEnv};
pub use training::{run_training, train_once};
