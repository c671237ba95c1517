//! Soft actor-critic with double critics, target networks and a learned
//! entropy temperature, over small fully connected networks whose
//! gradients come from a reverse-mode tape.

pub mod agent;
pub mod checkpoint;
pub mod error;
pub mod mat;
pub mod nn;
pub mod norm;
pub mod policy;
pub mod replay;
pub mod tape;
pub mod toy;
pub mod train;

pub use agent::{Sac, SacConfig, UpdateStats};
pub use checkpoint::{load_policy, save_policy, CheckpointHeader, PolicyMeta};
pub use error::{Result, SacError};
pub use mat::Mat;
pub use policy::{GaussianActor, Policy};
pub use train::{train, EnvStep, Environment, EpisodeLog, TrainOutcome};
