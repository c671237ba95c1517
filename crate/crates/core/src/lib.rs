//! Simulation side of the on-ramp merging workbench: the plug-in hybrid
//! powertrain model, power-split rules, main-road traffic and the
//! reinforcement-learning environment that ties them together.

pub mod env;
pub mod error;
pub mod phev;
pub mod powersplit;
pub mod traffic;

pub use env::{
    action_space, ActionBounds, Approach, EnvConfig, EpisodeConfig, MergeEnv, MergeGate, Observation,
    RewardBreakdown, RewardWeights, StepInfo, StepOutcome,
};
pub use error::{Error, Result};
pub use phev::{BatteryState, PhevParams, PowerSplit};
pub use powersplit::{SplitKind, SplitRequest, SplitResolution};
pub use traffic::{IdmParams, Lane, RoadConfig, TrafficWorld, VehicleRecord};
