//! On-ramp merging environment.
//!
//! Wraps the traffic world, the powertrain model and the power-split rules
//! behind a reset/step interface. The policy acts in `[-1, 1]^n`; actions
//! are mapped affinely onto the physical action box of the chosen approach.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phev::{self, BatteryState, PhevParams, PowerSplit};
use crate::powersplit::{SplitKind, SplitRequest};
use crate::traffic::{
    EventMonitor, Events, Lane, Neighbors, RoadConfig, Terminal, TrafficWorld, VehicleRecord,
};

/// Which controller architecture drives the merging vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approach {
    /// Policy outputs engine power and combined motor/brake power.
    #[serde(rename = "coop")]
    Coop,
    /// Policy outputs a power demand; blended CD splits it.
    #[serde(rename = "seq1")]
    SeqPower,
    /// Policy outputs an acceleration demand; blended CD splits it.
    #[serde(rename = "seq2")]
    SeqAccel,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Coop, Approach::SeqPower, Approach::SeqAccel];

    pub fn name(self) -> &'static str {
        match self {
            Approach::Coop => "coop",
            Approach::SeqPower => "seq1",
            Approach::SeqAccel => "seq2",
        }
    }

    pub fn obs_dim(self) -> usize {
        match self {
            Approach::Coop => 12,
            Approach::SeqPower | Approach::SeqAccel => 11,
        }
    }

    pub fn action_dim(self) -> usize {
        match self {
            Approach::Coop => 2,
            Approach::SeqPower | Approach::SeqAccel => 1,
        }
    }

    pub fn includes_soc(self) -> bool {
        self == Approach::Coop
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coop" => Ok(Approach::Coop),
            "seq1" | "seq_power" => Ok(Approach::SeqPower),
            "seq2" | "seq_accel" => Ok(Approach::SeqAccel),
            other => Err(Error::Usage(format!("unknown approach `{other}` (expected coop, seq1 or seq2)"))),
        }
    }
}

/// Per-dimension physical action limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBounds {
    pub fn dim(&self) -> usize {
        self.low.len()
    }

    /// Maps `u` in `[-1, 1]^n` onto the box; out-of-range inputs are clamped.
    pub fn scale(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&x, (&lo, &hi))| (lo + 0.5 * (x.clamp(-1.0, 1.0) + 1.0) * (hi - lo)).clamp(lo, hi))
            .collect()
    }

    pub fn unscale(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&x, (&lo, &hi))| 2.0 * (x - lo) / (hi - lo) - 1.0)
            .collect()
    }
}

/// Physical action box of each approach.
pub fn action_space(approach: Approach, params: &PhevParams, road: &RoadConfig) -> ActionBounds {
    let brake_floor = params.p_g_min + params.p_brk_min;
    match approach {
        Approach::Coop => ActionBounds {
            low: vec![0.0, brake_floor],
            high: vec![params.p_eng_max, params.p_m_max],
        },
        Approach::SeqPower => ActionBounds {
            low: vec![brake_floor],
            high: vec![params.p_m_max + params.p_eng_max],
        },
        Approach::SeqAccel => ActionBounds { low: vec![road.a_min], high: vec![road.a_max] },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub w_m: f64,
    pub w_b: f64,
    pub w_j: f64,
    pub w_c: f64,
    pub dv_max: f64,
    pub j0: f64,
    pub r_stop: f64,
    pub r_collision: f64,
    pub r_success: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_m: 0.015,
            w_b: 0.015,
            w_j: 0.1,
            w_c: 0.005,
            dv_max: 5.0,
            j0: 3.0,
            r_stop: -1.0,
            r_collision: -1.0,
            r_success: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        for (field, value) in [("w_m", self.w_m), ("w_b", self.w_b), ("w_j", self.w_j), ("w_c", self.w_c)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidParam { field, reason: format!("weight {value} must be >= 0") });
            }
        }
        if !(self.dv_max > 0.0) {
            return Err(Error::InvalidParam { field: "dv_max", reason: "must be > 0".into() });
        }
        if !(self.j0 >= 0.0) {
            return Err(Error::InvalidParam { field: "j0", reason: "must be >= 0".into() });
        }
        Ok(())
    }
}

/// When the merging reward starts applying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeGate {
    /// From junction entry on.
    Junction,
    /// From the merge point on.
    MergePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub approach: Approach,
    pub v0_range: [f64; 2],
    pub soc_range: [f64; 2],
    pub warmup_s: f64,
    /// Hard time cap; reaching it truncates the episode.
    pub max_episode_s: f64,
    pub r_m_gate: MergeGate,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            approach: Approach::Coop,
            v0_range: [22.35, 26.82],
            soc_range: [0.3, 0.9],
            warmup_s: 10.0,
            max_episode_s: 60.0,
            r_m_gate: MergeGate::Junction,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        let [v_lo, v_hi] = self.v0_range;
        if !(v_lo > 0.0 && v_lo <= v_hi) {
            return Err(Error::InvalidParam { field: "v0_range", reason: format!("[{v_lo}, {v_hi}]") });
        }
        let [s_lo, s_hi] = self.soc_range;
        if !(0.0 <= s_lo && s_lo <= s_hi && s_hi <= 1.0) {
            return Err(Error::InvalidParam { field: "soc_range", reason: format!("[{s_lo}, {s_hi}]") });
        }
        if !(self.warmup_s >= 0.0) {
            return Err(Error::InvalidParam { field: "warmup_s", reason: "must be >= 0".into() });
        }
        if !(self.max_episode_s > 0.0) {
            return Err(Error::InvalidParam { field: "max_episode_s", reason: "must be > 0".into() });
        }
        Ok(())
    }
}

/// Everything needed to build a merging environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub phev: PhevParams,
    pub road: RoadConfig,
    pub reward: RewardWeights,
    pub episode: EpisodeConfig,
}

impl EnvConfig {
    pub fn with_approach(mut self, approach: Approach) -> Self {
        self.episode.approach = approach;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.phev.validate()?;
        self.road.validate()?;
        self.reward.validate()?;
        self.episode.validate()
    }
}

/// Scales mapping raw observation entries to network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObsScales {
    pub distance: f64,
    pub velocity: f64,
    pub accel: f64,
}

impl ObsScales {
    pub fn from_road(road: &RoadConfig) -> Self {
        Self {
            distance: road.sensing_radius,
            velocity: road.v_limit * road.desired_speed_clip[1],
            accel: road.a_min.abs().max(road.a_max),
        }
    }
}

/// Environment state in the fixed order
/// `[d_p2, v_p2, d_p1, v_p1, d, v, a, (soc,) d_f1, v_f1, d_f2, v_f2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl Observation {
    pub fn build(
        neighbors: &Neighbors,
        merger: &VehicleRecord,
        soc: Option<f64>,
        scales: &ObsScales,
    ) -> Self {
        let n = neighbors;
        let mut raw = vec![n.p2.d, n.p2.v, n.p1.d, n.p1.v, merger.d, merger.v, merger.a];
        let mut kinds = vec!['d', 'v', 'd', 'v', 'd', 'v', 'a'];
        if let Some(soc) = soc {
            raw.push(soc);
            kinds.push('s');
        }
        raw.extend([n.f1.d, n.f1.v, n.f2.d, n.f2.v]);
        kinds.extend(['d', 'v', 'd', 'v']);
        let normalized = raw
            .iter()
            .zip(&kinds)
            .map(|(&x, kind)| {
                let scaled = match kind {
                    'd' => x / scales.distance,
                    'v' => x / scales.velocity,
                    'a' => x / scales.accel,
                    _ => x,
                };
                scaled.clamp(-1.0, 1.0)
            })
            .collect();
        Self { raw, normalized }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_m: f64,
    pub r_b: f64,
    pub r_j: f64,
    pub r_c: f64,
    pub r_terminal: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(r_m: f64, r_b: f64, r_j: f64, r_c: f64, r_terminal: f64) -> Self {
        Self { r_m, r_b, r_j, r_c, r_terminal, total: r_m + r_b + r_j + r_c + r_terminal }
    }
}

/// Normalised asymmetry of the merger between its first preceding and first
/// following vehicles: 0 midway, 1 touching one of them.
pub fn midway_ratio(dd_p1: f64, dd_f1: f64) -> f64 {
    let sum = dd_p1 + dd_f1;
    if sum <= 0.0 {
        return 1.0;
    }
    ((dd_p1 - dd_f1).abs() / sum).min(1.0)
}

/// Merging reward. The speed-mismatch ratio saturates at 1.
pub fn reward_merge(v: f64, v_p1: f64, lambda: f64, w: &RewardWeights, merged: bool) -> f64 {
    if !merged {
        return 0.0;
    }
    -w.w_m * (lambda + ((v_p1 - v).abs() / w.dv_max).min(1.0))
}

/// Penalty on braking of the first following vehicle.
pub fn reward_follower_brake(a_f1: f64, accel_norm: f64, w: &RewardWeights) -> f64 {
    if a_f1 < 0.0 {
        -w.w_b * a_f1.abs() / accel_norm
    } else {
        0.0
    }
}

/// Jerk penalty, linear between `j0` and `j_max` and saturated beyond.
pub fn reward_jerk(j: f64, j_max: f64, w: &RewardWeights) -> f64 {
    let mag = j.abs();
    if mag <= w.j0 {
        return 0.0;
    }
    -w.w_j * ((mag - w.j0) / (j_max - w.j0)).min(1.0)
}

/// Energy-cost reward of the co-optimization approach.
pub fn reward_energy(c: f64, c_max: f64, w: &RewardWeights) -> f64 {
    -w.w_c * c / c_max
}

/// Energy proxy of the sequential approaches, computed from the demand.
pub fn reward_energy_seq(
    approach: Approach,
    demand: f64,
    params: &PhevParams,
    road: &RoadConfig,
    w: &RewardWeights,
) -> f64 {
    match approach {
        Approach::SeqPower => {
            let norm = (params.p_g_min + params.p_brk_min).abs().max(params.p_m_max + params.p_eng_max);
            -w.w_c * demand / norm
        }
        Approach::SeqAccel => -w.w_c * demand / road.a_min.abs().max(road.a_max),
        Approach::Coop => 0.0,
    }
}

/// Raw quantities the per-step reward was computed from, kept so rewards
/// can be re-evaluated independently.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardInputs {
    pub merged: bool,
    pub dd_p1: f64,
    pub dd_f1: f64,
    pub v: f64,
    pub v_p1: f64,
    pub a_f1: f64,
    pub jerk: f64,
    pub cost: f64,
    pub c_max: f64,
    /// Requested power (W) or acceleration (m/s^2) for the sequential
    /// approaches; unused for co-optimization.
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Physical action after scaling.
    pub action: Vec<f64>,
    pub split: PowerSplit,
    pub saturated: bool,
    pub achieved_accel: f64,
    pub jerk: f64,
    pub soc: f64,
    pub soc_clamped: bool,
    pub fuel_cost: f64,
    pub electricity_cost: f64,
    pub cost: f64,
    pub events: Events,
    pub terminal: Option<Terminal>,
    /// Episode cut by the time cap, not a genuine termination.
    pub truncated: bool,
    pub neighbors: Neighbors,
    pub merger: VehicleRecord,
    pub reward_inputs: RewardInputs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub info: StepInfo,
}

/// Counters for conditions that should not occur in healthy runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub soc_clamp_events: u64,
    pub time_cap_hits: u64,
}

/// The merging environment.
#[derive(Debug, Clone)]
pub struct MergeEnv {
    cfg: EnvConfig,
    world: TrafficWorld,
    merger: VehicleRecord,
    battery: BatteryState,
    prev_accel: f64,
    monitor: EventMonitor,
    steps: u64,
    done: bool,
    bounds: ActionBounds,
    scales: ObsScales,
    c_max: f64,
    j_max: f64,
    accel_norm: f64,
    diagnostics: Diagnostics,
}

impl MergeEnv {
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let world = TrafficWorld::new(cfg.road, ChaCha8Rng::seed_from_u64(seed));
        let merger = VehicleRecord::merger(-cfg.road.control_zone_len, cfg.episode.v0_range[0], &cfg.road);
        let monitor = EventMonitor::start(&world, &merger, &cfg.road);
        let road = &cfg.road;
        Ok(Self {
            bounds: action_space(cfg.episode.approach, &cfg.phev, road),
            scales: ObsScales::from_road(road),
            c_max: phev::max_cost_per_step(&cfg.phev, road.dt),
            j_max: (road.a_max - road.a_min) / road.dt,
            accel_norm: road.a_min.abs().max(road.a_max),
            world,
            merger,
            battery: BatteryState::new(cfg.episode.soc_range[0])?,
            prev_accel: 0.0,
            monitor,
            steps: 0,
            // step() before reset() is a usage error
            done: true,
            diagnostics: Diagnostics::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn approach(&self) -> Approach {
        self.cfg.episode.approach
    }

    pub fn bounds(&self) -> &ActionBounds {
        &self.bounds
    }

    pub fn scales(&self) -> ObsScales {
        self.scales
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn j_max(&self) -> f64 {
        self.j_max
    }

    pub fn world(&self) -> &TrafficWorld {
        &self.world
    }

    pub fn merger(&self) -> &VehicleRecord {
        &self.merger
    }

    pub fn soc(&self) -> f64 {
        self.battery.soc()
    }

    pub fn monitor(&self) -> &EventMonitor {
        &self.monitor
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn max_steps(&self) -> u64 {
        (self.cfg.episode.max_episode_s / self.cfg.road.dt).round() as u64
    }

    /// Restarts the RNG stream, then resets.
    pub fn reset_with_seed(&mut self, seed: u64) -> Observation {
        *self.world.rng_mut() = ChaCha8Rng::seed_from_u64(seed);
        self.reset()
    }

    /// Clears the main road, warms traffic up and places the merger at the
    /// bottom of the control zone with sampled speed and SOC.
    pub fn reset(&mut self) -> Observation {
        let cfg = self.cfg;
        self.world.clear();
        let warmup_steps = (cfg.episode.warmup_s / cfg.road.dt).round() as usize;
        for _ in 0..warmup_steps {
            self.world.step(None);
        }
        let rng = self.world.rng_mut();
        let [v_lo, v_hi] = cfg.episode.v0_range;
        let [s_lo, s_hi] = cfg.episode.soc_range;
        let v0 = if v_hi > v_lo { rng.gen_range(v_lo..=v_hi) } else { v_lo };
        let soc = if s_hi > s_lo { rng.gen_range(s_lo..=s_hi) } else { s_lo };
        self.merger = VehicleRecord::merger(-cfg.road.control_zone_len, v0, &cfg.road);
        self.battery = BatteryState::new(soc).expect("sampled soc is finite");
        self.prev_accel = 0.0;
        self.monitor = EventMonitor::start(&self.world, &self.merger, &cfg.road);
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    pub fn neighbors(&self) -> Neighbors {
        crate::traffic::neighbors(&self.world, &self.merger, &self.cfg.road)
    }

    pub fn observe(&self) -> Observation {
        let soc = self.approach().includes_soc().then(|| self.battery.soc());
        Observation::build(&self.neighbors(), &self.merger, soc, &self.scales)
    }

    fn merged(&self) -> bool {
        match self.cfg.episode.r_m_gate {
            MergeGate::Junction => self.merger.d >= -self.cfg.road.junction_half_len,
            MergeGate::MergePoint => self.merger.d >= 0.0,
        }
    }

    /// Steps with a policy action in `[-1, 1]^n`.
    pub fn step(&mut self, u: &[f64]) -> Result<StepOutcome> {
        if u.len() != self.bounds.dim() {
            return Err(Error::Usage(format!(
                "action has {} entries, {} expects {}",
                u.len(),
                self.approach(),
                self.bounds.dim()
            )));
        }
        let action = self.bounds.scale(u);
        self.step_physical(&action)
    }

    /// Steps with an action already in physical units.
    pub fn step_physical(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode; call reset first".into()));
        }
        if action.len() != self.bounds.dim() {
            return Err(Error::Usage(format!("action has {} entries, expected {}", action.len(), self.bounds.dim())));
        }
        let cfg = self.cfg;
        let approach = self.approach();
        let kind = match approach {
            Approach::Coop => SplitKind::Coop { p_eng: action[0], p_cb: action[1] },
            Approach::SeqPower => SplitKind::PowerDemand { p_d: action[0] },
            Approach::SeqAccel => SplitKind::AccelDemand { a_d: action[0] },
        };
        let resolution = SplitRequest { kind, v: self.merger.v, soc: self.battery.soc() }.resolve(&cfg.phev);
        debug_assert!(resolution.split.check(&cfg.phev).is_ok(), "{:?}", resolution.split.check(&cfg.phev));

        let pt = phev::step_powertrain(self.battery, &resolution.split, self.merger.v, cfg.road.dt, 0.0, &cfg.phev)?;
        if pt.soc_clamped {
            self.diagnostics.soc_clamp_events += 1;
        }

        // main-road traffic reacts to the merger as it was at the start of the step
        self.world.step(Some(&self.merger));

        let v_prev = self.merger.v;
        self.merger.v = pt.v;
        self.merger.d += 0.5 * (v_prev + pt.v) * cfg.road.dt;
        self.merger.a = pt.accel;
        if self.merger.d >= 0.0 {
            self.merger.lane = Lane::Main;
        }
        let jerk = (pt.accel - self.prev_accel) / cfg.road.dt;
        self.prev_accel = pt.accel;
        self.battery = pt.battery;
        self.steps += 1;

        let neighbors = self.neighbors();
        let events = self.monitor.observe(&self.world, &self.merger, &cfg.road);
        let terminal = events.terminal();

        let w = &cfg.reward;
        let merged = self.merged();
        let inputs = RewardInputs {
            merged,
            dd_p1: (neighbors.p1.d - self.merger.d).max(0.0),
            dd_f1: (self.merger.d - neighbors.f1.d).max(0.0),
            v: self.merger.v,
            v_p1: neighbors.p1.v,
            a_f1: neighbors.f1.a,
            jerk,
            cost: pt.cost,
            c_max: self.c_max,
            demand: match approach {
                Approach::Coop => 0.0,
                _ => action[0],
            },
        };
        let lambda = midway_ratio(inputs.dd_p1, inputs.dd_f1);
        let r_m = reward_merge(inputs.v, inputs.v_p1, lambda, w, merged);
        let r_b = reward_follower_brake(inputs.a_f1, self.accel_norm, w);
        let r_j = reward_jerk(jerk, self.j_max, w);
        let r_c = match approach {
            Approach::Coop => reward_energy(pt.cost, self.c_max, w),
            _ => reward_energy_seq(approach, inputs.demand, &cfg.phev, &cfg.road, w),
        };
        let r_terminal = match terminal {
            Some(Terminal::Collision) => w.r_collision,
            Some(Terminal::Stop) => w.r_stop,
            Some(Terminal::Success) => w.r_success,
            None => 0.0,
        };
        let reward = RewardBreakdown::new(r_m, r_b, r_j, r_c, r_terminal);

        let truncated = terminal.is_none() && self.steps >= self.max_steps();
        if truncated {
            self.diagnostics.time_cap_hits += 1;
        }
        self.done = terminal.is_some() || truncated;

        let soc = self.approach().includes_soc().then(|| self.battery.soc());
        let obs = Observation::build(&neighbors, &self.merger, soc, &self.scales);
        Ok(StepOutcome {
            obs,
            reward,
            done: self.done,
            info: StepInfo {
                action: action.to_vec(),
                split: resolution.split,
                saturated: resolution.saturated,
                achieved_accel: pt.accel,
                jerk,
                soc: self.battery.soc(),
                soc_clamped: pt.soc_clamped,
                fuel_cost: pt.fuel_cost,
                electricity_cost: pt.electricity_cost,
                cost: pt.cost,
                events,
                terminal,
                truncated,
                neighbors,
                merger: self.merger,
                reward_inputs: inputs,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn w() -> RewardWeights {
        RewardWeights::default()
    }

    #[test]
    fn midway_cases() {
        assert_eq!(midway_ratio(20.0, 20.0), 0.0);
        assert_eq!(midway_ratio(20.0, 0.0), 1.0);
        assert_eq!(midway_ratio(30.0, 10.0), 0.5);
        assert_eq!(midway_ratio(0.0, 0.0), 1.0);
    }

    #[test]
    fn merge_reward_cases() {
        assert_eq!(reward_merge(25.0, 25.0, 0.0, &w(), true), 0.0);
        assert_relative_eq!(reward_merge(20.0, 25.0, 1.0, &w(), true), -0.03, epsilon = 1e-12);
        assert_eq!(reward_merge(20.0, 25.0, 1.0, &w(), false), 0.0);
    }

    #[test]
    fn follower_brake_cases() {
        assert_eq!(reward_follower_brake(1.0, 4.5, &w()), 0.0);
        assert_relative_eq!(reward_follower_brake(-4.5, 4.5, &w()), -0.015, epsilon = 1e-12);
        assert_eq!(reward_follower_brake(0.0, 4.5, &w()), 0.0);
    }

    #[test]
    fn jerk_cases() {
        let j_max = (2.6 - -4.5) / 0.1;
        assert_relative_eq!(j_max, 71.0, epsilon = 1e-12);
        assert_eq!(reward_jerk(3.0, j_max, &w()), 0.0);
        assert_relative_eq!(reward_jerk(71.0, j_max, &w()), -0.1, epsilon = 1e-12);
        assert_relative_eq!(reward_jerk(-37.0, j_max, &w()), -0.05, epsilon = 1e-12);
    }

    #[test]
    fn energy_cases() {
        assert_eq!(reward_energy(0.0, 1e-3, &w()), 0.0);
        assert_relative_eq!(reward_energy(1e-3, 1e-3, &w()), -0.005, epsilon = 1e-15);
        assert!(reward_energy(-1e-4, 1e-3, &w()) > 0.0);
        let p = PhevParams::default();
        let r = RoadConfig::default();
        assert_eq!(reward_energy_seq(Approach::SeqPower, 0.0, &p, &r, &w()), 0.0);
        assert_relative_eq!(
            reward_energy_seq(Approach::SeqAccel, 2.6, &p, &r, &w()),
            -0.005 * 2.6 / 4.5,
            epsilon = 1e-15
        );
        assert!(reward_energy_seq(Approach::SeqPower, -10_000.0, &p, &r, &w()) > 0.0);
    }

    #[test]
    fn action_bounds() {
        let p = PhevParams::default();
        let r = RoadConfig::default();
        let b = action_space(Approach::SeqAccel, &p, &r);
        assert_eq!((b.low[0], b.high[0]), (-4.5, 2.6));
        let b = action_space(Approach::Coop, &p, &r);
        assert_eq!(b.low[0], 0.0);
        assert_eq!(b.high, vec![p.p_eng_max, p.p_m_max]);
        let b = action_space(Approach::SeqPower, &p, &r);
        assert_eq!(b.high[0], p.p_m_max + p.p_eng_max);
        assert_eq!(b.low[0], p.p_g_min + p.p_brk_min);
        assert_eq!(b.scale(&[-1.0]), b.low);
        assert_eq!(b.scale(&[1.0]), b.high);
        assert_relative_eq!(b.unscale(&b.scale(&[0.3]))[0], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn approach_names_round_trip() {
        for a in Approach::ALL {
            assert_eq!(a.name().parse::<Approach>().unwrap(), a);
        }
        assert!("ddpg".parse::<Approach>().is_err());
    }

    #[test]
    fn reset_places_merger() {
        let mut env = MergeEnv::new(EnvConfig::default(), 3).unwrap();
        let obs = env.reset();
        assert_eq!(env.merger().d, -100.0);
        assert_eq!(env.merger().a, 0.0);
        assert_eq!(obs.len(), 12);
        assert_eq!(obs.raw[4], -100.0);
    }

    #[test]
    fn step_before_reset_is_usage_error() {
        let mut env = MergeEnv::new(EnvConfig::default(), 3).unwrap();
        assert!(matches!(env.step(&[0.0, 0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn wrong_action_dim_is_usage_error() {
        let mut env = MergeEnv::new(EnvConfig::default(), 3).unwrap();
        env.reset();
        assert!(matches!(env.step(&[0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn sequential_observation_drops_soc() {
        let cfg = EnvConfig::default().with_approach(Approach::SeqAccel);
        let mut env = MergeEnv::new(cfg, 3).unwrap();
        assert_eq!(env.reset().len(), 11);
    }
}
