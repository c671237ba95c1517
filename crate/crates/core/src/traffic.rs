//! Single-lane main road with a single-lane on-ramp.
//!
//! Positions are signed distances to the merge point along each lane
//! (negative upstream). Main-road vehicles follow the Intelligent Driver
//! Model; the merging vehicle is driven externally and only becomes visible
//! to main-road traffic once it enters the junction, either as a projection
//! onto the main lane or, past the merge point, as an ordinary participant.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Id reserved for the merging vehicle. Main-road ids start at 1.
pub const MERGER_ID: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lane {
    Main,
    Ramp,
}

impl Lane {
    pub fn as_str(self) -> &'static str {
        match self {
            Lane::Main => "main",
            Lane::Ramp => "ramp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    pub min_gap: f64,
    pub time_headway: f64,
    pub accel_exponent: f64,
    pub comfortable_decel: f64,
    pub max_accel: f64,
}

/// Population-level IDM settings. Time headway is drawn per vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdmDefaults {
    pub min_gap: f64,
    pub time_headway_min: f64,
    pub time_headway_max: f64,
    pub accel_exponent: f64,
    pub comfortable_decel: f64,
    pub max_accel: f64,
}

impl Default for IdmDefaults {
    fn default() -> Self {
        Self {
            min_gap: 2.0,
            time_headway_min: 1.0,
            time_headway_max: 1.6,
            accel_exponent: 4.0,
            comfortable_decel: 2.5,
            max_accel: 2.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadConfig {
    /// Main-road speed limit (m/s).
    pub v_limit: f64,
    /// Controlled length on each side of the merge point (m).
    pub control_zone_len: f64,
    pub junction_half_len: f64,
    pub sensing_radius: f64,
    pub spawn_prob_per_s: f64,
    pub dt: f64,
    /// Distance from the main-road spawn point to the merge point (m).
    pub main_spawn_offset: f64,
    /// Distance past the merge point where main-road vehicles leave (m).
    pub main_exit_offset: f64,
    /// Angle between ramp and main road, used only for sensing geometry.
    pub ramp_angle_deg: f64,
    pub collision_gap: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub a_emergency: f64,
    pub desired_speed_std: f64,
    pub desired_speed_clip: [f64; 2],
    pub stop_speed: f64,
    pub stop_steps: u32,
    pub idm: IdmDefaults,
}

impl Default for RoadConfig {
    fn default() -> Self {
        Self {
            v_limit: 29.06,
            control_zone_len: 100.0,
            junction_half_len: 15.0,
            sensing_radius: 200.0,
            spawn_prob_per_s: 0.5,
            dt: 0.1,
            main_spawn_offset: 400.0,
            main_exit_offset: 300.0,
            ramp_angle_deg: 15.0,
            collision_gap: 2.5,
            a_min: -4.5,
            a_max: 2.6,
            a_emergency: -9.0,
            desired_speed_std: 0.1,
            desired_speed_clip: [0.85, 1.15],
            stop_speed: 0.1,
            stop_steps: 5,
            idm: IdmDefaults::default(),
        }
    }
}

impl RoadConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_limit", self.v_limit),
            ("control_zone_len", self.control_zone_len),
            ("junction_half_len", self.junction_half_len),
            ("sensing_radius", self.sensing_radius),
            ("dt", self.dt),
            ("main_spawn_offset", self.main_spawn_offset),
            ("main_exit_offset", self.main_exit_offset),
            ("collision_gap", self.collision_gap),
            ("a_max", self.a_max),
            ("idm.min_gap", self.idm.min_gap),
            ("idm.time_headway_min", self.idm.time_headway_min),
            ("idm.accel_exponent", self.idm.accel_exponent),
            ("idm.comfortable_decel", self.idm.comfortable_decel),
            ("idm.max_accel", self.idm.max_accel),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParam { field, reason: format!("{value} must be > 0") });
            }
        }
        if self.spawn_prob_per_s < 0.0 || self.spawn_prob_per_s * self.dt > 1.0 {
            return Err(Error::InvalidParam {
                field: "spawn_prob_per_s",
                reason: "spawn probability per step must lie in [0, 1]".into(),
            });
        }
        if self.idm.time_headway_max < self.idm.time_headway_min {
            return Err(Error::InvalidParam {
                field: "idm.time_headway_max",
                reason: "must be >= time_headway_min".into(),
            });
        }
        if !(self.a_emergency <= self.a_min && self.a_min < 0.0) {
            return Err(Error::InvalidParam { field: "a_min", reason: "need a_emergency <= a_min < 0".into() });
        }
        if self.desired_speed_clip[0] > self.desired_speed_clip[1] || self.desired_speed_clip[0] <= 0.0 {
            return Err(Error::InvalidParam { field: "desired_speed_clip", reason: "invalid range".into() });
        }
        if self.junction_half_len > self.control_zone_len {
            return Err(Error::InvalidParam {
                field: "junction_half_len",
                reason: "junction must lie within the control zone".into(),
            });
        }
        Ok(())
    }

    pub fn steps_per_second(&self) -> f64 {
        1.0 / self.dt
    }

    fn spawn_d(&self) -> f64 {
        -self.main_spawn_offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: u64,
    pub lane: Lane,
    /// Signed distance to the merge point (m).
    pub d: f64,
    pub v: f64,
    pub a: f64,
    pub desired_speed: f64,
    pub idm: IdmParams,
}

impl VehicleRecord {
    /// The externally controlled ramp vehicle.
    pub fn merger(d: f64, v: f64, cfg: &RoadConfig) -> Self {
        Self {
            id: MERGER_ID,
            lane: if d >= 0.0 { Lane::Main } else { Lane::Ramp },
            d,
            v,
            a: 0.0,
            desired_speed: cfg.v_limit,
            idm: IdmParams {
                min_gap: cfg.idm.min_gap,
                time_headway: cfg.idm.time_headway_min,
                accel_exponent: cfg.idm.accel_exponent,
                comfortable_decel: cfg.idm.comfortable_decel,
                max_accel: cfg.idm.max_accel,
            },
        }
    }

    /// 2-D position with the merge point at the origin and the main road
    /// along the x axis.
    fn position(&self, cfg: &RoadConfig) -> (f64, f64) {
        if self.lane == Lane::Ramp && self.d < 0.0 {
            let phi = cfg.ramp_angle_deg.to_radians();
            (self.d * phi.cos(), self.d * phi.sin())
        } else {
            (self.d, 0.0)
        }
    }
}

/// IDM acceleration with the normal / emergency clipping applied.
///
/// `leader` is `(gap, leader_v)`; `None` means free road.
pub fn idm_accel(follower: &VehicleRecord, leader: Option<(f64, f64)>, cfg: &RoadConfig) -> f64 {
    let idm = &follower.idm;
    let v = follower.v;
    let free = idm.max_accel * (1.0 - (v / follower.desired_speed).powf(idm.accel_exponent));
    let raw = match leader {
        None => free,
        Some((gap, _)) if gap <= 0.0 => return cfg.a_emergency,
        Some((gap, leader_v)) => {
            let dv = v - leader_v;
            let dynamic = v * idm.time_headway + v * dv / (2.0 * (idm.max_accel * idm.comfortable_decel).sqrt());
            let s_star = idm.min_gap + dynamic.max(0.0);
            free - idm.max_accel * (s_star / gap).powi(2)
        }
    };
    clip_accel(raw, cfg)
}

/// Normal range `[a_min, a_max]`; demands harder than `a_min` engage
/// emergency braking down to `a_emergency`.
pub fn clip_accel(raw: f64, cfg: &RoadConfig) -> f64 {
    if raw < cfg.a_min {
        raw.max(cfg.a_emergency)
    } else {
        raw.min(cfg.a_max)
    }
}

/// Image of the merger on the main lane as seen by main-road traffic, if any.
pub fn project_ramp_vehicle(merger: &VehicleRecord, cfg: &RoadConfig) -> Option<VehicleRecord> {
    if merger.lane == Lane::Ramp && merger.d < 0.0 && -merger.d <= cfg.junction_half_len {
        Some(VehicleRecord { lane: Lane::Main, ..*merger })
    } else {
        None
    }
}

/// Where main-road traffic perceives the merger: the projection inside the
/// junction or the merger itself once past the merge point.
fn merger_on_main(merger: &VehicleRecord, cfg: &RoadConfig) -> Option<VehicleRecord> {
    if merger.lane == Lane::Main || merger.d >= 0.0 {
        Some(*merger)
    } else {
        project_ramp_vehicle(merger, cfg)
    }
}

/// Main-road state for one simulation world. Owns its RNG.
#[derive(Debug, Clone)]
pub struct TrafficWorld {
    /// Sorted by `d`, leader first.
    vehicles: Vec<VehicleRecord>,
    next_id: u64,
    rng: ChaCha8Rng,
    cfg: RoadConfig,
    steps: u64,
}

impl TrafficWorld {
    pub fn new(cfg: RoadConfig, rng: ChaCha8Rng) -> Self {
        Self { vehicles: Vec::new(), next_id: MERGER_ID + 1, rng, cfg, steps: 0 }
    }

    pub fn cfg(&self) -> &RoadConfig {
        &self.cfg
    }

    pub fn vehicles(&self) -> &[VehicleRecord] {
        &self.vehicles
    }

    pub fn vehicle(&self, id: u64) -> Option<&VehicleRecord> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Removes all vehicles; the RNG stream continues.
    pub fn clear(&mut self) {
        self.vehicles.clear();
    }

    /// Inserts a vehicle keeping the leader-first order.
    pub fn insert(&mut self, vehicle: VehicleRecord) {
        let pos = self.vehicles.iter().position(|v| v.d < vehicle.d).unwrap_or(self.vehicles.len());
        self.next_id = self.next_id.max(vehicle.id + 1);
        self.vehicles.insert(pos, vehicle);
    }

    /// Smallest distance between consecutive main-road vehicles.
    pub fn min_headway_gap(&self) -> Option<f64> {
        self.vehicles.windows(2).map(|w| w[0].d - w[1].d).reduce(f64::min)
    }

    /// Advances main-road traffic by one step. `merger` is the ramp vehicle,
    /// visible to traffic only inside the junction or past the merge point.
    pub fn step(&mut self, merger: Option<&VehicleRecord>) {
        let cfg = self.cfg;
        let obstacle = merger.and_then(|m| merger_on_main(m, &cfg));

        let mut accels = Vec::with_capacity(self.vehicles.len());
        for (i, veh) in self.vehicles.iter().enumerate() {
            let mut leader = if i > 0 { Some(&self.vehicles[i - 1]) } else { None };
            if let Some(obs) = obstacle.as_ref() {
                if obs.d >= veh.d && leader.map_or(true, |l| obs.d < l.d) {
                    leader = Some(obs);
                }
            }
            accels.push(idm_accel(veh, leader.map(|l| (l.d - veh.d, l.v)), &cfg));
        }

        for (i, a) in accels.into_iter().enumerate() {
            let veh = &mut self.vehicles[i];
            let v_next = (veh.v + a * cfg.dt).max(0.0);
            veh.d += 0.5 * (veh.v + v_next) * cfg.dt;
            veh.v = v_next;
            veh.a = a;
        }
        // single lane: a follower can at most close the gap
        for i in 1..self.vehicles.len() {
            let (lead_d, lead_v) = (self.vehicles[i - 1].d, self.vehicles[i - 1].v);
            let veh = &mut self.vehicles[i];
            if veh.d > lead_d {
                veh.d = lead_d;
                veh.v = veh.v.min(lead_v);
            }
        }

        let exit = cfg.main_exit_offset;
        self.vehicles.retain(|v| v.d <= exit);
        self.try_spawn();
        self.steps += 1;
    }

    fn try_spawn(&mut self) {
        if let Some(vehicle) = spawn_main_vehicle(&mut self.rng, &self.cfg, self.vehicles.last(), self.next_id) {
            self.next_id += 1;
            self.vehicles.push(vehicle);
        }
    }
}

/// Draws the desired-speed multiplier: Normal(1, std) clipped to the
/// configured range.
pub fn sample_speed_factor(rng: &mut impl Rng, cfg: &RoadConfig) -> f64 {
    let normal = Normal::new(1.0, cfg.desired_speed_std).expect("finite std");
    normal.sample(rng).clamp(cfg.desired_speed_clip[0], cfg.desired_speed_clip[1])
}

/// Bernoulli spawn at the main-road entry.
///
/// Suppressed when the predecessor is too close to insert even at its own
/// speed (`gap < s0 + v_pred T`); otherwise the new vehicle enters at the
/// lower of its desired speed and the speed its headway allows.
pub fn spawn_main_vehicle(
    rng: &mut impl Rng,
    cfg: &RoadConfig,
    predecessor: Option<&VehicleRecord>,
    id: u64,
) -> Option<VehicleRecord> {
    if !rng.gen_bool(cfg.spawn_prob_per_s * cfg.dt) {
        return None;
    }
    let alpha = sample_speed_factor(rng, cfg);
    let time_headway = rng.gen_range(cfg.idm.time_headway_min..=cfg.idm.time_headway_max);
    let desired_speed = alpha * cfg.v_limit;
    let spawn_d = cfg.spawn_d();
    let s0 = cfg.idm.min_gap;
    let v = match predecessor {
        None => desired_speed,
        Some(pred) => {
            let gap = pred.d - spawn_d;
            if gap < s0 + pred.v * time_headway {
                return None;
            }
            desired_speed.min((gap - s0) / time_headway)
        }
    };
    Some(VehicleRecord {
        id,
        lane: Lane::Main,
        d: spawn_d,
        v,
        a: 0.0,
        desired_speed,
        idm: IdmParams {
            min_gap: s0,
            time_headway,
            accel_exponent: cfg.idm.accel_exponent,
            comfortable_decel: cfg.idm.comfortable_decel,
            max_accel: cfg.idm.max_accel,
        },
    })
}

/// One of the four observation neighbours, real or virtual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: Option<u64>,
    pub d: f64,
    pub v: f64,
    pub a: f64,
}

impl Neighbor {
    pub fn is_virtual(&self) -> bool {
        self.id.is_none()
    }

    fn real(v: &VehicleRecord) -> Self {
        Self { id: Some(v.id), d: v.d, v: v.v, a: v.a }
    }

    fn virtual_at(d: f64, cfg: &RoadConfig) -> Self {
        Self { id: None, d, v: cfg.v_limit, a: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbors {
    pub p2: Neighbor,
    pub p1: Neighbor,
    pub f1: Neighbor,
    pub f2: Neighbor,
}

/// Main-lane positions where the merger's sensing circle crosses the main
/// road, `(behind, ahead)`.
pub fn sensing_intersections(merger: &VehicleRecord, cfg: &RoadConfig) -> (f64, f64) {
    let (x, y) = merger.position(cfg);
    let half = (cfg.sensing_radius * cfg.sensing_radius - y * y).max(0.0).sqrt();
    (x - half, x + half)
}

/// The two nearest sensed main-road vehicles ahead of and behind the
/// merger's (projected) position, padded with virtual vehicles on the
/// sensing boundary.
pub fn neighbors(world: &TrafficWorld, merger: &VehicleRecord, cfg: &RoadConfig) -> Neighbors {
    let (mx, my) = merger.position(cfg);
    let r2 = cfg.sensing_radius * cfg.sensing_radius;
    let sensed = |v: &&VehicleRecord| {
        let dx = v.d - mx;
        dx * dx + my * my <= r2
    };
    let (behind_edge, ahead_edge) = sensing_intersections(merger, cfg);

    // vehicles are leader-first, so ahead ones are a prefix
    let split = world.vehicles.iter().position(|v| v.d < merger.d).unwrap_or(world.vehicles.len());
    let mut ahead = world.vehicles[..split].iter().rev().filter(sensed);
    let mut behind = world.vehicles[split..].iter().filter(sensed);

    let pick = |it: &mut dyn Iterator<Item = &VehicleRecord>, edge: f64| {
        it.next().map(Neighbor::real).unwrap_or_else(|| Neighbor::virtual_at(edge, cfg))
    };
    let p1 = pick(&mut ahead, ahead_edge);
    let p2 = pick(&mut ahead, ahead_edge);
    let f1 = pick(&mut behind, behind_edge);
    let f2 = pick(&mut behind, behind_edge);
    Neighbors { p2, p1, f1, f2 }
}

/// Distance from the merger (or its projection) to the nearest main-road
/// vehicle, when the merger is on the main lane or inside the junction.
pub fn merger_clearance(world: &TrafficWorld, merger: &VehicleRecord, cfg: &RoadConfig) -> Option<f64> {
    let on_main = merger_on_main(merger, cfg)?;
    world.vehicles.iter().map(|v| (v.d - on_main.d).abs()).reduce(f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Events {
    pub collision: bool,
    pub stop: bool,
    pub success: bool,
    /// Decided once the merger leaves the junction; false before that.
    pub merged_behind: bool,
}

impl Events {
    /// The episode-terminating event, with collision taking precedence
    /// over stop and stop over success.
    pub fn terminal(&self) -> Option<Terminal> {
        if self.collision {
            Some(Terminal::Collision)
        } else if self.stop {
            Some(Terminal::Stop)
        } else if self.success {
            Some(Terminal::Success)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terminal {
    Collision,
    Stop,
    Success,
}

/// Per-episode event detection with the state needed for stop hysteresis
/// and the merge-behind decision.
#[derive(Debug, Clone, PartialEq)]
pub struct EventMonitor {
    slow_steps: u32,
    initial_f1: Option<u64>,
    merged_behind: Option<bool>,
}

impl EventMonitor {
    /// Captures the first following vehicle when the merger enters the
    /// control zone.
    pub fn start(world: &TrafficWorld, merger: &VehicleRecord, cfg: &RoadConfig) -> Self {
        Self { slow_steps: 0, initial_f1: neighbors(world, merger, cfg).f1.id, merged_behind: None }
    }

    pub fn initial_f1(&self) -> Option<u64> {
        self.initial_f1
    }

    pub fn observe(&mut self, world: &TrafficWorld, merger: &VehicleRecord, cfg: &RoadConfig) -> Events {
        let collision = merger_clearance(world, merger, cfg).is_some_and(|gap| gap < cfg.collision_gap);
        if merger.v < cfg.stop_speed {
            self.slow_steps += 1;
        } else {
            self.slow_steps = 0;
        }
        if self.merged_behind.is_none() && merger.d >= cfg.junction_half_len {
            self.merged_behind = Some(match self.initial_f1 {
                None => false,
                // a vehicle that already left the network is ahead
                Some(id) => world.vehicle(id).map_or(true, |f| f.d > merger.d),
            });
        }
        Events {
            collision,
            stop: self.slow_steps >= cfg.stop_steps,
            success: merger.d >= cfg.control_zone_len,
            merged_behind: self.merged_behind.unwrap_or(false),
        }
    }
}

/// Writes the CSV header for per-step trajectories.
pub fn write_trajectory_header(out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "step,vehicle_id,lane,d,v,a")
}

/// Appends one row per vehicle (merger included) for the given step.
pub fn write_trajectory_rows(
    out: &mut impl Write,
    step: u64,
    world: &TrafficWorld,
    merger: Option<&VehicleRecord>,
) -> std::io::Result<()> {
    for v in merger.into_iter().chain(world.vehicles.iter()) {
        writeln!(out, "{},{},{},{},{},{}", step, v.id, v.lane.as_str(), v.d, v.v, v.a)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cfg() -> RoadConfig {
        RoadConfig::default()
    }

    fn main_vehicle(id: u64, d: f64, v: f64, cfg: &RoadConfig) -> VehicleRecord {
        VehicleRecord { id, ..VehicleRecord::merger(d, v, cfg) }.with_lane(Lane::Main)
    }

    impl VehicleRecord {
        fn with_lane(mut self, lane: Lane) -> Self {
            self.lane = lane;
            self
        }
    }

    #[test]
    fn free_flow_equilibrium() {
        let c = cfg();
        let v = VehicleRecord { desired_speed: 25.0, ..main_vehicle(1, 0.0, 25.0, &c) };
        assert_eq!(idm_accel(&v, None, &c), 0.0);
    }

    #[test]
    fn standstill_free_road() {
        let c = cfg();
        let v = main_vehicle(1, 0.0, 0.0, &c);
        assert_eq!(idm_accel(&v, Some((1e9, 0.0)), &c), c.idm.max_accel);
    }

    #[test]
    fn closing_on_stopped_leader_hits_emergency_floor() {
        let c = cfg();
        let v = main_vehicle(1, 0.0, 30.0, &c);
        // raw IDM: s* = 2 + 30*1.0 + 30*30/(2*sqrt(6.5)) = 208.5, so
        // 2.6*(1 - (30/29.06)^4 - (208.5/5)^2) is far below -9
        assert_eq!(idm_accel(&v, Some((5.0, 0.0)), &c), -9.0);
        assert_eq!(idm_accel(&v, Some((0.0, 0.0)), &c), -9.0);
    }

    #[test]
    fn mild_braking_stays_in_normal_range() {
        let c = cfg();
        let v = main_vehicle(1, 0.0, 25.0, &c);
        let a = idm_accel(&v, Some((30.0, 24.0)), &c);
        assert!(a >= c.a_min && a < 0.0, "{a}");
    }

    #[test]
    fn projection_inside_junction_only() {
        let c = cfg();
        let m = VehicleRecord::merger(-10.0, 25.0, &c);
        let p = project_ramp_vehicle(&m, &c).unwrap();
        assert_eq!(p.d, -10.0);
        assert_eq!(p.lane, Lane::Main);
        assert!(project_ramp_vehicle(&VehicleRecord::merger(-50.0, 25.0, &c), &c).is_none());
        let past = VehicleRecord::merger(3.0, 25.0, &c);
        assert!(project_ramp_vehicle(&past, &c).is_none());
        assert_eq!(merger_on_main(&past, &c).unwrap().d, 3.0);
    }

    #[test]
    fn spawn_suppressed_by_standing_predecessor() {
        let c = RoadConfig { spawn_prob_per_s: 10.0, ..cfg() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pred = main_vehicle(1, -c.main_spawn_offset, 0.0, &c);
        for _ in 0..100 {
            assert!(spawn_main_vehicle(&mut rng, &c, Some(&pred), 2).is_none());
        }
    }

    #[test]
    fn spawn_respects_headway() {
        let c = RoadConfig { spawn_prob_per_s: 10.0, ..cfg() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pred = main_vehicle(1, -c.main_spawn_offset + 30.0, 10.0, &c);
        for _ in 0..100 {
            let v = spawn_main_vehicle(&mut rng, &c, Some(&pred), 2).unwrap();
            assert!(c.idm.min_gap + v.v * v.idm.time_headway <= 30.0 + 1e-9);
            assert!(v.v >= pred.v);
        }
    }

    #[test]
    fn empty_road_neighbors_are_virtual() {
        let c = cfg();
        let world = TrafficWorld::new(c, ChaCha8Rng::seed_from_u64(0));
        let m = VehicleRecord::merger(0.0, 25.0, &c);
        let n = neighbors(&world, &m, &c);
        for slot in [n.p1, n.p2, n.f1, n.f2] {
            assert!(slot.is_virtual());
            assert_eq!(slot.v, c.v_limit);
            assert_eq!(slot.a, 0.0);
        }
        assert_eq!(n.p1.d, 200.0);
        assert_eq!(n.f1.d, -200.0);
    }

    #[test]
    fn ramp_sensing_uses_circle_line_intersection() {
        let c = cfg();
        let world = TrafficWorld::new(c, ChaCha8Rng::seed_from_u64(0));
        let m = VehicleRecord::merger(-100.0, 25.0, &c);
        let n = neighbors(&world, &m, &c);
        let phi = 15f64.to_radians();
        let (x, y) = (-100.0 * phi.cos(), -100.0 * phi.sin());
        let half = (200.0f64.powi(2) - y * y).sqrt();
        assert!((n.p1.d - (x + half)).abs() < 1e-12);
        assert!((n.f2.d - (x - half)).abs() < 1e-12);
    }

    #[test]
    fn one_leader_then_virtual() {
        let c = cfg();
        let mut world = TrafficWorld::new(c, ChaCha8Rng::seed_from_u64(0));
        world.insert(main_vehicle(7, 30.0, 28.0, &c));
        let m = VehicleRecord::merger(0.0, 25.0, &c);
        let n = neighbors(&world, &m, &c);
        assert_eq!(n.p1.id, Some(7));
        assert!(n.p2.is_virtual());
        assert!(n.p2.d >= n.p1.d);
    }

    #[test]
    fn collision_threshold() {
        let c = cfg();
        let mut world = TrafficWorld::new(c, ChaCha8Rng::seed_from_u64(0));
        world.insert(main_vehicle(3, 12.4, 25.0, &c));
        let m = VehicleRecord::merger(10.0, 25.0, &c);
        let mut mon = EventMonitor::start(&world, &m, &c);
        assert!(mon.observe(&world, &m, &c).collision);

        let mut world = TrafficWorld::new(c, ChaCha8Rng::seed_from_u64(0));
        world.insert(main_vehicle(3, 12.6, 25.0, &c));
        let mut mon = EventMonitor::start(&world, &m, &c);
        assert!(!mon.observe(&world, &m, &c).collision);
    }

    #[test]
    fn ramp_merger_outside_junction_cannot_collide() {
        let c = cfg();
        let mut world = TrafficWorld::new(c, ChaCha8Rng::seed_from_u64(0));
        world.insert(main_vehicle(3, -50.0, 25.0, &c));
        let m = VehicleRecord::merger(-50.0, 25.0, &c);
        let mut mon = EventMonitor::start(&world, &m, &c);
        assert!(!mon.observe(&world, &m, &c).collision);
    }

    #[test]
    fn success_and_stop() {
        let c = cfg();
        let world = TrafficWorld::new(c, ChaCha8Rng::seed_from_u64(0));
        let m = VehicleRecord::merger(100.5, 25.0, &c);
        let mut mon = EventMonitor::start(&world, &m, &c);
        assert!(mon.observe(&world, &m, &c).success);

        let stopped = VehicleRecord::merger(-40.0, 0.0, &c);
        let mut mon = EventMonitor::start(&world, &stopped, &c);
        for _ in 0..4 {
            assert!(!mon.observe(&world, &stopped, &c).stop);
        }
        assert!(mon.observe(&world, &stopped, &c).stop);
    }

    #[test]
    fn merged_behind_decided_at_junction_exit() {
        let c = cfg();
        let mut world = TrafficWorld::new(c, ChaCha8Rng::seed_from_u64(0));
        world.insert(main_vehicle(5, -120.0, 29.0, &c));
        let m = VehicleRecord::merger(-100.0, 25.0, &c);
        let mut mon = EventMonitor::start(&world, &m, &c);
        assert_eq!(mon.initial_f1(), Some(5));

        // f1 overtakes before the merger clears the junction
        world.vehicles[0].d = 40.0;
        let m = VehicleRecord::merger(16.0, 25.0, &c);
        assert!(mon.observe(&world, &m, &c).merged_behind);
    }

    #[test]
    fn trajectory_rows_cover_all_vehicles() {
        let c = cfg();
        let mut world = TrafficWorld::new(c, ChaCha8Rng::seed_from_u64(0));
        world.insert(main_vehicle(5, -120.0, 29.0, &c));
        let m = VehicleRecord::merger(-100.0, 25.0, &c);
        let mut buf = Vec::new();
        write_trajectory_header(&mut buf).unwrap();
        write_trajectory_rows(&mut buf, 3, &world, Some(&m)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("3,0,ramp,-100,25,0"));
    }
}
