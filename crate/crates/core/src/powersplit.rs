//! Resolution of high-level commands into constraint-satisfying power splits.
//!
//! Three request kinds are supported: a direct engine / combined-channel
//! split, a pre-transmission power demand handled by the blended
//! charge-depleting rule, and an acceleration demand that is converted to a
//! power demand through the vehicle dynamics first.

use serde::{Deserialize, Serialize};

use crate::phev::{demand_for_accel, longitudinal_accel, PhevParams, PowerSplit};

/// Tolerance used when deciding whether a demand was met.
pub const SATURATION_TOL: f64 = 1e-9;

/// A command for the lower-level power split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitKind {
    /// Engine power plus the combined motor-generator / friction-brake power.
    Coop { p_eng: f64, p_cb: f64 },
    PowerDemand { p_d: f64 },
    AccelDemand { a_d: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRequest {
    pub kind: SplitKind,
    pub v: f64,
    pub soc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitResolution {
    pub split: PowerSplit,
    /// The requested demand could not be delivered within the limits.
    pub saturated: bool,
    pub achieved_accel: f64,
}

impl SplitRequest {
    pub fn resolve(&self, params: &PhevParams) -> SplitResolution {
        match self.kind {
            SplitKind::Coop { p_eng, p_cb } => resolve_coop(p_eng, p_cb, self.v, params),
            SplitKind::PowerDemand { p_d } => blended_cd(p_d, self.v, params),
            SplitKind::AccelDemand { a_d } => resolve_accel(a_d, self.v, params),
        }
    }
}

/// Splits a braking demand: the generator absorbs as much as it can and the
/// friction brake takes the rest. Returns `(p_mg, p_fbk, saturated)`.
fn split_braking(p_brake: f64, params: &PhevParams) -> (f64, f64, bool) {
    let (mg_min, _) = params.effective_mg_limits();
    let p_mg = p_brake.max(mg_min);
    let wanted_fbk = p_brake - p_mg;
    let p_fbk = wanted_fbk.max(params.p_brk_min);
    (p_mg, p_fbk, wanted_fbk < params.p_brk_min - SATURATION_TOL)
}

fn resolution(split: PowerSplit, saturated: bool, v: f64, params: &PhevParams) -> SplitResolution {
    SplitResolution { split, saturated, achieved_accel: longitudinal_accel(v, split.p_d, 0.0, params) }
}

/// Co-optimization action: engine power and combined channel power.
///
/// Positive combined power goes to the motor with the friction brake idle.
/// Negative combined power is absorbed by regeneration first; the friction
/// brake only covers what exceeds the effective generator limit. The
/// action box is the limit box, so this never reports saturation.
pub fn resolve_coop(p_eng: f64, p_cb: f64, v: f64, params: &PhevParams) -> SplitResolution {
    let p_eng = p_eng.clamp(0.0, params.p_eng_max);
    let (_, mg_max) = params.effective_mg_limits();
    let (p_mg, p_fbk) = if p_cb >= 0.0 {
        (p_cb.min(mg_max), 0.0)
    } else {
        let (p_mg, p_fbk, _) = split_braking(p_cb, params);
        (p_mg, p_fbk)
    };
    let split = PowerSplit::from_components(p_eng, p_mg, p_fbk, params);
    resolution(split, false, v, params)
}

/// Largest positive demand the battery can cover alone.
pub fn battery_only_capability(params: &PhevParams) -> f64 {
    params.effective_mg_limits().1
}

/// Blended charge-depleting energy management.
///
/// Electric drive while the battery can cover the demand; otherwise the
/// engine supplies the demand up to its limit and the motor makes up the
/// remainder.
pub fn blended_cd(p_d: f64, v: f64, params: &PhevParams) -> SplitResolution {
    if p_d <= 0.0 {
        let (p_mg, p_fbk, saturated) = split_braking(p_d, params);
        let split = PowerSplit::from_components(0.0, p_mg, p_fbk, params);
        return resolution(split, saturated, v, params);
    }
    let mg_max = battery_only_capability(params);
    if p_d <= mg_max {
        let split = PowerSplit::from_components(0.0, p_d, 0.0, params);
        return resolution(split, false, v, params);
    }
    let p_eng = p_d.min(params.p_eng_max);
    let residual = p_d - p_eng;
    let p_mg = residual.min(mg_max);
    let split = PowerSplit::from_components(p_eng, p_mg, 0.0, params);
    resolution(split, residual > mg_max + SATURATION_TOL, v, params)
}

/// Acceleration demand converted to a power demand and split by
/// [`blended_cd`]. `achieved_accel` reflects any saturation.
pub fn resolve_accel(a_d: f64, v: f64, params: &PhevParams) -> SplitResolution {
    blended_cd(demand_for_accel(v, a_d, 0.0, params), v, params)
}
