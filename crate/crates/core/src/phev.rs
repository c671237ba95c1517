//! Control-oriented model of a plug-in hybrid powertrain in the power domain.
//!
//! Powers are in watts, energy prices in USD, time in seconds. Positive
//! battery power discharges the pack; positive motor-generator power
//! propels the vehicle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joules per kilowatt-hour.
const J_PER_KWH: f64 = 3.6e6;

/// Lower bound on velocity used in the `P / v` traction term.
pub const VELOCITY_FLOOR: f64 = 0.1;

/// Powertrain, battery and vehicle constants.
///
/// The defaults are assembled from published figures for the 2015 Toyota
/// Prius Plug-In. The battery polynomials are constant over SOC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhevParams {
    pub eta_m: f64,
    pub eta_g: f64,
    pub eta_t: f64,
    pub eta_b: f64,
    pub eta_chr: f64,
    /// Accessory load drawn from the battery (W).
    pub p_aux: f64,
    /// Fuel-map slope (kg/s per W).
    pub a1: f64,
    /// Fuel-map intercept (kg/s).
    pub a2: f64,
    /// Open-circuit voltage `b1 soc^2 + b2 soc + b3` (V).
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// Internal resistance `c1 soc^2 + c2 soc + c3` (ohm).
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Battery capacity (C).
    pub q_max: f64,
    pub mass: f64,
    pub cd: f64,
    pub rho: f64,
    pub area: f64,
    pub mu: f64,
    /// Speed-dependent rolling coefficient (s/m).
    pub mu2: f64,
    pub gravity: f64,
    pub p_eng_max: f64,
    pub p_brk_min: f64,
    pub p_g_min: f64,
    pub p_m_max: f64,
    pub p_b_min: f64,
    pub p_b_max: f64,
    /// Fuel price (USD/kg).
    pub k_f: f64,
    /// Electricity price (USD/kWh).
    pub k_e: f64,
}

impl Default for PhevParams {
    fn default() -> Self {
        Self {
            eta_m: 0.90,
            eta_g: 0.90,
            eta_t: 0.95,
            eta_b: 0.95,
            eta_chr: 0.90,
            p_aux: 300.0,
            // ~220 g/kWh brake-specific consumption on the optimal line
            a1: 6.1e-8,
            a2: 1.0e-4,
            b1: 0.0,
            b2: 0.0,
            b3: 207.2,
            c1: 0.0,
            c2: 0.0,
            c3: 0.2,
            // 4.4 kWh at 207.2 V
            q_max: 4.4 * J_PER_KWH / 207.2,
            mass: 1530.0,
            cd: 0.25,
            rho: 1.2,
            area: 2.17,
            mu: 0.008,
            mu2: 1.2e-4,
            gravity: 9.81,
            p_eng_max: 73_000.0,
            p_brk_min: -150_000.0,
            p_g_min: -30_000.0,
            // battery-limited electric propulsion
            p_m_max: 38_000.0,
            p_b_min: -35_000.0,
            p_b_max: 43_000.0,
            k_f: 0.93,
            k_e: 0.13,
        }
    }
}

impl PhevParams {
    /// Parses a complete parameter document. Every field must be present
    /// and no extra keys are accepted.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let params: Self =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("phev params: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |field: &'static str, reason: String| Err(Error::InvalidParam { field, reason });
        for (field, value) in [
            ("eta_m", self.eta_m),
            ("eta_g", self.eta_g),
            ("eta_t", self.eta_t),
            ("eta_b", self.eta_b),
            ("eta_chr", self.eta_chr),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                return invalid(field, format!("efficiency {value} not in (0, 1]"));
            }
        }
        let all = [
            ("p_aux", self.p_aux),
            ("a1", self.a1),
            ("a2", self.a2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("b3", self.b3),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("q_max", self.q_max),
            ("mass", self.mass),
            ("cd", self.cd),
            ("rho", self.rho),
            ("area", self.area),
            ("mu", self.mu),
            ("mu2", self.mu2),
            ("gravity", self.gravity),
            ("p_eng_max", self.p_eng_max),
            ("p_brk_min", self.p_brk_min),
            ("p_g_min", self.p_g_min),
            ("p_m_max", self.p_m_max),
            ("p_b_min", self.p_b_min),
            ("p_b_max", self.p_b_max),
            ("k_f", self.k_f),
            ("k_e", self.k_e),
        ];
        for (field, value) in all {
            if !value.is_finite() {
                return invalid(field, format!("{value} is not finite"));
            }
        }
        if self.q_max <= 0.0 {
            return invalid("q_max", format!("{} must be > 0", self.q_max));
        }
        if self.mass <= 0.0 {
            return invalid("mass", format!("{} must be > 0", self.mass));
        }
        for (field, value) in [("p_eng_max", self.p_eng_max), ("p_m_max", self.p_m_max), ("p_b_max", self.p_b_max)] {
            if value < 0.0 {
                return invalid(field, format!("{value} must be >= 0"));
            }
        }
        for (field, value) in [("p_brk_min", self.p_brk_min), ("p_g_min", self.p_g_min), ("p_b_min", self.p_b_min)] {
            if value > 0.0 {
                return invalid(field, format!("{value} must be <= 0"));
            }
        }
        if self.p_aux < self.p_b_min || self.p_aux > self.p_b_max {
            return invalid("p_aux", format!("{} outside battery limits", self.p_aux));
        }
        for (field, value) in [
            ("k_f", self.k_f),
            ("k_e", self.k_e),
            ("a1", self.a1),
            ("a2", self.a2),
            ("gravity", self.gravity),
        ] {
            if value < 0.0 {
                return invalid(field, format!("{value} must be >= 0"));
            }
        }
        // The polynomials are quadratics; a fine grid is enough to reject
        // configurations that go non-positive or cannot deliver p_b_max.
        for i in 0..=1000 {
            let soc = i as f64 / 1000.0;
            let voc = self.open_circuit_voltage(soc);
            let r = self.internal_resistance(soc);
            if voc <= 0.0 {
                return invalid("b3", format!("open-circuit voltage {voc} <= 0 at soc {soc}"));
            }
            if r <= 0.0 {
                return invalid("c3", format!("internal resistance {r} <= 0 at soc {soc}"));
            }
            let deliverable = voc * voc / (4.0 * r);
            if self.p_b_max > deliverable {
                return invalid(
                    "p_b_max",
                    format!("{} exceeds deliverable power {deliverable} at soc {soc}", self.p_b_max),
                );
            }
        }
        Ok(())
    }

    pub fn open_circuit_voltage(&self, soc: f64) -> f64 {
        (self.b1 * soc + self.b2) * soc + self.b3
    }

    pub fn internal_resistance(&self, soc: f64) -> f64 {
        (self.c1 * soc + self.c2) * soc + self.c3
    }

    /// Electricity price converted to USD per joule.
    pub fn k_e_per_joule(&self) -> f64 {
        self.k_e / J_PER_KWH
    }

    /// Motor-generator limits after intersecting the machine limits with the
    /// battery limits mapped through the motor/generator efficiencies.
    pub fn effective_mg_limits(&self) -> (f64, f64) {
        let gen_from_battery = (self.p_b_min - self.p_aux) / self.eta_g;
        let motor_from_battery = (self.p_b_max - self.p_aux) * self.eta_m;
        (
            self.p_g_min.max(gen_from_battery).min(0.0),
            self.p_m_max.min(motor_from_battery).max(0.0),
        )
    }
}

/// Resolved component powers for one time step (W).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerSplit {
    pub p_d: f64,
    pub p_eng: f64,
    pub p_mg: f64,
    pub p_fbk: f64,
    pub p_b: f64,
}

impl PowerSplit {
    /// Builds a split from its components; `p_d` and `p_b` are derived so the
    /// power balance holds by construction.
    pub fn from_components(p_eng: f64, p_mg: f64, p_fbk: f64, params: &PhevParams) -> Self {
        Self {
            p_d: p_eng + p_mg + p_fbk,
            p_eng,
            p_mg,
            p_fbk,
            p_b: battery_power_unchecked(p_mg, params),
        }
    }

    /// Checks power balance, component limits and battery coupling.
    pub fn check(&self, params: &PhevParams) -> Result<()> {
        let tol = 1e-9;
        let violation = |limit: &'static str, value: f64| Err(Error::Constraint { limit, value });
        if self.p_eng + self.p_mg + self.p_fbk - self.p_d != 0.0 {
            return violation("power balance", self.p_eng + self.p_mg + self.p_fbk - self.p_d);
        }
        if self.p_eng < 0.0 {
            return violation("p_eng >= 0", self.p_eng);
        }
        if self.p_eng > params.p_eng_max + tol {
            return violation("p_eng_max", self.p_eng);
        }
        if self.p_fbk > 0.0 {
            return violation("p_fbk <= 0", self.p_fbk);
        }
        if self.p_fbk < params.p_brk_min - tol {
            return violation("p_brk_min", self.p_fbk);
        }
        if self.p_mg < params.p_g_min - tol {
            return violation("p_g_min", self.p_mg);
        }
        if self.p_mg > params.p_m_max + tol {
            return violation("p_m_max", self.p_mg);
        }
        if self.p_b < params.p_b_min - tol {
            return violation("p_b_min", self.p_b);
        }
        if self.p_b > params.p_b_max + tol {
            return violation("p_b_max", self.p_b);
        }
        let expected = battery_power_unchecked(self.p_mg, params);
        if (expected - self.p_b).abs() > tol * expected.abs().max(1.0) {
            return violation("battery coupling", self.p_b - expected);
        }
        Ok(())
    }
}

/// Battery state of charge, always finite and within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    soc: f64,
}

impl BatteryState {
    /// Creates a state, clamping into `[0, 1]`. Non-finite input is an error.
    pub fn new(soc: f64) -> Result<Self> {
        if !soc.is_finite() {
            return Err(Error::Constraint { limit: "finite soc", value: soc });
        }
        Ok(Self { soc: soc.clamp(0.0, 1.0) })
    }

    pub fn soc(&self) -> f64 {
        self.soc
    }
}

fn battery_power_unchecked(p_mg: f64, params: &PhevParams) -> f64 {
    if p_mg >= 0.0 {
        p_mg / params.eta_m + params.p_aux
    } else {
        p_mg * params.eta_g + params.p_aux
    }
}

/// Battery terminal power drawn to deliver `p_mg` at the motor-generator.
pub fn battery_power(p_mg: f64, params: &PhevParams) -> Result<f64> {
    if p_mg < params.p_g_min {
        return Err(Error::Constraint { limit: "p_g_min", value: p_mg });
    }
    if p_mg > params.p_m_max {
        return Err(Error::Constraint { limit: "p_m_max", value: p_mg });
    }
    Ok(battery_power_unchecked(p_mg, params))
}

/// Engine fuel mass flow (kg/s) on the linear optimal-operation map.
pub fn fuel_rate(p_eng: f64, params: &PhevParams) -> Result<f64> {
    if p_eng < 0.0 {
        return Err(Error::Constraint { limit: "p_eng >= 0", value: p_eng });
    }
    if p_eng > params.p_eng_max {
        return Err(Error::Constraint { limit: "p_eng_max", value: p_eng });
    }
    if p_eng == 0.0 {
        Ok(0.0)
    } else {
        Ok(params.a1 * p_eng + params.a2)
    }
}

/// Rate of change of SOC (1/s) for terminal power `p_b` at the given SOC.
///
/// Uses the equivalent-circuit relation `p_b = I V_oc - I^2 R_b` and takes the
/// physically meaningful (smaller) current root. The root is evaluated as
/// `2 p_b / (V_oc + sqrt(disc))`, which equals `(V_oc - sqrt(disc)) / 2 R_b`
/// without the cancellation at small `p_b`.
pub fn soc_derivative(soc: f64, p_b: f64, params: &PhevParams) -> Result<f64> {
    let voc = params.open_circuit_voltage(soc);
    let r = params.internal_resistance(soc);
    let disc = voc * voc - 4.0 * r * p_b;
    if disc < 0.0 {
        return Err(Error::Saturation { requested: p_b, max_feasible: voc * voc / (4.0 * r) });
    }
    let current = 2.0 * p_b / (voc + disc.sqrt());
    Ok(-current / params.q_max)
}

/// Sum of aerodynamic, rolling and grade resistance forces (N).
fn resistance_force(v: f64, theta: f64, params: &PhevParams) -> f64 {
    0.5 * params.cd * params.rho * params.area * v * v
        + (params.mu + params.mu2 * v) * params.mass * params.gravity * theta.cos()
        + params.mass * params.gravity * theta.sin()
}

/// Longitudinal acceleration produced by the pre-transmission power demand.
pub fn longitudinal_accel(v: f64, p_d: f64, theta: f64, params: &PhevParams) -> f64 {
    let wheel_power = if p_d >= 0.0 { p_d * params.eta_t } else { p_d / params.eta_t };
    (wheel_power / v.max(VELOCITY_FLOOR) - resistance_force(v, theta, params)) / params.mass
}

/// Inverse of [`longitudinal_accel`]: the power demand that yields `a_d`.
pub fn demand_for_accel(v: f64, a_d: f64, theta: f64, params: &PhevParams) -> f64 {
    let raw = (params.mass * a_d + resistance_force(v, theta, params)) * v.max(VELOCITY_FLOOR);
    if raw >= 0.0 {
        raw / params.eta_t
    } else {
        raw * params.eta_t
    }
}

/// Monetary energy cost (USD) of running at `p_eng`/`p_b` for `dt`, split
/// into its fuel and electricity parts.
pub fn energy_cost(p_eng: f64, p_b: f64, dt: f64, params: &PhevParams) -> Result<(f64, f64)> {
    let fuel = params.k_f * fuel_rate(p_eng, params)? * dt;
    let electricity = params.k_e_per_joule() * p_b / (params.eta_b * params.eta_chr) * dt;
    Ok((fuel, electricity))
}

/// Result of one powertrain integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowertrainStep {
    pub battery: BatteryState,
    pub v: f64,
    pub accel: f64,
    /// Fuel mass burned over the step (kg).
    pub fuel: f64,
    pub fuel_cost: f64,
    pub electricity_cost: f64,
    pub cost: f64,
    /// True when the SOC left `[0, 1]` and was clamped.
    pub soc_clamped: bool,
}

/// Explicit-Euler update of SOC and velocity for one step of length `dt`.
pub fn step_powertrain(
    state: BatteryState,
    split: &PowerSplit,
    v: f64,
    dt: f64,
    theta: f64,
    params: &PhevParams,
) -> Result<PowertrainStep> {
    if !(dt > 0.0) {
        return Err(Error::Constraint { limit: "dt > 0", value: dt });
    }
    let dsoc = soc_derivative(state.soc, split.p_b, params)?;
    let raw_soc = state.soc + dsoc * dt;
    let soc_clamped = !(0.0..=1.0).contains(&raw_soc);
    let battery = BatteryState::new(raw_soc)?;

    let accel = if v <= 0.0 && split.p_d <= 0.0 {
        // at standstill braking holds the car, it does not reverse it
        0.0
    } else {
        longitudinal_accel(v, split.p_d, theta, params)
    };
    let v_next = (v + accel * dt).max(0.0);
    let fuel = fuel_rate(split.p_eng, params)? * dt;
    let (fuel_cost, electricity_cost) = energy_cost(split.p_eng, split.p_b, dt, params)?;
    Ok(PowertrainStep {
        battery,
        v: v_next,
        accel,
        fuel,
        fuel_cost,
        electricity_cost,
        cost: fuel_cost + electricity_cost,
        soc_clamped,
    })
}

/// Largest per-step energy cost: engine and battery both at their maxima.
pub fn max_cost_per_step(params: &PhevParams, dt: f64) -> f64 {
    let fuel = params.k_f * (params.a1 * params.p_eng_max + params.a2);
    let electricity = params.k_e_per_joule() * params.p_b_max / (params.eta_b * params.eta_chr);
    (fuel + electricity) * dt
}
