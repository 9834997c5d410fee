//! Rotorcraft power model and battery bookkeeping for a Joby S4-class eVTOL.
//!
//! All power math is in SI units (W, J, s). Battery quantities cross the
//! public interface in kWh and are converted with [`JOULES_PER_KWH`].
//!
//! The tabulated aircraft constants are used as-is even where they disagree
//! with the formula printed next to them (tip speed and mean induced
//! velocity). [`validate_spec`] recomputes the derived rows and reports the
//! deviations without changing the stored values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JOULES_PER_KWH: f64 = 3.6e6;

/// Seconds spent at hover power for one take-off or landing.
pub const VERTICAL_TRANSITION_SECONDS: f64 = 30.0;

pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AircraftSpec {
    pub max_passengers: usize,
    pub cruise_speed_mps: f64,
    pub mass_kg: f64,
    pub weight_n: f64,
    pub rotor_radius_m: f64,
    pub disc_area_m2: f64,
    pub blade_count: u32,
    pub rotor_solidity: f64,
    pub blade_angular_velocity_radps: f64,
    pub tip_speed_mps: f64,
    pub air_density_kgpm3: f64,
    pub fuselage_drag_ratio: f64,
    pub mean_induced_velocity_mps: f64,
    pub profile_drag_coeff: f64,
    pub induced_power_factor: f64,
}

impl Default for AircraftSpec {
    fn default() -> Self {
        Self {
            max_passengers: 4,
            cruise_speed_mps: 73.762,
            mass_kg: 1815.0,
            weight_n: 17799.0,
            rotor_radius_m: 1.45,
            disc_area_m2: 6.61,
            blade_count: 5,
            rotor_solidity: 0.2449,
            blade_angular_velocity_radps: 78.0,
            tip_speed_mps: 112.776,
            air_density_kgpm3: 1.225,
            fuselage_drag_ratio: 0.01,
            mean_induced_velocity_mps: 26.45,
            profile_drag_coeff: 0.045,
            induced_power_factor: 0.052,
        }
    }
}

impl AircraftSpec {
    /// Checks the strict-positivity invariants. `allow_zero_weight` relaxes
    /// the weight and induced-factor checks, which only feed the induced term.
    fn check(&self, allow_zero_weight: bool) -> Result<()> {
        let strictly_positive = [
            ("cruise_speed_mps", self.cruise_speed_mps),
            ("mass_kg", self.mass_kg),
            ("rotor_radius_m", self.rotor_radius_m),
            ("disc_area_m2", self.disc_area_m2),
            ("rotor_solidity", self.rotor_solidity),
            ("blade_angular_velocity_radps", self.blade_angular_velocity_radps),
            ("tip_speed_mps", self.tip_speed_mps),
            ("air_density_kgpm3", self.air_density_kgpm3),
            ("fuselage_drag_ratio", self.fuselage_drag_ratio),
            ("mean_induced_velocity_mps", self.mean_induced_velocity_mps),
            ("profile_drag_coeff", self.profile_drag_coeff),
        ];
        for (name, value) in strictly_positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {value}")));
            }
        }
        for (name, value) in [
            ("weight_n", self.weight_n),
            ("induced_power_factor", self.induced_power_factor),
        ] {
            let ok = if allow_zero_weight {
                value.is_finite() && value >= 0.0
            } else {
                value.is_finite() && value > 0.0
            };
            if !ok {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {value}")));
            }
        }
        if self.max_passengers == 0 {
            return Err(Error::InvalidSpec("max_passengers must be at least 1".into()));
        }
        if self.blade_count == 0 {
            return Err(Error::InvalidSpec("blade_count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatterySpec {
    pub battery_capacity_kwh: f64,
    pub charge_per_journey_kwh: f64,
    pub charge_time_per_journey_min: f64,
    pub charger_power_kw: f64,
    pub c_rate_per_hour: f64,
    pub soc_full_time_min: f64,
}

impl Default for BatterySpec {
    fn default() -> Self {
        Self {
            battery_capacity_kwh: 150.0,
            charge_per_journey_kwh: 30.0,
            charge_time_per_journey_min: 5.0,
            charger_power_kw: 360.0,
            c_rate_per_hour: 2.4,
            soc_full_time_min: 25.0,
        }
    }
}

impl BatterySpec {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("battery_capacity_kwh", self.battery_capacity_kwh),
            ("charge_per_journey_kwh", self.charge_per_journey_kwh),
            ("charge_time_per_journey_min", self.charge_time_per_journey_min),
            ("charger_power_kw", self.charger_power_kw),
            ("c_rate_per_hour", self.c_rate_per_hour),
            ("soc_full_time_min", self.soc_full_time_min),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("battery {name} must be positive, got {value}")));
            }
        }
        Ok(())
    }

    pub fn charger_power_w(&self) -> f64 {
        self.charger_power_kw * 1e3
    }

    /// Charge delivered by the charger in one journey's charging window, kWh.
    pub fn charger_journey_kwh(&self) -> f64 {
        self.charger_power_kw * self.charge_time_per_journey_min / 60.0
    }

    pub fn journey_fraction(&self) -> f64 {
        self.charge_per_journey_kwh / self.battery_capacity_kwh
    }
}

/// Remaining battery energy, kWh. Always within `[0, capacity]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EnergyState {
    pub remaining_kwh: f64,
}

impl EnergyState {
    pub fn full(battery: &BatterySpec) -> Self {
        Self {
            remaining_kwh: battery.battery_capacity_kwh,
        }
    }

    pub fn new(remaining_kwh: f64, battery: &BatterySpec) -> Self {
        Self {
            remaining_kwh: remaining_kwh.clamp(0.0, battery.battery_capacity_kwh),
        }
    }

    pub fn is_depleted(&self) -> bool {
        self.remaining_kwh <= 0.0
    }

    pub fn fraction(&self, battery: &BatterySpec) -> f64 {
        self.remaining_kwh / battery.battery_capacity_kwh
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoverPower {
    /// Blade-profile component.
    pub profile_w: f64,
    /// Induced component.
    pub induced_w: f64,
    pub total_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CruisePower {
    pub induced_w: f64,
    pub profile_w: f64,
    pub parasite_w: f64,
    pub total_w: f64,
}

/// Hover power: blade profile `(C_d/8)·ρ·s·A·Ω³·R³` plus induced
/// `(1+k)·W^{3/2}/√(2ρA)`.
pub fn hover_power(spec: &AircraftSpec) -> Result<HoverPower> {
    spec.check(true)?;
    let profile_w = spec.profile_drag_coeff / 8.0
        * spec.air_density_kgpm3
        * spec.rotor_solidity
        * spec.disc_area_m2
        * spec.blade_angular_velocity_radps.powi(3)
        * spec.rotor_radius_m.powi(3);
    let induced_w = (1.0 + spec.induced_power_factor) * spec.weight_n.powf(1.5)
        / (2.0 * spec.air_density_kgpm3 * spec.disc_area_m2).sqrt();
    Ok(HoverPower {
        profile_w,
        induced_w,
        total_w: profile_w + induced_w,
    })
}

/// Forward-flight propulsion power at airspeed `speed_mps`.
pub fn cruise_power(spec: &AircraftSpec, speed_mps: f64) -> Result<CruisePower> {
    if !(speed_mps.is_finite() && speed_mps >= 0.0) {
        return Err(Error::Domain(format!("speed must be non-negative, got {speed_mps}")));
    }
    let hover = hover_power(spec)?;
    let v2 = speed_mps * speed_mps;
    let v0_2 = spec.mean_induced_velocity_mps * spec.mean_induced_velocity_mps;
    let induced_factor = ((1.0 + v2 * v2 / (4.0 * v0_2 * v0_2)).sqrt() - v2 / (2.0 * v0_2)).sqrt();
    let induced_w = hover.induced_w * induced_factor;
    let profile_w = hover.profile_w * (1.0 + 3.0 * v2 / (spec.tip_speed_mps * spec.tip_speed_mps));
    let parasite_w = 0.5
        * spec.fuselage_drag_ratio
        * spec.air_density_kgpm3
        * spec.rotor_solidity
        * spec.disc_area_m2
        * speed_mps.powi(3);
    Ok(CruisePower {
        induced_w,
        profile_w,
        parasite_w,
        total_w: induced_w + profile_w + parasite_w,
    })
}

/// What a UAM did during one step, as far as the battery is concerned.
/// Horizontal and vertical motion are mutually exclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Idle,
    /// Horizontal displacement in meters, at most `v·Δt` long.
    Horizontal([f64; 2]),
    /// A take-off or landing attempt, always [`VERTICAL_TRANSITION_SECONDS`] of hover.
    Vertical,
}

/// Precomputed cruise and hover power so the simulator does not re-evaluate
/// the aerodynamics every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerProfile {
    pub hover_w: f64,
    pub cruise_w: f64,
    pub cruise_speed_mps: f64,
}

impl PowerProfile {
    pub fn new(spec: &AircraftSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            hover_w: hover_power(spec)?.total_w,
            cruise_w: cruise_power(spec, spec.cruise_speed_mps)?.total_w,
            cruise_speed_mps: spec.cruise_speed_mps,
        })
    }

    /// Energy drawn by `motion` over a step of `dt_s` seconds, in joules.
    ///
    /// The per-step expression is a power, so it is multiplied by `dt_s` to
    /// get energy. Horizontal cost scales with the squared fraction of a
    /// full-speed step actually flown.
    pub fn draw_joules(&self, motion: Motion, dt_s: f64) -> f64 {
        match motion {
            Motion::Idle => 0.0,
            Motion::Horizontal([dx, dy]) => {
                let full = self.cruise_speed_mps * dt_s;
                debug_assert!(
                    (dx * dx + dy * dy).sqrt() <= full * (1.0 + 1e-9),
                    "horizontal displacement longer than one step"
                );
                self.cruise_w * (dx * dx + dy * dy) / (full * full) * dt_s
            }
            Motion::Vertical => self.hover_w * VERTICAL_TRANSITION_SECONDS,
        }
    }
}

/// Discharges the battery for one step of `motion`, clamping at empty.
pub fn step_energy(
    energy: EnergyState,
    motion: Motion,
    dt_s: f64,
    spec: &AircraftSpec,
    battery: &BatterySpec,
) -> Result<EnergyState> {
    let profile = PowerProfile::new(spec)?;
    Ok(discharge(energy, profile.draw_joules(motion, dt_s), battery))
}

pub(crate) fn discharge(energy: EnergyState, joules: f64, battery: &BatterySpec) -> EnergyState {
    EnergyState::new(energy.remaining_kwh - joules / JOULES_PER_KWH, battery)
}

/// Charges at the rated charger power for `grounded_s` seconds, clamped at capacity.
pub fn charge(energy: EnergyState, grounded_s: f64, battery: &BatterySpec) -> Result<EnergyState> {
    if !(grounded_s.is_finite() && grounded_s >= 0.0) {
        return Err(Error::Domain(format!(
            "charging duration must be non-negative, got {grounded_s}"
        )));
    }
    let added_kwh = battery.charger_power_w() * grounded_s / JOULES_PER_KWH;
    Ok(EnergyState::new(energy.remaining_kwh + added_kwh, battery))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldCheck {
    pub field: &'static str,
    pub formula: &'static str,
    pub stored: f64,
    pub recomputed: f64,
    pub relative_deviation: f64,
    /// Deviation above [`SpecDiagnostics::TOLERANCE`]; the stored value is still used.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecDiagnostics {
    pub checks: Vec<FieldCheck>,
}

impl SpecDiagnostics {
    pub const TOLERANCE: f64 = 0.01;

    pub fn get(&self, field: &str) -> Option<&FieldCheck> {
        self.checks.iter().find(|c| c.field == field)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &FieldCheck> {
        self.checks.iter().filter(|c| c.flagged)
    }
}

impl std::fmt::Display for SpecDiagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<26} {:<22} {:>14} {:>14} {:>10}",
            "field", "formula", "stored", "recomputed", "rel.dev"
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<26} {:<22} {:>14.6} {:>14.6} {:>9.4}%{}",
                c.field,
                c.formula,
                c.stored,
                c.recomputed,
                100.0 * c.relative_deviation,
                if c.flagged {
                    "  (discrepancy, stored value used)"
                } else {
                    ""
                }
            )?;
        }
        Ok(())
    }
}

/// Recomputes the derived rows of the aircraft table from the primary ones.
pub fn validate_spec(spec: &AircraftSpec) -> SpecDiagnostics {
    use std::f64::consts::PI;

    let radius = spec.rotor_radius_m;
    let area = PI * radius * radius;
    let solidity = 0.2231 * f64::from(spec.blade_count) / (PI * radius);
    let rows: [(&'static str, &'static str, f64, f64); 6] = [
        ("weight_n", "m*g", spec.weight_n, spec.mass_kg * STANDARD_GRAVITY),
        ("disc_area_m2", "pi*R^2", spec.disc_area_m2, area),
        ("rotor_solidity", "0.2231*b/(pi*R)", spec.rotor_solidity, solidity),
        (
            "fuselage_drag_ratio",
            "0.0151/(s*A)",
            spec.fuselage_drag_ratio,
            0.0151 / (spec.rotor_solidity * spec.disc_area_m2),
        ),
        (
            "tip_speed_mps",
            "Omega*R^2",
            spec.tip_speed_mps,
            spec.blade_angular_velocity_radps * radius * radius,
        ),
        (
            "mean_induced_velocity_mps",
            "sqrt(W/(s*rho*A))",
            spec.mean_induced_velocity_mps,
            (spec.weight_n / (spec.rotor_solidity * spec.air_density_kgpm3 * spec.disc_area_m2)).sqrt(),
        ),
    ];
    let checks = rows
        .into_iter()
        .map(|(field, formula, stored, recomputed)| {
            let relative_deviation = ((recomputed - stored) / stored).abs();
            FieldCheck {
                field,
                formula,
                stored,
                recomputed,
                relative_deviation,
                flagged: relative_deviation.is_nan() || relative_deviation > SpecDiagnostics::TOLERANCE,
            }
        })
        .collect();
    SpecDiagnostics { checks }
}
