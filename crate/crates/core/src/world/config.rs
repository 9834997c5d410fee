use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vertiport {
    pub id: String,
    pub name: String,
    pub x: f64,
    pub y: f64,
}

impl Vertiport {
    pub fn new(id: &str, name: &str, x: f64, y: f64) -> Self {
        Self {
            id: id.to_owned(),
            name: name.to_owned(),
            x,
            y,
        }
    }
}

/// Five vertiports laid out like the Dallas / Fort Worth network: DFW airport
/// in the middle, Fort Worth to the west, downtown Dallas and Love Field to
/// the east and Frisco to the north-east. Coordinates sit on multiples of
/// one cruise step (73.762 m/s for 60 s) from DFW.
pub fn dallas_layout() -> Vec<Vertiport> {
    const STEP: f64 = 73.762 * 60.0;
    vec![
        Vertiport::new("A", "DFW Airport", 0.0, 0.0),
        Vertiport::new("B", "Fort Worth", -6.0 * STEP, -2.0 * STEP),
        Vertiport::new("C", "Downtown Dallas", 5.0 * STEP, -3.0 * STEP),
        Vertiport::new("D", "Love Field", 4.0 * STEP, 0.0),
        Vertiport::new("E", "Frisco", 3.0 * STEP, 6.0 * STEP),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    /// Γ: the operating area is `[-Γ, Γ]²`.
    pub half_extent_m: f64,
    pub episode_minutes: f64,
    pub step_seconds: f64,
    pub num_uams: usize,
    pub num_passengers: usize,
    /// D_th: distances beyond this are hidden in partial observations.
    pub observation_range_m: f64,
    /// C_th: closer than this counts as a collision.
    pub collision_threshold_m: f64,
    pub cruise_altitude_m: f64,
    pub vertiports: Vec<Vertiport>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            half_extent_m: 32_000.0,
            episode_minutes: 60.0,
            step_seconds: 60.0,
            num_uams: 10,
            num_passengers: 20,
            observation_range_m: 16_000.0,
            collision_threshold_m: 500.0,
            cruise_altitude_m: 600.0,
            vertiports: dallas_layout(),
        }
    }
}

impl WorldConfig {
    pub fn num_vertiports(&self) -> usize {
        self.vertiports.len()
    }

    pub fn steps_per_episode(&self) -> usize {
        (self.episode_minutes * 60.0 / self.step_seconds).round() as usize
    }

    /// Keeps only the first `n` vertiports of the layout.
    pub fn with_vertiports(mut self, n: usize) -> Self {
        self.vertiports.truncate(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertiports.len();
        if n < 2 {
            return Err(Error::Config(format!(
                "at least two vertiports are required for origin/destination pairs, got {n}"
            )));
        }
        if self.num_uams == 0 {
            return Err(Error::Config("num_uams must be at least 1".into()));
        }
        for (name, value) in [
            ("half_extent_m", self.half_extent_m),
            ("episode_minutes", self.episode_minutes),
            ("step_seconds", self.step_seconds),
            ("observation_range_m", self.observation_range_m),
            ("collision_threshold_m", self.collision_threshold_m),
            ("cruise_altitude_m", self.cruise_altitude_m),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if self.steps_per_episode() == 0 {
            return Err(Error::Config("episode shorter than one step".into()));
        }
        let g = self.half_extent_m;
        for (i, v) in self.vertiports.iter().enumerate() {
            if v.x.abs() > g || v.y.abs() > g {
                return Err(Error::Config(format!(
                    "vertiport {} at ({}, {}) lies outside the map",
                    v.id, v.x, v.y
                )));
            }
            if self.vertiports[..i].iter().any(|o| o.id == v.id) {
                return Err(Error::Config(format!("duplicate vertiport id {}", v.id)));
            }
        }
        Ok(())
    }
}
