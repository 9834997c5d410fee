use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationMode {
    /// Distances beyond the observation range are masked to −1.
    Pomdp,
    /// Nothing is masked and the ground-truth state is attached.
    Fomdp,
}

impl std::str::FromStr for ObservationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pomdp" => Ok(ObservationMode::Pomdp),
            "fomdp" => Ok(ObservationMode::Fomdp),
            other => Err(format!("unknown observation mode {other:?} (expected pomdp or fomdp)")),
        }
    }
}

impl std::fmt::Display for ObservationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObservationMode::Pomdp => "pomdp",
            ObservationMode::Fomdp => "fomdp",
        })
    }
}

/// What one UAM sees. Distances are in meters, −1 when out of range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub position: [f64; 3],
    pub uam_distances: Vec<f64>,
    pub vertiport_distances: Vec<f64>,
    /// Destination vertiport index over N per seat, −1 when empty.
    pub seats: Vec<f64>,
    pub energy_fraction: f64,
    /// Ground-truth state vector, present only in FOMDP mode.
    pub state: Option<Vec<f64>>,
}

impl Observation {
    pub fn len(&self) -> usize {
        3 + self.uam_distances.len() + self.vertiport_distances.len() + self.seats.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Raw observation as a flat vector, in meters.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.position);
        out.extend_from_slice(&self.uam_distances);
        out.extend_from_slice(&self.vertiport_distances);
        out.extend_from_slice(&self.seats);
        out.push(self.energy_fraction);
        out
    }

    /// Network input: horizontal coordinates and distances over the map
    /// half-extent, altitude over cruise altitude, masked entries kept at −1.
    /// In FOMDP mode the state vector comes first.
    pub fn features(&self, half_extent_m: f64, cruise_altitude_m: f64) -> Vec<f64> {
        let scale = |d: f64| if d < 0.0 { -1.0 } else { d / half_extent_m };
        let mut out = Vec::with_capacity(self.len() + self.state.as_ref().map_or(0, Vec::len));
        if let Some(state) = &self.state {
            out.extend_from_slice(state);
        }
        out.push(self.position[0] / half_extent_m);
        out.push(self.position[1] / half_extent_m);
        out.push(self.position[2] / cruise_altitude_m);
        out.extend(self.uam_distances.iter().map(|&d| scale(d)));
        out.extend(self.vertiport_distances.iter().map(|&d| scale(d)));
        out.extend_from_slice(&self.seats);
        out.push(self.energy_fraction);
        out
    }
}
