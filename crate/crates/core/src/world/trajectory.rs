use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    TookOff {
        uam: usize,
        vertiport: usize,
    },
    Landed {
        uam: usize,
        vertiport: usize,
    },
    Boarded {
        uam: usize,
        passenger: usize,
        vertiport: usize,
    },
    Delivered {
        uam: usize,
        passenger: usize,
        vertiport: usize,
    },
    Collision {
        uam: usize,
    },
    Depleted {
        uam: usize,
    },
}

/// One line of a trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: usize,
    pub seed: u64,
    /// Step index after the transition, starting at 1.
    pub t: usize,
    pub positions: Vec<[f64; 3]>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub team_reward: f64,
    pub energy_kwh: Vec<f64>,
    pub events: Vec<Event>,
}
