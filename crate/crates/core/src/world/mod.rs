//! Multi-UAM air-taxi environment: vertiports, passengers, battery-limited
//! aircraft, partial observations and the shaped team reward.
//!
//! One call to [`Environment::step`] advances every UAM by `step_seconds`.
//! Horizontal moves only happen at cruise altitude; on the pad the only
//! meaningful action is a take-off, everything else holds (and charges).
//! Any grounded UAM exchanges passengers at the end of each step: onboard
//! passengers bound for that vertiport alight, then waiting passengers board
//! in queue order until the seats are full.

mod action;
mod config;
mod observation;
mod reward;
mod trajectory;

pub use action::{Action, Heading, NUM_ACTIONS};
pub use config::{dallas_layout, Vertiport, WorldConfig};
pub use observation::{Observation, ObservationMode};
pub use reward::{compute_reward, Rewards};
pub use trajectory::{Event, TrajectoryRecord};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aero::{self, AircraftSpec, BatterySpec, EnergyState, Motion, PowerProfile, JOULES_PER_KWH};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PassengerStatus {
    Waiting,
    Onboard { uam: usize, seat: usize },
    Delivered { uam: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passenger {
    pub id: usize,
    pub origin: usize,
    pub destination: usize,
    pub status: PassengerStatus,
    pub queue_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UamState {
    pub id: usize,
    pub position: [f64; 3],
    /// One entry per seat, holding the passenger id.
    pub seats: Vec<Option<usize>>,
    pub energy: EnergyState,
    pub grounded_at: Option<usize>,
}

impl UamState {
    pub fn is_grounded(&self) -> bool {
        self.grounded_at.is_some()
    }

    pub fn occupied_seats(&self) -> usize {
        self.seats.iter().filter(|s| s.is_some()).count()
    }
}

/// Per-step result of [`Environment::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Rewards,
    pub done: bool,
    pub events: Vec<Event>,
    /// Actions actually applied, after depleted UAMs were forced to hold.
    pub applied: Vec<Action>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyLedger {
    pub discharged_kwh: f64,
    pub charged_kwh: f64,
}

#[derive(Debug, Clone)]
pub struct Environment {
    config: WorldConfig,
    aircraft: AircraftSpec,
    battery: BatterySpec,
    power: PowerProfile,
    seed: u64,
    t: usize,
    steps: usize,
    uams: Vec<UamState>,
    passengers: Vec<Passenger>,
    /// `served[j][xi]`: passenger xi was delivered by UAM j.
    served: Vec<Vec<bool>>,
    /// `visited[j][n]`: UAM j has landed at vertiport n.
    visited: Vec<Vec<bool>>,
    energy_ledger: Vec<EnergyLedger>,
}

impl Environment {
    /// Starts an episode: UAMs parked at uniformly random vertiports with full
    /// batteries, passengers with random distinct origin and destination.
    pub fn new(config: &WorldConfig, aircraft: &AircraftSpec, battery: &BatterySpec, seed: u64) -> Result<Self> {
        config.validate()?;
        battery.validate()?;
        let power = PowerProfile::new(aircraft)?;
        let n = config.num_vertiports();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let uams = (0..config.num_uams)
            .map(|id| {
                let port = rng.random_range(0..n);
                let v = &config.vertiports[port];
                UamState {
                    id,
                    position: [v.x, v.y, 0.0],
                    seats: vec![None; aircraft.max_passengers],
                    energy: EnergyState::full(battery),
                    grounded_at: Some(port),
                }
            })
            .collect();
        let passengers = (0..config.num_passengers)
            .map(|id| {
                let origin = rng.random_range(0..n);
                let mut destination = rng.random_range(0..n - 1);
                if destination >= origin {
                    destination += 1;
                }
                Passenger {
                    id,
                    origin,
                    destination,
                    status: PassengerStatus::Waiting,
                    queue_order: id,
                }
            })
            .collect();

        Ok(Self {
            config: config.clone(),
            aircraft: *aircraft,
            battery: *battery,
            power,
            seed,
            t: 0,
            steps: config.steps_per_episode(),
            uams,
            passengers,
            served: vec![vec![false; config.num_passengers]; config.num_uams],
            visited: vec![vec![false; n]; config.num_uams],
            energy_ledger: vec![EnergyLedger::default(); config.num_uams],
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn aircraft(&self) -> &AircraftSpec {
        &self.aircraft
    }

    pub fn battery(&self) -> &BatterySpec {
        &self.battery
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time_step(&self) -> usize {
        self.t
    }

    pub fn steps_per_episode(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.steps
    }

    pub fn num_uams(&self) -> usize {
        self.uams.len()
    }

    pub fn uams(&self) -> &[UamState] {
        &self.uams
    }

    pub fn passengers(&self) -> &[Passenger] {
        &self.passengers
    }

    pub fn served(&self) -> &[Vec<bool>] {
        &self.served
    }

    pub fn visited(&self) -> &[Vec<bool>] {
        &self.visited
    }

    pub fn energy_ledger(&self) -> &[EnergyLedger] {
        &self.energy_ledger
    }

    /// Counts of (waiting, onboard, delivered) passengers.
    pub fn passenger_counts(&self) -> (usize, usize, usize) {
        self.passengers.iter().fold((0, 0, 0), |(w, o, d), p| match p.status {
            PassengerStatus::Waiting => (w + 1, o, d),
            PassengerStatus::Onboard { .. } => (w, o + 1, d),
            PassengerStatus::Delivered { .. } => (w, o, d + 1),
        })
    }

    /// Horizontal distance a UAM covers in one cruise step.
    pub fn step_length_m(&self) -> f64 {
        self.aircraft.cruise_speed_mps * self.config.step_seconds
    }

    pub fn landing_tolerance_m(&self) -> f64 {
        0.5 * self.step_length_m()
    }

    pub fn state_dim(&self) -> usize {
        state_dim(&self.config, self.aircraft.max_passengers)
    }

    pub fn observation_dim(&self, mode: ObservationMode) -> usize {
        observation_dim(&self.config, self.aircraft.max_passengers, mode)
    }

    fn vertiport_position(&self, n: usize) -> [f64; 3] {
        let v = &self.config.vertiports[n];
        [v.x, v.y, 0.0]
    }

    /// Ground-truth state: serviced indicators (J·Ξ), visited indicators
    /// (J·N), then seat target distances over Γ (J·Λ, −1 for empty seats).
    pub fn state_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.state_dim());
        for row in &self.served {
            out.extend(row.iter().map(|&b| f64::from(u8::from(b))));
        }
        for row in &self.visited {
            out.extend(row.iter().map(|&b| f64::from(u8::from(b))));
        }
        for j in 0..self.uams.len() {
            out.extend(self.seat_target_distances(j).into_iter().map(|d| {
                if d < 0.0 {
                    -1.0
                } else {
                    d / self.config.half_extent_m
                }
            }));
        }
        out
    }

    /// Distance from UAM `j` to the destination of each seat's passenger in
    /// meters, −1 for an empty seat.
    pub fn seat_target_distances(&self, j: usize) -> Vec<f64> {
        let uam = &self.uams[j];
        uam.seats
            .iter()
            .map(|seat| match seat {
                Some(p) => distance(&uam.position, &self.vertiport_position(self.passengers[*p].destination)),
                None => -1.0,
            })
            .collect()
    }

    /// Partial (or, in FOMDP mode, full) observation of UAM `j`.
    pub fn observe(&self, j: usize, mode: ObservationMode) -> Observation {
        let uam = &self.uams[j];
        let range = match mode {
            ObservationMode::Pomdp => Some(self.config.observation_range_m),
            ObservationMode::Fomdp => None,
        };
        let mask = |d: f64| match range {
            Some(r) if d > r => -1.0,
            _ => d,
        };
        let uam_distances = self
            .uams
            .iter()
            .filter(|o| o.id != j)
            .map(|o| mask(distance(&uam.position, &o.position)))
            .collect();
        let vertiport_distances = (0..self.config.num_vertiports())
            .map(|n| mask(distance(&uam.position, &self.vertiport_position(n))))
            .collect();
        let n = self.config.num_vertiports() as f64;
        let seats = uam
            .seats
            .iter()
            .map(|seat| match seat {
                Some(p) => self.passengers[*p].destination as f64 / n,
                None => -1.0,
            })
            .collect();
        Observation {
            position: uam.position,
            uam_distances,
            vertiport_distances,
            seats,
            energy_fraction: uam.energy.fraction(&self.battery),
            state: match mode {
                ObservationMode::Pomdp => None,
                ObservationMode::Fomdp => Some(self.state_vector()),
            },
        }
    }

    /// Scaled network inputs for every UAM.
    pub fn observation_features(&self, mode: ObservationMode) -> Vec<Vec<f64>> {
        (0..self.uams.len())
            .map(|j| {
                self.observe(j, mode)
                    .features(self.config.half_extent_m, self.config.cruise_altitude_m)
            })
            .collect()
    }

    fn nearest_vertiport(&self, position: &[f64; 3]) -> (usize, f64) {
        self.config
            .vertiports
            .iter()
            .enumerate()
            .map(|(n, v)| (n, (position[0] - v.x).hypot(position[1] - v.y)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least two vertiports")
    }

    fn draw(&mut self, j: usize, motion: Motion) {
        let joules = self.power.draw_joules(motion, self.config.step_seconds);
        let before = self.uams[j].energy;
        let after = aero::discharge(before, joules, &self.battery);
        self.energy_ledger[j].discharged_kwh += before.remaining_kwh - after.remaining_kwh;
        self.uams[j].energy = after;
    }

    fn recharge(&mut self, j: usize) {
        let before = self.uams[j].energy;
        let added_kwh = self.battery.charger_power_w() * self.config.step_seconds / JOULES_PER_KWH;
        let after = EnergyState::new(before.remaining_kwh + added_kwh, &self.battery);
        self.energy_ledger[j].charged_kwh += after.remaining_kwh - before.remaining_kwh;
        self.uams[j].energy = after;
    }

    fn apply_action(&mut self, j: usize, action: Action, events: &mut Vec<Event>) {
        let step = self.step_length_m();
        let g = self.config.half_extent_m;
        match (self.uams[j].grounded_at, action) {
            (Some(port), Action::Ascend) => {
                self.draw(j, Motion::Vertical);
                let uam = &mut self.uams[j];
                uam.position[2] = self.config.cruise_altitude_m;
                uam.grounded_at = None;
                events.push(Event::TookOff {
                    uam: j,
                    vertiport: port,
                });
            }
            (Some(_), _) => self.recharge(j),
            (None, Action::Move(heading)) => {
                let [ux, uy] = heading.unit();
                let uam = &mut self.uams[j];
                let [x0, y0, _] = uam.position;
                let x1 = (x0 + ux * step).clamp(-g, g);
                let y1 = (y0 + uy * step).clamp(-g, g);
                uam.position[0] = x1;
                uam.position[1] = y1;
                self.draw(j, Motion::Horizontal([x1 - x0, y1 - y0]));
            }
            (None, Action::Ascend) => self.draw(j, Motion::Vertical),
            (None, Action::Descend) => {
                self.draw(j, Motion::Vertical);
                let (port, d) = self.nearest_vertiport(&self.uams[j].position);
                if d <= self.landing_tolerance_m() {
                    let v = self.vertiport_position(port);
                    let uam = &mut self.uams[j];
                    uam.position = v;
                    uam.grounded_at = Some(port);
                    self.visited[j][port] = true;
                    events.push(Event::Landed {
                        uam: j,
                        vertiport: port,
                    });
                }
            }
            (None, Action::Hold) => {}
        }
    }

    /// Alights passengers bound for the UAM's vertiport, then boards waiting
    /// passengers there in queue order. Returns the number delivered.
    fn exchange_passengers(&mut self, j: usize, port: usize, events: &mut Vec<Event>) -> usize {
        let mut delivered = 0;
        for seat in 0..self.uams[j].seats.len() {
            if let Some(p) = self.uams[j].seats[seat] {
                if self.passengers[p].destination == port {
                    self.uams[j].seats[seat] = None;
                    self.passengers[p].status = PassengerStatus::Delivered { uam: j };
                    self.served[j][p] = true;
                    delivered += 1;
                    events.push(Event::Delivered {
                        uam: j,
                        passenger: p,
                        vertiport: port,
                    });
                }
            }
        }
        let mut queue: Vec<usize> = self
            .passengers
            .iter()
            .filter(|p| p.origin == port && p.status == PassengerStatus::Waiting)
            .map(|p| p.id)
            .collect();
        queue.sort_by_key(|&p| self.passengers[p].queue_order);
        let mut queue = queue.into_iter();
        for seat in 0..self.uams[j].seats.len() {
            if self.uams[j].seats[seat].is_some() {
                continue;
            }
            let Some(p) = queue.next() else { break };
            self.uams[j].seats[seat] = Some(p);
            self.passengers[p].status = PassengerStatus::Onboard { uam: j, seat };
            events.push(Event::Boarded {
                uam: j,
                passenger: p,
                vertiport: port,
            });
        }
        delivered
    }

    /// Advances the episode by one step.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::Lifecycle(format!(
                "episode already finished after {} steps",
                self.steps
            )));
        }
        if actions.len() != self.uams.len() {
            return Err(Error::shape("joint action", self.uams.len(), actions.len()));
        }
        let mut events = Vec::new();
        let mut applied = Vec::with_capacity(actions.len());
        for (j, &requested) in actions.iter().enumerate() {
            let action = if self.uams[j].energy.is_depleted() {
                Action::Hold
            } else {
                requested
            };
            self.apply_action(j, action, &mut events);
            applied.push(action);
        }
        let mut delivered = vec![0usize; self.uams.len()];
        for (j, count) in delivered.iter_mut().enumerate() {
            if let Some(port) = self.uams[j].grounded_at {
                *count = self.exchange_passengers(j, port, &mut events);
            }
        }
        for j in 0..self.uams.len() {
            if self.uams[j].energy.is_depleted() {
                events.push(Event::Depleted { uam: j });
            }
            if self.in_collision(j) {
                events.push(Event::Collision { uam: j });
            }
        }
        self.t += 1;
        Ok(StepOutcome {
            rewards: reward::rewards_for(self, &delivered),
            done: self.is_done(),
            events,
            applied,
        })
    }

    /// Scenario setup: replaces the generated passengers with `trips`
    /// (origin, destination) in queue order. Only allowed before the first step.
    pub fn set_passengers(&mut self, trips: &[(usize, usize)]) -> Result<()> {
        if self.t != 0 {
            return Err(Error::Lifecycle(
                "passengers can only be replaced before the first step".into(),
            ));
        }
        let n = self.config.num_vertiports();
        if let Some(&(o, d)) = trips.iter().find(|&&(o, d)| o == d || o >= n || d >= n) {
            return Err(Error::Config(format!("invalid trip {o} -> {d}")));
        }
        self.passengers = trips
            .iter()
            .enumerate()
            .map(|(id, &(origin, destination))| Passenger {
                id,
                origin,
                destination,
                status: PassengerStatus::Waiting,
                queue_order: id,
            })
            .collect();
        for uam in &mut self.uams {
            uam.seats.iter_mut().for_each(|s| *s = None);
        }
        self.config.num_passengers = trips.len();
        self.served = vec![vec![false; trips.len()]; self.uams.len()];
        Ok(())
    }

    /// Scenario setup: moves UAM `j`. A position exactly on a vertiport at
    /// ground level parks it there; anything else puts it at cruise altitude.
    pub fn place_uam(&mut self, j: usize, x: f64, y: f64, grounded: bool) {
        let g = self.config.half_extent_m;
        let (x, y) = (x.clamp(-g, g), y.clamp(-g, g));
        let port = if grounded {
            self.config.vertiports.iter().position(|v| v.x == x && v.y == y)
        } else {
            None
        };
        let uam = &mut self.uams[j];
        uam.position = [
            x,
            y,
            if port.is_some() {
                0.0
            } else {
                self.config.cruise_altitude_m
            },
        ];
        uam.grounded_at = port;
    }

    /// Scenario setup: sets the remaining energy of UAM `j`.
    pub fn set_energy(&mut self, j: usize, kwh: f64) {
        self.uams[j].energy = EnergyState::new(kwh, &self.battery);
    }

    /// True if some other UAM is closer than the collision threshold.
    pub fn in_collision(&self, j: usize) -> bool {
        let p = &self.uams[j].position;
        self.uams
            .iter()
            .any(|o| o.id != j && distance(p, &o.position) < self.config.collision_threshold_m)
    }
}

pub fn state_dim(config: &WorldConfig, seats: usize) -> usize {
    config.num_uams * (config.num_passengers + config.num_vertiports() + seats)
}

pub fn observation_dim(config: &WorldConfig, seats: usize, mode: ObservationMode) -> usize {
    let local = 3 + (config.num_uams - 1) + config.num_vertiports() + seats + 1;
    match mode {
        ObservationMode::Pomdp => local,
        ObservationMode::Fomdp => local + state_dim(config, seats),
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}
