use serde::{Deserialize, Serialize};

use crate::world::{Action, Environment, PassengerStatus, StepOutcome};

/// Absolute slack on the energy bookkeeping identity, in kWh.
pub const ENERGY_BALANCE_TOLERANCE_KWH: f64 = 1e-9;

/// Counts of safety-property violations seen while stepping environments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub steps: u64,
    /// Battery level outside `[0, capacity]`.
    pub energy_out_of_range: u64,
    /// A UAM that started the step with an empty battery did something other than hold.
    pub depleted_not_holding: u64,
    /// Waiting + onboard + delivered differs from the passenger count.
    pub passenger_mismatch: u64,
    /// Battery level differs from capacity − discharged + charged.
    pub energy_imbalance: u64,
}

impl SafetyReport {
    pub fn violations(&self) -> u64 {
        self.energy_out_of_range + self.depleted_not_holding + self.passenger_mismatch + self.energy_imbalance
    }

    pub fn is_clean(&self) -> bool {
        self.violations() == 0
    }

    pub fn merge(&mut self, other: &SafetyReport) {
        self.steps += other.steps;
        self.energy_out_of_range += other.energy_out_of_range;
        self.depleted_not_holding += other.depleted_not_holding;
        self.passenger_mismatch += other.passenger_mismatch;
        self.energy_imbalance += other.energy_imbalance;
    }

    /// Checks one step. `depleted_before[j]` is whether UAM `j` was empty
    /// when the step began; `initial_kwh[j]` its level at episode start.
    pub fn check(&mut self, env: &Environment, outcome: &StepOutcome, depleted_before: &[bool], initial_kwh: &[f64]) {
        self.steps += 1;
        let capacity = env.battery().battery_capacity_kwh;
        for (j, uam) in env.uams().iter().enumerate() {
            let e = uam.energy.remaining_kwh;
            if !(0.0..=capacity).contains(&e) {
                self.energy_out_of_range += 1;
            }
            let ledger = env.energy_ledger()[j];
            let expected = initial_kwh[j] - ledger.discharged_kwh + ledger.charged_kwh;
            if (e - expected).abs() > ENERGY_BALANCE_TOLERANCE_KWH {
                self.energy_imbalance += 1;
            }
            if depleted_before[j] && outcome.applied[j] != Action::Hold {
                self.depleted_not_holding += 1;
            }
        }
        let (waiting, onboard, delivered) = env.passenger_counts();
        let seated: usize = env.uams().iter().map(|u| u.occupied_seats()).sum();
        let seats_agree = env.passengers().iter().enumerate().all(|(i, p)| match p.status {
            PassengerStatus::Onboard { uam, seat } => env.uams()[uam].seats[seat] == Some(i),
            _ => true,
        });
        if waiting + onboard + delivered != env.config().num_passengers || seated != onboard || !seats_agree {
            self.passenger_mismatch += 1;
        }
    }
}
