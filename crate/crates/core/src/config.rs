//! Experiment configuration: TOML sections `[world]`, `[aircraft]`,
//! `[battery]`, `[training]` and `[algorithm]` on top of built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aero::{AircraftSpec, BatterySpec};
use crate::baselines::Algorithm;
use crate::commnet::EpsilonSchedule;
use crate::error::{Error, Result};
use crate::world::{ObservationMode, WorldConfig};

/// Optimization and logging settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Updates start once the buffer holds this many transitions.
    pub train_gate: usize,
    pub discount: f64,
    pub epsilon_initial: f64,
    pub epsilon_floor: f64,
    pub epsilon_decay_per_epoch: f64,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
    pub dqn_hidden: usize,
    pub dqn_learning_rate: f64,
    /// Global-norm gradient clip applied to every update.
    pub grad_clip: f64,
    /// Log the full trajectory of every n-th epoch (and of the last one).
    pub trajectory_every: usize,
    /// Fill the `wall_ms` column with measured time instead of 0.
    pub record_wall_time: bool,
    pub inference_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5500,
            batch_size: 32,
            buffer_capacity: 50_000,
            train_gate: 32,
            discount: 0.98,
            epsilon_initial: 0.275,
            epsilon_floor: 0.01,
            epsilon_decay_per_epoch: 5e-5,
            actor_hidden: 64,
            critic_hidden: 256,
            actor_learning_rate: 1e-2,
            critic_learning_rate: 2.5e-3,
            dqn_hidden: 64,
            dqn_learning_rate: 2.5e-3,
            grad_clip: 10.0,
            trajectory_every: 100,
            record_wall_time: false,
            inference_episodes: 100,
        }
    }
}

impl TrainConfig {
    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            initial: self.epsilon_initial,
            floor: self.epsilon_floor,
            decay_per_epoch: self.epsilon_decay_per_epoch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::Config(format!(
                "discount factor out of range: {} (must lie in (0, 1])",
                self.discount
            )));
        }
        for (name, value) in [
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("actor_hidden", self.actor_hidden),
            ("critic_hidden", self.critic_hidden),
            ("dqn_hidden", self.dqn_hidden),
            ("trajectory_every", self.trajectory_every),
        ] {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.batch_size > self.buffer_capacity {
            return Err(Error::Config(format!(
                "batch_size {} exceeds buffer_capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        if self.train_gate > self.buffer_capacity {
            return Err(Error::Config(
                "train_gate exceeds buffer_capacity; training would never start".into(),
            ));
        }
        for (name, value) in [
            ("actor_learning_rate", self.actor_learning_rate),
            ("critic_learning_rate", self.critic_learning_rate),
            ("dqn_learning_rate", self.dqn_learning_rate),
            ("grad_clip", self.grad_clip),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        let eps = [self.epsilon_initial, self.epsilon_floor];
        if eps.iter().any(|e| !(0.0..=1.0).contains(e)) || self.epsilon_floor > self.epsilon_initial {
            return Err(Error::Config(
                "epsilon values must satisfy 0 <= floor <= initial <= 1".into(),
            ));
        }
        if self.epsilon_decay_per_epoch.is_nan() || self.epsilon_decay_per_epoch < 0.0 {
            return Err(Error::Config("epsilon_decay_per_epoch must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    /// Algorithms run by `sweep`.
    pub sweep: Vec<Algorithm>,
    pub mode: ObservationMode,
    pub communication_layers: usize,
    /// Train only on the episode just collected instead of the whole buffer.
    pub on_policy_only: bool,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::CommNetCtde,
            sweep: Algorithm::ALL.to_vec(),
            mode: ObservationMode::Pomdp,
            communication_layers: 2,
            on_policy_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub world: WorldConfig,
    pub aircraft: AircraftSpec,
    pub battery: BatterySpec,
    pub training: TrainConfig,
    pub algorithm: AlgorithmConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1],
            output_dir: None,
            world: WorldConfig::default(),
            aircraft: AircraftSpec::default(),
            battery: BatterySpec::default(),
            training: TrainConfig::default(),
            algorithm: AlgorithmConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML; missing keys keep their defaults, unknown keys are errors.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            if e.message().starts_with("unknown field") {
                Error::UnknownKey(e.to_string())
            } else {
                Error::Config(e.to_string())
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The effective configuration as TOML. Parsing it back yields an equal config.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.aircraft.validate()?;
        self.battery.validate()?;
        self.training.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.algorithm.algorithm == Algorithm::Hybrid && !self.world.num_uams.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "hybrid needs an even number of UAMs, got {}",
                self.world.num_uams
            )));
        }
        Ok(())
    }

    /// Copy with another algorithm selected.
    pub fn with_algorithm(&self, algorithm: Algorithm) -> Self {
        let mut cfg = self.clone();
        cfg.algorithm.algorithm = algorithm;
        cfg
    }
}
