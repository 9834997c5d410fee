//! Urban-air-mobility fleet simulation and multi-agent reinforcement
//! learning: a battery-aware vertiport environment, CommNet actors trained
//! with a centralized critic, and the baseline learners they are compared to.

pub mod aero;
pub mod baselines;
pub mod commnet;
pub mod config;
pub mod error;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod trainer;
pub mod world;

pub use baselines::Algorithm;
pub use config::{AlgorithmConfig, ExperimentConfig, TrainConfig};
pub use error::{Error, Result};
pub use world::ObservationMode;
