use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{fairness_variance, service_quality, EpisodeMetrics};
use crate::error::Result;

/// One (algorithm, seed) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub seed: u64,
    /// Final-10% mean of the per-epoch mean reward.
    pub convergence_reward: f64,
    pub services_mean: f64,
    pub landings_mean: f64,
    pub vertiport_types_mean: f64,
    pub services_variance: f64,
    pub landings_variance: f64,
    pub vertiport_types_variance: f64,
    pub collisions_mean: f64,
}

impl SummaryRow {
    /// Summarizes the inference episodes of one cell.
    pub fn new(algorithm: &str, seed: u64, convergence_reward: f64, episodes: &[EpisodeMetrics]) -> Result<Self> {
        let quality = service_quality(episodes)?;
        let variance = fairness_variance(episodes)?;
        let collisions: usize = episodes
            .iter()
            .flat_map(|e| e.agents.iter().map(|a| a.collision_events))
            .sum();
        Ok(Self {
            algorithm: algorithm.to_owned(),
            seed,
            convergence_reward,
            services_mean: quality.mean.services,
            landings_mean: quality.mean.landings,
            vertiport_types_mean: quality.mean.vertiport_types,
            services_variance: variance.services,
            landings_variance: variance.landings,
            vertiport_types_variance: variance.vertiport_types,
            collisions_mean: collisions as f64 / episodes.len() as f64,
        })
    }
}

/// `{ algorithm: { seed: row } }`, pretty-printed.
pub fn write_summary_json<W: Write>(rows: &[SummaryRow], mut out: W) -> Result<()> {
    let mut keyed: BTreeMap<&str, BTreeMap<String, &SummaryRow>> = BTreeMap::new();
    for r in rows {
        keyed.entry(&r.algorithm).or_default().insert(r.seed.to_string(), r);
    }
    serde_json::to_writer_pretty(&mut out, &keyed).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// One row per cell, one column per field.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}
