//! Service-quality, fairness and reward-convergence indicators computed from
//! trajectory logs and epoch CSVs.

mod stats;
mod summary;

pub use stats::{wilcoxon_signed_rank, Wilcoxon};
pub use summary::{write_summary_csv, write_summary_json, SummaryRow};

use std::collections::BTreeMap;
use std::io::{BufRead, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{Event, TrajectoryRecord};

pub const DEFAULT_SMOOTHING_WINDOW: usize = 50;

/// What one UAM did during one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEpisode {
    pub services_delivered: usize,
    pub landings: usize,
    pub distinct_vertiports: usize,
    pub collision_events: usize,
    /// Battery level after every step, in kWh.
    pub energy_trace: Vec<f64>,
    pub cumulative_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub seed: u64,
    pub team_reward: f64,
    pub agents: Vec<AgentEpisode>,
}

impl EpisodeMetrics {
    /// Folds the step records of a single episode.
    pub fn from_records(records: &[TrajectoryRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Usage("an episode needs at least one step record".into()))?;
        let j_count = first.actions.len();
        let mut agents = vec![
            AgentEpisode {
                services_delivered: 0,
                landings: 0,
                distinct_vertiports: 0,
                collision_events: 0,
                energy_trace: Vec::with_capacity(records.len()),
                cumulative_reward: 0.0,
            };
            j_count
        ];
        let mut ports: Vec<Vec<usize>> = vec![Vec::new(); j_count];
        let mut team_reward = 0.0;
        for rec in records {
            if rec.episode != first.episode {
                return Err(Error::Usage(format!(
                    "records from episodes {} and {} mixed together",
                    first.episode, rec.episode
                )));
            }
            if rec.actions.len() != j_count || rec.rewards.len() != j_count || rec.energy_kwh.len() != j_count {
                return Err(Error::shape("trajectory record agents", j_count, rec.actions.len()));
            }
            team_reward += rec.team_reward;
            for (a, (&r, &e)) in agents.iter_mut().zip(rec.rewards.iter().zip(&rec.energy_kwh)) {
                a.cumulative_reward += r;
                a.energy_trace.push(e);
            }
            for ev in &rec.events {
                match *ev {
                    Event::Delivered { uam, .. } => agents[uam].services_delivered += 1,
                    Event::Landed { uam, vertiport } => {
                        agents[uam].landings += 1;
                        if !ports[uam].contains(&vertiport) {
                            ports[uam].push(vertiport);
                        }
                    }
                    Event::Collision { uam } => agents[uam].collision_events += 1,
                    _ => {}
                }
            }
        }
        for (a, p) in agents.iter_mut().zip(&ports) {
            a.distinct_vertiports = p.len();
        }
        Ok(Self {
            episode: first.episode,
            seed: first.seed,
            team_reward,
            agents,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn total_services(&self) -> usize {
        self.agents.iter().map(|a| a.services_delivered).sum()
    }
}

/// Groups step records by episode (in order of first appearance) and folds each.
pub fn episodes_from_records(records: &[TrajectoryRecord]) -> Result<Vec<EpisodeMetrics>> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<usize, Vec<TrajectoryRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry(r.episode)
            .or_insert_with(|| {
                order.push(r.episode);
                Vec::new()
            })
            .push(r.clone());
    }
    order.iter().map(|e| EpisodeMetrics::from_records(&groups[e])).collect()
}

/// Reads a JSON-lines trajectory log.
pub fn read_trajectories<R: BufRead>(reader: R) -> Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_trajectories_file(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    read_trajectories(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// The three service-quality factors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityFactors {
    pub services: f64,
    pub landings: f64,
    pub vertiport_types: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceQuality {
    pub per_agent: Vec<QualityFactors>,
    pub mean: QualityFactors,
}

/// Per-agent and fleet means of the quality factors over episodes.
pub fn service_quality(episodes: &[EpisodeMetrics]) -> Result<ServiceQuality> {
    let first = episodes
        .first()
        .ok_or_else(|| Error::Usage("service quality needs at least one episode".into()))?;
    let j_count = first.num_agents();
    if episodes.iter().any(|e| e.num_agents() != j_count) {
        return Err(Error::Usage("episodes have different fleet sizes".into()));
    }
    let n = episodes.len() as f64;
    let per_agent: Vec<QualityFactors> = (0..j_count)
        .map(|j| {
            let mut q = QualityFactors::default();
            for e in episodes {
                let a = &e.agents[j];
                q.services += a.services_delivered as f64;
                q.landings += a.landings as f64;
                q.vertiport_types += a.distinct_vertiports as f64;
            }
            QualityFactors {
                services: q.services / n,
                landings: q.landings / n,
                vertiport_types: q.vertiport_types / n,
            }
        })
        .collect();
    let mean = mean_factors(&per_agent);
    Ok(ServiceQuality { per_agent, mean })
}

fn mean_factors(rows: &[QualityFactors]) -> QualityFactors {
    let n = rows.len() as f64;
    QualityFactors {
        services: rows.iter().map(|q| q.services).sum::<f64>() / n,
        landings: rows.iter().map(|q| q.landings).sum::<f64>() / n,
        vertiport_types: rows.iter().map(|q| q.vertiport_types).sum::<f64>() / n,
    }
}

/// Population variance (divide by N).
pub fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Population variance across agents of each per-agent quality mean.
pub fn fairness_variance(episodes: &[EpisodeMetrics]) -> Result<QualityFactors> {
    let quality = service_quality(episodes)?;
    if quality.per_agent.len() < 2 {
        return Err(Error::Usage("fairness needs at least two agents".into()));
    }
    let column =
        |f: fn(&QualityFactors) -> f64| population_variance(&quality.per_agent.iter().map(f).collect::<Vec<_>>());
    Ok(QualityFactors {
        services: column(|q| q.services),
        landings: column(|q| q.landings),
        vertiport_types: column(|q| q.vertiport_types),
    })
}

/// Trailing moving average; the first `window − 1` points average what is available.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Mean of the final 10% of the series (at least one point).
pub fn convergence_value(series: &[f64]) -> f64 {
    if series.is_empty() {
        return f64::NAN;
    }
    let k = series.len().div_ceil(10);
    series[series.len() - k..].iter().sum::<f64>() / k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardCurve {
    pub epochs: Vec<usize>,
    pub mean_reward: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub convergence: f64,
}

impl RewardCurve {
    pub fn from_series(epochs: Vec<usize>, mean_reward: Vec<f64>, window: usize) -> Self {
        let smoothed = moving_average(&mean_reward, window);
        let convergence = convergence_value(&mean_reward);
        Self {
            epochs,
            mean_reward,
            smoothed,
            convergence,
        }
    }
}

/// Parses an epoch CSV (needs `epoch` and `mean_reward` columns).
pub fn reward_curve<R: Read>(reader: R, window: usize) -> Result<RewardCurve> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_error(&e, 1))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column {name}"),
        })
    };
    let (ie, ir) = (col("epoch")?, col("mean_reward")?);
    let mut epochs = Vec::new();
    let mut rewards = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| parse_error(&e, line))?;
        let field = |k: usize| row.get(k).unwrap_or("");
        let epoch = field(ie).parse::<usize>().map_err(|e| Error::Parse {
            line,
            message: format!("epoch {:?}: {e}", field(ie)),
        })?;
        let reward = field(ir).parse::<f64>().map_err(|e| Error::Parse {
            line,
            message: format!("mean_reward {:?}: {e}", field(ir)),
        })?;
        epochs.push(epoch);
        rewards.push(reward);
    }
    Ok(RewardCurve::from_series(epochs, rewards, window))
}

pub fn reward_curve_file(path: &Path, window: usize) -> Result<RewardCurve> {
    reward_curve(std::fs::File::open(path)?, window)
}

fn parse_error(e: &csv::Error, fallback_line: u64) -> Error {
    Error::Parse {
        line: e.position().map_or(fallback_line, |p| p.line()),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests;
