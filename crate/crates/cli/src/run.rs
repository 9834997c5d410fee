use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use uam_marl::aero::{cruise_power, hover_power, validate_spec as diagnose};
use uam_marl::io::{
    create_dir, run_dir, write_json, write_text, RunWriter, CHECKPOINT_FILE, CONFIG_ECHO_FILE, EVAL_METRICS_FILE,
    EVAL_TRAJECTORIES_FILE, METRICS_FILE, TRAJECTORIES_FILE,
};
use uam_marl::metrics::{
    convergence_value, episodes_from_records, fairness_variance, moving_average, read_trajectories_file,
    service_quality, write_summary_csv, write_summary_json, EpisodeMetrics, QualityFactors, ServiceQuality, SummaryRow,
    DEFAULT_SMOOTHING_WINDOW,
};
use uam_marl::nn::Checkpoint;
use uam_marl::trainer::{run_inference, train, SafetyReport};
use uam_marl::{Algorithm, Error, ExperimentConfig, Result};

pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_CSV: &str = "summary.csv";

#[derive(Serialize)]
struct TrainMetrics<'a> {
    algorithm: Algorithm,
    seed: u64,
    epochs: usize,
    updates: usize,
    /// Mean of the last 10% of the per-epoch mean reward.
    convergence_reward: f64,
    per_agent_convergence_reward: Vec<f64>,
    smoothing_window: usize,
    final_smoothed_reward: f64,
    final_epsilon: f64,
    safety: SafetyReport,
    /// Episodes written to the trajectory log.
    logged_episodes: &'a [EpisodeMetrics],
}

#[derive(Serialize)]
struct EvalMetrics<'a> {
    algorithm: Algorithm,
    seed: u64,
    episodes: usize,
    mean_team_reward: f64,
    quality: ServiceQuality,
    /// Across-agent population variance; absent for a single UAM.
    fairness_variance: Option<QualityFactors>,
    safety: SafetyReport,
    per_episode: &'a [EpisodeMetrics],
}

fn root(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .expect("output directory resolved before running")
}

/// The configuration that reproduces one (algorithm, seed) run on its own.
fn cell_config(cfg: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> ExperimentConfig {
    let mut c = cfg.with_algorithm(algorithm);
    c.seeds = vec![seed];
    c.algorithm.sweep = vec![algorithm];
    c
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} worker threads: {e}")))
}

fn train_cell(cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let algorithm = cfg.algorithm.algorithm;
    let dir = run_dir(&root(cfg), algorithm.name(), seed);
    create_dir(&dir)?;
    write_text(&dir.join(CONFIG_ECHO_FILE), &cfg.to_toml_string())?;
    let mut writer = RunWriter::for_training(&dir, cfg.world.num_uams)?;
    let outcome = train(cfg, seed, &mut writer)?;
    writer.finish()?;
    outcome.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;

    let rewards = outcome.mean_rewards();
    let convergence = convergence_value(&rewards);
    let per_agent = (0..cfg.world.num_uams)
        .map(|j| convergence_value(&outcome.epochs.iter().map(|e| e.per_agent_reward[j]).collect::<Vec<_>>()))
        .collect();
    let logged = episodes_from_records(&read_trajectories_file(&dir.join(TRAJECTORIES_FILE))?)?;
    let metrics = TrainMetrics {
        algorithm,
        seed,
        epochs: outcome.epochs.len(),
        updates: outcome.updates,
        convergence_reward: convergence,
        per_agent_convergence_reward: per_agent,
        smoothing_window: DEFAULT_SMOOTHING_WINDOW,
        final_smoothed_reward: moving_average(&rewards, DEFAULT_SMOOTHING_WINDOW)
            .last()
            .copied()
            .unwrap_or(f64::NAN),
        final_epsilon: outcome.epochs.last().map_or(f64::NAN, |e| e.epsilon),
        safety: outcome.safety,
        logged_episodes: &logged,
    };
    write_json(&dir.join(METRICS_FILE), &metrics)?;
    eprintln!(
        "{algorithm} seed {seed}: final reward {convergence:.4} -> {}",
        dir.display()
    );
    Ok(convergence)
}

fn eval_cell(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<EpisodeMetrics>> {
    let algorithm = cfg.algorithm.algorithm;
    let dir = run_dir(&root(cfg), algorithm.name(), seed);
    let path = dir.join(CHECKPOINT_FILE);
    if !path.is_file() {
        return Err(Error::Checkpoint(format!(
            "no checkpoint at {}; run train first",
            path.display()
        )));
    }
    let checkpoint = Checkpoint::load(&path)?;
    let mut writer = RunWriter::new(None, Some(&dir.join(EVAL_TRAJECTORIES_FILE)), cfg.world.num_uams)?;
    let outcome = run_inference(cfg, &checkpoint, seed, cfg.training.inference_episodes, &mut writer)?;
    writer.finish()?;
    let episodes = outcome.episodes;
    let metrics = EvalMetrics {
        algorithm,
        seed,
        episodes: episodes.len(),
        mean_team_reward: episodes.iter().map(|e| e.team_reward).sum::<f64>() / episodes.len() as f64,
        quality: service_quality(&episodes)?,
        fairness_variance: if cfg.world.num_uams >= 2 {
            Some(fairness_variance(&episodes)?)
        } else {
            None
        },
        safety: outcome.safety,
        per_episode: &episodes,
    };
    write_json(&dir.join(EVAL_METRICS_FILE), &metrics)?;
    eprintln!(
        "{algorithm} seed {seed}: {} inference episodes -> {}",
        episodes.len(),
        dir.display()
    );
    Ok(episodes)
}

pub fn train_all(cfg: &ExperimentConfig, jobs: usize) -> Result<()> {
    let alg = cfg.algorithm.algorithm;
    pool(jobs)?.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| train_cell(&cell_config(cfg, alg, seed), seed).map(drop))
            .collect()
    })
}

pub fn eval_all(cfg: &ExperimentConfig, jobs: usize) -> Result<()> {
    let alg = cfg.algorithm.algorithm;
    pool(jobs)?.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| eval_cell(&cell_config(cfg, alg, seed), seed).map(drop))
            .collect()
    })
}

pub fn sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<()> {
    let cells: Vec<ExperimentConfig> = cfg
        .algorithm
        .sweep
        .iter()
        .flat_map(|&alg| cfg.seeds.iter().map(move |&seed| cell_config(cfg, alg, seed)))
        .collect();
    // Reject the whole grid up front rather than after hours of training.
    for c in &cells {
        c.validate()?;
    }
    let rows: Vec<SummaryRow> = pool(jobs)?.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let seed = c.seeds[0];
                let convergence = train_cell(c, seed)?;
                let episodes = eval_cell(c, seed)?;
                SummaryRow::new(c.algorithm.algorithm.name(), seed, convergence, &episodes)
            })
            .collect::<Result<_>>()
    })?;
    let out = root(cfg);
    create_dir(&out)?;
    write_summary_json(&rows, create(&out.join(SUMMARY_JSON))?)?;
    write_summary_csv(&rows, create(&out.join(SUMMARY_CSV))?)?;
    println!(
        "{:<14} {:>6} {:>12} {:>10} {:>10}",
        "algorithm", "seed", "reward", "services", "variance"
    );
    for r in &rows {
        println!(
            "{:<14} {:>6} {:>12.4} {:>10.3} {:>10.4}",
            r.algorithm, r.seed, r.convergence_reward, r.services_mean, r.services_variance
        );
    }
    eprintln!("{} rows -> {}", rows.len(), out.join(SUMMARY_CSV).display());
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

pub fn validate_spec(cfg: &ExperimentConfig) -> Result<()> {
    let spec = &cfg.aircraft;
    let hover = hover_power(spec)?;
    let cruise = cruise_power(spec, spec.cruise_speed_mps)?;
    print!("{}", diagnose(spec));
    println!(
        "hover power {:.3} kW (profile {:.3}, induced {:.3})",
        hover.total_w / 1e3,
        hover.profile_w / 1e3,
        hover.induced_w / 1e3
    );
    println!(
        "cruise power at {} m/s {:.3} kW (induced {:.3}, profile {:.3}, parasite {:.3})",
        spec.cruise_speed_mps,
        cruise.total_w / 1e3,
        cruise.induced_w / 1e3,
        cruise.profile_w / 1e3,
        cruise.parasite_w / 1e3
    );
    Ok(())
}
