//! Training with a centralized critic: replay buffer, TD errors, critic
//! descent, actor ascent through the joint CommNet pass, ε annealing, and
//! greedy inference rollouts.

mod buffer;
mod critic;
mod safety;

pub use buffer::{ReplayBuffer, Transition};
pub use critic::{td_error, ValueCritic};
pub use safety::{SafetyReport, ENERGY_BALANCE_TOLERANCE_KWH};

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{Algorithm, Learner, LearnerDims};
use crate::commnet::{score_gradient, SelectionMode, TeamPolicy};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::EpisodeMetrics;
use crate::nn::{Checkpoint, Direction};
use crate::world::{Action, Environment, ObservationMode, TrajectoryRecord, NUM_ACTIONS};

/// TD errors of `batch` under the current centralized critic, from the team reward.
pub fn td_errors(critic: &ValueCritic, batch: &[&Transition], discount: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            let v = critic.value(&t.state)?;
            let v_next = critic.value(&t.next_state)?;
            Ok(td_error(t.team_reward, v, v_next, discount, t.terminal))
        })
        .collect()
}

/// One semi-gradient step of the centralized critic. Returns the TD errors
/// computed before the step; the actor reuses them.
pub fn critic_update(critic: &mut ValueCritic, batch: &[&Transition], discount: f64) -> Result<Vec<f64>> {
    let deltas = td_errors(critic, batch, discount)?;
    let inputs: Vec<&[f64]> = batch.iter().map(|t| &t.state[..]).collect();
    critic.update(&inputs, &deltas)?;
    Ok(deltas)
}

/// Same as [`critic_update`] for a critic that sees only agent `j`'s
/// observation and is trained on agent `j`'s reward.
pub fn local_critic_update(
    critic: &mut ValueCritic,
    j: usize,
    batch: &[&Transition],
    discount: f64,
) -> Result<Vec<f64>> {
    let deltas = batch
        .iter()
        .map(|t| {
            let v = critic.value(&t.observations[j])?;
            let v_next = critic.value(&t.next_observations[j])?;
            Ok(td_error(t.rewards[j], v, v_next, discount, t.terminal))
        })
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<&[f64]> = batch.iter().map(|t| &t.observations[j][..]).collect();
    critic.update(&inputs, &deltas)?;
    Ok(deltas)
}

/// Gradient of `mean_t δ_t · Σ_{j ∈ agents} log π_j(a_j^t)` with respect to
/// each policy group's parameters.
pub fn actor_gradient(
    team: &TeamPolicy,
    batch: &[&Transition],
    deltas: &[f64],
    agents: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if batch.len() != deltas.len() {
        return Err(Error::shape("actor deltas", batch.len(), deltas.len()));
    }
    let mut grads = team.zero_gradients();
    if batch.is_empty() {
        return Ok(grads);
    }
    let scale = 1.0 / batch.len() as f64;
    for (t, &delta) in batch.iter().zip(deltas) {
        if delta == 0.0 {
            continue;
        }
        let cache = team.forward(&t.observations)?;
        let mut logit_grads = vec![vec![0.0; NUM_ACTIONS]; team.num_agents()];
        for &j in agents {
            logit_grads[j] = score_gradient(cache.probs(j), t.actions[j])
                .into_iter()
                .map(|g| g * delta * scale)
                .collect();
        }
        team.accumulate_gradient(&cache, &logit_grads, &mut grads)?;
    }
    Ok(grads)
}

/// Gradient ascent step on the actor objective of `agents`.
pub fn actor_update(
    team: &mut TeamPolicy,
    batch: &[&Transition],
    deltas: &[f64],
    agents: &[usize],
    grad_clip: f64,
) -> Result<()> {
    let mut grads = actor_gradient(team, batch, deltas, agents)?;
    team.apply(&mut grads, grad_clip, Direction::Ascent)
}

const STREAM_INIT: u64 = 0x1;
const STREAM_ACTIONS: u64 = 0x2;
const STREAM_BATCHES: u64 = 0x3;
const STREAM_EPISODES: u64 = 0x4;
const STREAM_INFERENCE: u64 = 0x5;
const STREAM_INFERENCE_ACTIONS: u64 = 0x6;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives an independent 64-bit seed from a run seed, a stream tag and an index.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}

/// Environment seed of training epoch `epoch`. Depends only on the run seed,
/// so every algorithm sees the same episodes.
pub fn episode_seed(seed: u64, epoch: usize) -> u64 {
    derive_seed(seed, STREAM_EPISODES, epoch as u64)
}

pub fn inference_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(seed, STREAM_INFERENCE, episode as u64)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, 0))
}

/// One row of the epoch CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub epsilon: f64,
    /// Mean over steps and agents of the per-agent reward.
    pub mean_reward: f64,
    pub per_agent_reward: Vec<f64>,
    pub buffer_size: usize,
    pub wall_ms: u64,
    /// Gradient updates performed after this epoch's episode.
    pub updates: usize,
}

/// Receives progress while training or evaluating.
pub trait TrainSink {
    fn on_epoch(&mut self, _record: &EpochRecord) -> Result<()> {
        Ok(())
    }

    fn on_trajectory(&mut self, _record: &TrajectoryRecord) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl TrainSink for NullSink {}

/// What a checkpoint was built for; checked again at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub algorithm: Algorithm,
    pub dims: LearnerDims,
    pub mode: ObservationMode,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
    pub dqn_hidden: usize,
    pub communication_layers: usize,
}

impl CheckpointMeta {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self {
            algorithm: cfg.algorithm.algorithm,
            dims: dims_for(cfg),
            mode: cfg.algorithm.mode,
            actor_hidden: cfg.training.actor_hidden,
            critic_hidden: cfg.training.critic_hidden,
            dqn_hidden: cfg.training.dqn_hidden,
            communication_layers: cfg.algorithm.communication_layers,
        }
    }
}

/// Network input sizes implied by a configuration.
pub fn dims_for(cfg: &ExperimentConfig) -> LearnerDims {
    let seats = cfg.aircraft.max_passengers;
    LearnerDims {
        agents: cfg.world.num_uams,
        obs_dim: crate::world::observation_dim(&cfg.world, seats, cfg.algorithm.mode),
        state_dim: crate::world::state_dim(&cfg.world, seats),
        num_actions: NUM_ACTIONS,
    }
}

pub struct TrainOutcome {
    pub epochs: Vec<EpochRecord>,
    pub checkpoint: Checkpoint,
    pub safety: SafetyReport,
    pub updates: usize,
}

impl TrainOutcome {
    pub fn mean_rewards(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_reward).collect()
    }
}

struct Rollout {
    per_agent_reward: Vec<f64>,
    records: Vec<TrajectoryRecord>,
}

/// Plays one episode. Every transition goes to `on_transition`; step
/// records are kept only when `keep_records` is set.
#[allow(clippy::too_many_arguments)]
fn rollout(
    cfg: &ExperimentConfig,
    learner: &Learner,
    episode: usize,
    env_seed: u64,
    epsilon: f64,
    mode: SelectionMode,
    rng: &mut ChaCha8Rng,
    safety: &mut SafetyReport,
    keep_records: bool,
    mut on_transition: impl FnMut(Transition),
) -> Result<Rollout> {
    let obs_mode = cfg.algorithm.mode;
    let mut env = Environment::new(&cfg.world, &cfg.aircraft, &cfg.battery, env_seed)?;
    let agents = env.num_uams();
    let initial: Vec<f64> = env.uams().iter().map(|u| u.energy.remaining_kwh).collect();
    let mut state: Arc<[f64]> = env.state_vector().into();
    let mut obs: Arc<[Vec<f64>]> = env.observation_features(obs_mode).into();
    let mut totals = vec![0.0; agents];
    let mut records = Vec::new();
    let mut steps = 0usize;
    while !env.is_done() {
        let actions = learner.act(&obs, epsilon, mode, rng)?;
        let depleted: Vec<bool> = env.uams().iter().map(|u| u.energy.is_depleted()).collect();
        let outcome = env.step(&Action::joint(&actions))?;
        safety.check(&env, &outcome, &depleted, &initial);
        let next_state: Arc<[f64]> = env.state_vector().into();
        let next_obs: Arc<[Vec<f64>]> = env.observation_features(obs_mode).into();
        for (t, r) in totals.iter_mut().zip(&outcome.rewards.per_agent) {
            *t += r;
        }
        if keep_records {
            records.push(TrajectoryRecord {
                episode,
                seed: env_seed,
                t: env.time_step(),
                positions: env.uams().iter().map(|u| u.position).collect(),
                actions: outcome.applied.iter().map(|a| a.index()).collect(),
                rewards: outcome.rewards.per_agent.clone(),
                team_reward: outcome.rewards.team,
                energy_kwh: env.uams().iter().map(|u| u.energy.remaining_kwh).collect(),
                events: outcome.events.clone(),
            });
        }
        on_transition(Transition {
            state,
            observations: obs,
            actions,
            rewards: outcome.rewards.per_agent,
            team_reward: outcome.rewards.team,
            next_state: next_state.clone(),
            next_observations: next_obs.clone(),
            terminal: outcome.done,
        });
        state = next_state;
        obs = next_obs;
        steps += 1;
    }
    let per_agent_reward = totals.into_iter().map(|t| t / steps as f64).collect();
    Ok(Rollout {
        per_agent_reward,
        records,
    })
}

/// Trains one algorithm for one seed.
pub fn train(cfg: &ExperimentConfig, seed: u64, sink: &mut dyn TrainSink) -> Result<TrainOutcome> {
    cfg.validate()?;
    let tc = &cfg.training;
    let dims = dims_for(cfg);
    let mut learner = Learner::build(
        cfg.algorithm.algorithm,
        dims,
        tc,
        cfg.algorithm.communication_layers,
        &mut stream_rng(seed, STREAM_INIT),
    )?;
    let mut act_rng = stream_rng(seed, STREAM_ACTIONS);
    let mut batch_rng = stream_rng(seed, STREAM_BATCHES);
    let mut buffer = ReplayBuffer::new(tc.buffer_capacity, tc.train_gate);
    let schedule = tc.epsilon();
    let window = cfg.algorithm.on_policy_only.then(|| cfg.world.steps_per_episode());
    let mut safety = SafetyReport::default();
    let mut epochs = Vec::with_capacity(tc.epochs);
    let mut total_updates = 0;
    for n in 0..tc.epochs {
        let started = Instant::now();
        let epsilon = schedule.at(n);
        let log = n % tc.trajectory_every == 0 || n + 1 == tc.epochs;
        let run = rollout(
            cfg,
            &learner,
            n,
            episode_seed(seed, n),
            epsilon,
            SelectionMode::Sample,
            &mut act_rng,
            &mut safety,
            log,
            |t| buffer.push(t),
        )?;
        for rec in &run.records {
            sink.on_trajectory(rec)?;
        }
        let mut updates = 0;
        if learner.is_trainable() && buffer.is_ready() {
            for j in 0..dims.agents {
                let batch = buffer.sample(tc.batch_size, window, &mut batch_rng);
                learner.update_agent(j, &batch, tc.discount, tc.grad_clip)?;
                updates += 1;
            }
        }
        total_updates += updates;
        let mean_reward = run.per_agent_reward.iter().sum::<f64>() / dims.agents as f64;
        let record = EpochRecord {
            epoch: n,
            epsilon,
            mean_reward,
            per_agent_reward: run.per_agent_reward,
            buffer_size: buffer.len(),
            wall_ms: if tc.record_wall_time {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
            updates,
        };
        sink.on_epoch(&record)?;
        epochs.push(record);
    }
    let meta = CheckpointMeta::for_config(cfg);
    let checkpoint = Checkpoint {
        algorithm: cfg.algorithm.algorithm.name().to_owned(),
        metadata: serde_json::to_string(&meta).expect("metadata serializes"),
        networks: learner.to_records(),
    };
    Ok(TrainOutcome {
        epochs,
        checkpoint,
        safety,
        updates: total_updates,
    })
}

/// Rebuilds the learner stored in `checkpoint`, refusing one built for a
/// different configuration.
pub fn learner_from_checkpoint(cfg: &ExperimentConfig, checkpoint: &Checkpoint) -> Result<Learner> {
    let meta: CheckpointMeta = serde_json::from_str(&checkpoint.metadata)
        .map_err(|e| Error::Checkpoint(format!("unreadable metadata: {e}")))?;
    let expected = CheckpointMeta::for_config(&cfg.with_algorithm(meta.algorithm));
    if meta != expected {
        return Err(Error::Checkpoint(format!(
            "checkpoint was built for {meta:?}, configuration needs {expected:?}"
        )));
    }
    if checkpoint.algorithm != meta.algorithm.name() {
        return Err(Error::Checkpoint(format!(
            "checkpoint header says {}, metadata says {}",
            checkpoint.algorithm, meta.algorithm
        )));
    }
    let mut learner = Learner::build(
        meta.algorithm,
        meta.dims,
        &cfg.training,
        meta.communication_layers,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    learner.load_records(&checkpoint.networks)?;
    Ok(learner)
}

pub struct InferenceOutcome {
    pub episodes: Vec<EpisodeMetrics>,
    pub safety: SafetyReport,
}

/// Greedy rollouts (ε = 0, most likely action) without learning.
pub fn run_inference(
    cfg: &ExperimentConfig,
    checkpoint: &Checkpoint,
    seed: u64,
    episodes: usize,
    sink: &mut dyn TrainSink,
) -> Result<InferenceOutcome> {
    let learner = learner_from_checkpoint(cfg, checkpoint)?;
    let mut rng = stream_rng(seed, STREAM_INFERENCE_ACTIONS);
    let mut safety = SafetyReport::default();
    let mut out = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let run = rollout(
            cfg,
            &learner,
            k,
            inference_seed(seed, k),
            0.0,
            SelectionMode::Argmax,
            &mut rng,
            &mut safety,
            true,
            |_| {},
        )?;
        for rec in &run.records {
            sink.on_trajectory(rec)?;
        }
        out.push(EpisodeMetrics::from_records(&run.records)?);
    }
    Ok(InferenceOutcome { episodes: out, safety })
}
