//! The learners compared against CommNet with a centralized critic: a
//! communication-free DNN, the half/half hybrid, independent actor-critic,
//! independent DQN and uniformly random Monte Carlo.

mod dqn;

pub use dqn::{dqn_target, DqnLearner};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::commnet::{select_action, CommNetConfig, SelectionMode, TeamPolicy};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::NetworkRecord;
use crate::trainer::{actor_update, critic_update, local_critic_update, Transition, ValueCritic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "commnet_ctde")]
    CommNetCtde,
    #[serde(rename = "hybrid")]
    Hybrid,
    #[serde(rename = "dnn")]
    Dnn,
    #[serde(rename = "iac")]
    Iac,
    #[serde(rename = "dqn")]
    Dqn,
    #[serde(rename = "monte_carlo")]
    MonteCarlo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::CommNetCtde,
        Algorithm::Hybrid,
        Algorithm::Dnn,
        Algorithm::Iac,
        Algorithm::Dqn,
        Algorithm::MonteCarlo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::CommNetCtde => "commnet_ctde",
            Algorithm::Hybrid => "hybrid",
            Algorithm::Dnn => "dnn",
            Algorithm::Iac => "iac",
            Algorithm::Dqn => "dqn",
            Algorithm::MonteCarlo => "monte_carlo",
        }
    }

    /// Whether training goes through the centralized state-value critic.
    pub fn uses_central_critic(self) -> bool {
        matches!(self, Algorithm::CommNetCtde | Algorithm::Hybrid | Algorithm::Dnn)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            Error::Config(format!("unknown algorithm {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Uniformly random action, no state.
pub fn monte_carlo_policy<R: Rng + ?Sized>(rng: &mut R, num_actions: usize) -> usize {
    rng.random_range(0..num_actions)
}

/// Sizes a learner is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerDims {
    pub agents: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub num_actions: usize,
}

/// CommNet-family actors with either one centralized critic or one local critic per agent.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub team: TeamPolicy,
    pub critic: Critic,
}

#[derive(Debug, Clone)]
pub enum Critic {
    /// One value network over the global state.
    Centralized(ValueCritic),
    /// One value network per agent over that agent's observation.
    Independent(Vec<ValueCritic>),
}

#[derive(Debug, Clone)]
pub enum Learner {
    ActorCritic(ActorCritic),
    Dqn(DqnLearner),
    MonteCarlo { num_actions: usize },
}

impl Learner {
    pub fn build<R: Rng + ?Sized>(
        algorithm: Algorithm,
        dims: LearnerDims,
        training: &TrainConfig,
        communication_layers: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let actor = CommNetConfig {
            obs_dim: dims.obs_dim,
            hidden: training.actor_hidden,
            comm_layers: communication_layers,
            num_actions: dims.num_actions,
        };
        let lr = training.actor_learning_rate;
        let central = |rng: &mut R| {
            ValueCritic::new(
                dims.state_dim,
                training.critic_hidden,
                training.critic_learning_rate,
                training.grad_clip,
                rng,
            )
            .map(Critic::Centralized)
        };
        Ok(match algorithm {
            Algorithm::CommNetCtde => {
                let team = TeamPolicy::commnet(actor, dims.agents, lr, rng)?;
                Learner::ActorCritic(ActorCritic {
                    team,
                    critic: central(rng)?,
                })
            }
            Algorithm::Dnn => {
                let team = TeamPolicy::dnn(actor, dims.agents, lr, rng)?;
                Learner::ActorCritic(ActorCritic {
                    team,
                    critic: central(rng)?,
                })
            }
            Algorithm::Hybrid => {
                let team = TeamPolicy::hybrid(actor, dims.agents, lr, rng)?;
                Learner::ActorCritic(ActorCritic {
                    team,
                    critic: central(rng)?,
                })
            }
            Algorithm::Iac => {
                let team = TeamPolicy::commnet(actor, dims.agents, lr, rng)?;
                let critics = (0..dims.agents)
                    .map(|_| {
                        ValueCritic::new(
                            dims.obs_dim,
                            training.critic_hidden,
                            training.critic_learning_rate,
                            training.grad_clip,
                            rng,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                Learner::ActorCritic(ActorCritic {
                    team,
                    critic: Critic::Independent(critics),
                })
            }
            Algorithm::Dqn => Learner::Dqn(DqnLearner::new(
                dims.agents,
                dims.obs_dim,
                training.dqn_hidden,
                dims.num_actions,
                training.dqn_learning_rate,
                training.grad_clip,
                rng,
            )?),
            Algorithm::MonteCarlo => Learner::MonteCarlo {
                num_actions: dims.num_actions,
            },
        })
    }

    /// Joint action: ε-greedy over the policy (or over Q-values for DQN).
    pub fn act<R: Rng + ?Sized>(
        &self,
        observations: &[Vec<f64>],
        epsilon: f64,
        mode: SelectionMode,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        match self {
            Learner::ActorCritic(ac) => {
                let cache = ac.team.forward(observations)?;
                Ok((0..observations.len())
                    .map(|j| select_action(cache.probs(j), epsilon, rng, mode))
                    .collect())
            }
            Learner::Dqn(dqn) => dqn.act(observations, epsilon, rng),
            Learner::MonteCarlo { num_actions } => Ok(observations
                .iter()
                .map(|_| monte_carlo_policy(rng, *num_actions))
                .collect()),
        }
    }

    /// Whether [`Learner::update_agent`] ever changes anything.
    pub fn is_trainable(&self) -> bool {
        !matches!(self, Learner::MonteCarlo { .. })
    }

    /// One pass of the per-agent update for agent `j` on `batch`: critic
    /// first, then the actor (or the agent's Q-network).
    pub fn update_agent(&mut self, j: usize, batch: &[&Transition], discount: f64, grad_clip: f64) -> Result<()> {
        match self {
            Learner::ActorCritic(ac) => {
                let deltas = match &mut ac.critic {
                    Critic::Centralized(critic) => critic_update(critic, batch, discount)?,
                    Critic::Independent(critics) => local_critic_update(&mut critics[j], j, batch, discount)?,
                };
                actor_update(&mut ac.team, batch, &deltas, &[j], grad_clip)
            }
            Learner::Dqn(dqn) => dqn.update_agent(j, batch, discount),
            Learner::MonteCarlo { .. } => Ok(()),
        }
    }

    pub fn to_records(&self) -> Vec<NetworkRecord> {
        match self {
            Learner::ActorCritic(ac) => {
                let mut out = ac.team.to_records();
                match &ac.critic {
                    Critic::Centralized(c) => out.push(c.to_record("critic")),
                    Critic::Independent(cs) => {
                        out.extend(cs.iter().enumerate().map(|(j, c)| c.to_record(&format!("critic{j}"))))
                    }
                }
                out
            }
            Learner::Dqn(dqn) => dqn.to_records(),
            Learner::MonteCarlo { .. } => Vec::new(),
        }
    }

    /// Loads weights written by [`Learner::to_records`] into a learner of the same shape.
    pub fn load_records(&mut self, records: &[NetworkRecord]) -> Result<()> {
        let find = |name: &str| {
            records
                .iter()
                .find(|r| r.name == name)
                .ok_or_else(|| Error::Checkpoint(format!("checkpoint has no network {name}")))
        };
        match self {
            Learner::ActorCritic(ac) => {
                ac.team.load_records(records)?;
                match &mut ac.critic {
                    Critic::Centralized(c) => c.load_record(find("critic")?)?,
                    Critic::Independent(cs) => {
                        for (j, c) in cs.iter_mut().enumerate() {
                            c.load_record(find(&format!("critic{j}"))?)?;
                        }
                    }
                }
                Ok(())
            }
            Learner::Dqn(dqn) => dqn.load_records(records),
            Learner::MonteCarlo { .. } => Ok(()),
        }
    }
}
