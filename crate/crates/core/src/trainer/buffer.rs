use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// One joint step of experience. States and observations are reference
/// counted so consecutive transitions share the snapshot between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Arc<[f64]>,
    pub observations: Arc<[Vec<f64>]>,
    pub actions: Vec<usize>,
    /// Reward of each agent (individual plus common part).
    pub rewards: Vec<f64>,
    /// Team scalar seen by the centralized critic.
    pub team_reward: f64,
    pub next_state: Arc<[f64]>,
    pub next_observations: Arc<[Vec<f64>]>,
    pub terminal: bool,
}

impl Transition {
    pub fn num_agents(&self) -> usize {
        self.actions.len()
    }

    /// Checks that every per-agent vector has `agents` entries and the state
    /// and observation widths match.
    pub fn check_shape(&self, agents: usize, state_dim: usize, obs_dim: usize) -> Result<()> {
        let counts = [
            ("transition observations", self.observations.len()),
            ("transition actions", self.actions.len()),
            ("transition rewards", self.rewards.len()),
            ("transition next observations", self.next_observations.len()),
        ];
        for (ctx, n) in counts {
            if n != agents {
                return Err(Error::shape(ctx, agents, n));
            }
        }
        for (ctx, n) in [
            ("transition state", self.state.len()),
            ("transition next state", self.next_state.len()),
        ] {
            if n != state_dim {
                return Err(Error::shape(ctx, state_dim, n));
            }
        }
        for o in self.observations.iter().chain(self.next_observations.iter()) {
            if o.len() != obs_dim {
                return Err(Error::shape("transition observation width", obs_dim, o.len()));
            }
        }
        Ok(())
    }
}

/// Fixed-capacity FIFO of transitions. The oldest entry is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
    gate: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, gate: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            gate,
        }
    }

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(transition);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// True once enough transitions are stored to start training.
    pub fn is_ready(&self) -> bool {
        self.items.len() >= self.gate.max(1)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `n` distinct transitions chosen uniformly (all of them, in random
    /// order, if fewer are stored), optionally restricted to the newest `window`.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, window: Option<usize>, rng: &mut R) -> Vec<&'a Transition> {
        let len = self.items.len();
        let span = window.map_or(len, |w| w.min(len));
        let start = len - span;
        index::sample(rng, span, n.min(span))
            .into_iter()
            .map(|i| &self.items[start + i])
            .collect()
    }
}
