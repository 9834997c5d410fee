use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{argmax, clip_global_norm, Activation, AdamConfig, Direction, Mlp, NetworkRecord, Optimizer};
use crate::trainer::Transition;

/// Q-learning target `r + γ·max_a Q(o′, a)`, cut to `r` at the episode end.
pub fn dqn_target(reward: f64, next_q: &[f64], discount: f64, terminal: bool) -> f64 {
    if terminal {
        return reward;
    }
    let best = next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    reward + discount * best
}

/// One independent Q-network per agent, no target networks.
#[derive(Debug, Clone)]
pub struct DqnLearner {
    nets: Vec<Mlp>,
    optimizers: Vec<Optimizer>,
    grad_clip: f64,
}

impl DqnLearner {
    pub fn new<R: Rng + ?Sized>(
        agents: usize,
        obs_dim: usize,
        hidden: usize,
        num_actions: usize,
        learning_rate: f64,
        grad_clip: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let nets = (0..agents)
            .map(|_| Mlp::new(&[obs_dim, hidden, num_actions], Activation::Identity, rng))
            .collect::<Result<Vec<_>>>()?;
        let optimizers = nets
            .iter()
            .map(|n| Optimizer::adam(n.param_count(), learning_rate, AdamConfig::default()))
            .collect();
        Ok(Self::from_parts(nets, optimizers, grad_clip))
    }

    pub fn from_parts(nets: Vec<Mlp>, optimizers: Vec<Optimizer>, grad_clip: f64) -> Self {
        Self {
            nets,
            optimizers,
            grad_clip,
        }
    }

    pub fn nets(&self) -> &[Mlp] {
        &self.nets
    }

    pub fn q_values(&self, j: usize, observation: &[f64]) -> Result<Vec<f64>> {
        self.nets[j].predict(observation)
    }

    /// ε-greedy over each agent's Q-values.
    pub fn act<R: Rng + ?Sized>(&self, observations: &[Vec<f64>], epsilon: f64, rng: &mut R) -> Result<Vec<usize>> {
        if observations.len() != self.nets.len() {
            return Err(Error::shape("dqn observations", self.nets.len(), observations.len()));
        }
        observations
            .iter()
            .enumerate()
            .map(|(j, o)| {
                let q = self.q_values(j, o)?;
                if epsilon > 0.0 && rng.random::<f64>() < epsilon {
                    Ok(rng.random_range(0..q.len()))
                } else {
                    Ok(argmax(&q))
                }
            })
            .collect()
    }

    /// Descends `½·mean (Q(o_j, a_j) − y)²` for agent `j`, targets held fixed.
    pub fn update_agent(&mut self, j: usize, batch: &[&Transition], discount: f64) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let net = &self.nets[j];
        let mut grad = vec![0.0; net.param_count()];
        let scale = 1.0 / batch.len() as f64;
        for t in batch {
            let next_q = net.predict(&t.next_observations[j])?;
            let y = dqn_target(t.rewards[j], &next_q, discount, t.terminal);
            let cache = net.forward(&t.observations[j])?;
            let a = t.actions[j];
            let mut g = vec![0.0; cache.output().len()];
            g[a] = scale * (cache.output()[a] - y);
            net.backward_into(&cache, &g, &mut grad)?;
        }
        clip_global_norm(&mut grad, self.grad_clip);
        self.optimizers[j].step(self.nets[j].params_mut(), &grad, Direction::Descent)
    }

    pub fn to_records(&self) -> Vec<NetworkRecord> {
        self.nets
            .iter()
            .enumerate()
            .map(|(j, n)| n.to_record(&format!("q{j}")))
            .collect()
    }

    pub fn load_records(&mut self, records: &[NetworkRecord]) -> Result<()> {
        for (j, net) in self.nets.iter_mut().enumerate() {
            let name = format!("q{j}");
            let rec = records
                .iter()
                .find(|r| r.name == name)
                .ok_or_else(|| Error::Checkpoint(format!("checkpoint has no network {name}")))?;
            if rec.layout != *net.layout() {
                return Err(Error::Checkpoint(format!("network {name} has the wrong layout")));
            }
            *net = Mlp::from_params(rec.layout.clone(), rec.params.clone())?;
        }
        Ok(())
    }
}
