use rand::Rng;

use super::{CommNetConfig, CommNetPolicy, JointCache};
use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, AdamConfig, Direction, NetworkRecord, Optimizer};

/// Agents that share one parameter vector.
#[derive(Debug, Clone)]
pub struct PolicyGroup {
    pub policy: CommNetPolicy,
    /// Global agent indices, in the order they enter the joint pass.
    pub members: Vec<usize>,
    /// Whether members average each other's hidden states.
    pub communicate: bool,
    pub optimizer: Optimizer,
}

/// The actors of a whole fleet: one CommNet group, one DNN group, or the
/// half/half split.
#[derive(Debug, Clone)]
pub struct TeamPolicy {
    groups: Vec<PolicyGroup>,
    /// `slot[j] = (group, position inside the group)`.
    slot: Vec<(usize, usize)>,
}

/// Joint forward pass of every group.
#[derive(Debug, Clone)]
pub struct TeamCache {
    caches: Vec<JointCache>,
    slot: Vec<(usize, usize)>,
}

impl TeamCache {
    pub fn probs(&self, j: usize) -> &[f64] {
        let (g, k) = self.slot[j];
        &self.caches[g].probs()[k]
    }

    pub fn all_probs(&self) -> Vec<Vec<f64>> {
        (0..self.slot.len()).map(|j| self.probs(j).to_vec()).collect()
    }

    pub fn group(&self, g: usize) -> &JointCache {
        &self.caches[g]
    }
}

impl TeamPolicy {
    fn from_groups(groups: Vec<PolicyGroup>) -> Self {
        let agents: usize = groups.iter().map(|g| g.members.len()).sum();
        let mut slot = vec![(0, 0); agents];
        for (g, group) in groups.iter().enumerate() {
            for (k, &j) in group.members.iter().enumerate() {
                slot[j] = (g, k);
            }
        }
        Self { groups, slot }
    }

    fn group<R: Rng + ?Sized>(
        config: CommNetConfig,
        members: Vec<usize>,
        communicate: bool,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<PolicyGroup> {
        let policy = CommNetPolicy::new(config, rng)?;
        let optimizer = Optimizer::adam(policy.param_count(), learning_rate, AdamConfig::default());
        Ok(PolicyGroup {
            policy,
            members,
            communicate,
            optimizer,
        })
    }

    /// Every agent in one communicating group.
    pub fn commnet<R: Rng + ?Sized>(
        config: CommNetConfig,
        agents: usize,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let g = Self::group(config, (0..agents).collect(), true, learning_rate, rng)?;
        Ok(Self::from_groups(vec![g]))
    }

    /// Same network as [`TeamPolicy::commnet`] with a zero communication vector.
    pub fn dnn<R: Rng + ?Sized>(config: CommNetConfig, agents: usize, learning_rate: f64, rng: &mut R) -> Result<Self> {
        let g = Self::group(config, (0..agents).collect(), false, learning_rate, rng)?;
        Ok(Self::from_groups(vec![g]))
    }

    /// First half communicates among itself, second half runs without
    /// communication. Each half has its own parameters.
    pub fn hybrid<R: Rng + ?Sized>(
        config: CommNetConfig,
        agents: usize,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !agents.is_multiple_of(2) || agents == 0 {
            return Err(Error::Config(format!(
                "hybrid needs an even number of UAMs, got {agents}"
            )));
        }
        let half = agents / 2;
        let a = Self::group(config, (0..half).collect(), true, learning_rate, rng)?;
        let b = Self::group(config, (half..agents).collect(), false, learning_rate, rng)?;
        Ok(Self::from_groups(vec![a, b]))
    }

    pub fn num_agents(&self) -> usize {
        self.slot.len()
    }

    pub fn groups(&self) -> &[PolicyGroup] {
        &self.groups
    }

    pub fn groups_mut(&mut self) -> &mut [PolicyGroup] {
        &mut self.groups
    }

    /// Group that owns agent `j`.
    pub fn group_of(&self, j: usize) -> usize {
        self.slot[j].0
    }

    pub fn forward(&self, observations: &[Vec<f64>]) -> Result<TeamCache> {
        if observations.len() != self.num_agents() {
            return Err(Error::shape("team observations", self.num_agents(), observations.len()));
        }
        let caches = self
            .groups
            .iter()
            .map(|g| {
                let obs: Vec<Vec<f64>> = g.members.iter().map(|&j| observations[j].clone()).collect();
                g.policy.forward_joint(&obs, g.communicate)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TeamCache {
            caches,
            slot: self.slot.clone(),
        })
    }

    /// Adds the parameter gradient of `Σ_j logit_grads[j] · logits_j` into
    /// one buffer per group.
    pub fn accumulate_gradient(
        &self,
        cache: &TeamCache,
        logit_grads: &[Vec<f64>],
        grads: &mut [Vec<f64>],
    ) -> Result<()> {
        if logit_grads.len() != self.num_agents() {
            return Err(Error::shape(
                "team logit gradients",
                self.num_agents(),
                logit_grads.len(),
            ));
        }
        for (g, group) in self.groups.iter().enumerate() {
            let local: Vec<Vec<f64>> = group.members.iter().map(|&j| logit_grads[j].clone()).collect();
            if local.iter().all(|v| v.iter().all(|&x| x == 0.0)) {
                continue;
            }
            group
                .policy
                .backward_joint_into(&cache.caches[g], &local, &mut grads[g])?;
        }
        Ok(())
    }

    /// Zeroed gradient buffers, one per group.
    pub fn zero_gradients(&self) -> Vec<Vec<f64>> {
        self.groups.iter().map(|g| vec![0.0; g.policy.param_count()]).collect()
    }

    /// Clips each group's gradient and takes one optimizer step in
    /// `direction`. Groups with an all-zero gradient are left untouched.
    pub fn apply(&mut self, grads: &mut [Vec<f64>], max_norm: f64, direction: Direction) -> Result<()> {
        for (group, grad) in self.groups.iter_mut().zip(grads.iter_mut()) {
            if grad.iter().all(|&g| g == 0.0) {
                continue;
            }
            clip_global_norm(grad, max_norm);
            group.optimizer.step(group.policy.params_mut(), grad, direction)?;
        }
        Ok(())
    }

    pub fn to_records(&self) -> Vec<NetworkRecord> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(g, group)| group.policy.to_records(&format!("actor{g}")))
            .collect()
    }

    /// Replaces the parameters with those in `records` (as written by
    /// [`TeamPolicy::to_records`]).
    pub fn load_records(&mut self, records: &[NetworkRecord]) -> Result<()> {
        for (g, group) in self.groups.iter_mut().enumerate() {
            let prefix = format!("actor{g}.");
            let mine: Vec<&NetworkRecord> = records.iter().filter(|r| r.name.starts_with(&prefix)).collect();
            group.policy = CommNetPolicy::from_records(*group.policy.config(), &mine)?;
        }
        Ok(())
    }
}
