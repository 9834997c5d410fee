//! CommNet actor with parameters shared by every agent.
//!
//! Each agent encodes its observation into a hidden vector. At every one of
//! the `K` communication layers an agent concatenates its hidden vector with
//! the mean of the other agents' hidden vectors and feeds the result through
//! a rectified dense layer. A linear decoder produces the action logits and a
//! softmax turns them into a policy.
//!
//! Running the same network with communication switched off (the mean is
//! replaced by zeros) gives the DNN baseline.

mod team;

pub use team::{PolicyGroup, TeamPolicy};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{softmax, Activation, ForwardCache, MlpLayout, NetworkRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommNetConfig {
    pub obs_dim: usize,
    pub hidden: usize,
    pub comm_layers: usize,
    pub num_actions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommNetPolicy {
    config: CommNetConfig,
    encoder: MlpLayout,
    comm: Vec<MlpLayout>,
    decoder: MlpLayout,
    params: Vec<f64>,
    version: u64,
}

/// Everything a joint forward pass recorded.
#[derive(Debug, Clone)]
pub struct JointCache {
    encoder: Vec<ForwardCache>,
    /// `comm[i][j]`: layer i, agent j.
    comm: Vec<Vec<ForwardCache>>,
    decoder: Vec<ForwardCache>,
    probs: Vec<Vec<f64>>,
    communicate: bool,
    version: u64,
}

impl JointCache {
    pub fn num_agents(&self) -> usize {
        self.probs.len()
    }

    /// Action distribution of each agent.
    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn logits(&self, j: usize) -> &[f64] {
        self.decoder[j].output()
    }

    /// Hidden vector of agent `j` entering layer `layer` (0 = encoder output).
    pub fn hidden(&self, layer: usize, j: usize) -> &[f64] {
        if layer == 0 {
            self.encoder[j].output()
        } else {
            self.comm[layer - 1][j].output()
        }
    }

    /// Communication vector agent `j` received at communication layer `layer`.
    pub fn comm_vector(&self, layer: usize, j: usize) -> &[f64] {
        let input = self.comm[layer][j].input();
        &input[input.len() / 2..]
    }

    /// Smallest |pre-activation| over every rectified unit; finite differences
    /// closer to a kink than this are unreliable.
    pub fn relu_margin(&self) -> f64 {
        self.encoder
            .iter()
            .chain(self.comm.iter().flatten())
            .flat_map(|c| c.pre_activations().iter().flatten())
            .fold(f64::INFINITY, |m, &z| m.min(z.abs()))
    }
}

/// Mean of the other agents' hidden vectors; zeros when `j` has no peers.
pub fn comm_mean(hidden: &[&[f64]], j: usize) -> Vec<f64> {
    let width = hidden.first().map_or(0, |h| h.len());
    let mut c = vec![0.0; width];
    if hidden.len() < 2 {
        return c;
    }
    for (k, h) in hidden.iter().enumerate() {
        if k != j {
            for (ci, hi) in c.iter_mut().zip(h.iter()) {
                *ci += hi;
            }
        }
    }
    let scale = 1.0 / (hidden.len() - 1) as f64;
    c.iter_mut().for_each(|v| *v *= scale);
    c
}

/// Gradient of `log softmax(logits)[action]` with respect to the logits.
pub fn score_gradient(probs: &[f64], action: usize) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == action { 1.0 - p } else { -p })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// Draw from the policy distribution (training).
    Sample,
    /// Take the most likely action (inference).
    Argmax,
}

/// ε-greedy over the softmax policy: with probability `epsilon` a uniform
/// random action, otherwise a sample or the argmax of `probs`.
pub fn select_action<R: Rng + ?Sized>(probs: &[f64], epsilon: f64, rng: &mut R, mode: SelectionMode) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return rng.random_range(0..probs.len());
    }
    match mode {
        SelectionMode::Argmax => crate::nn::argmax(probs),
        SelectionMode::Sample => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            // Rounding left the cumulative sum just under 1.
            probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
        }
    }
}

/// Linear ε annealing per epoch with a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub floor: f64,
    pub decay_per_epoch: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            initial: 0.275,
            floor: 0.01,
            decay_per_epoch: 5e-5,
        }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, epoch: usize) -> f64 {
        let raw = self.initial - self.decay_per_epoch * epoch as f64;
        // 0.275 − 5e-5·5300 lands a few ulps above 0.01 in binary floating point.
        if raw <= self.floor + 1e-12 {
            self.floor
        } else {
            raw
        }
    }

    /// First epoch at which the floor is reached.
    pub fn floor_epoch(&self) -> usize {
        if self.decay_per_epoch <= 0.0 {
            return usize::MAX;
        }
        let n = ((self.initial - self.floor) / self.decay_per_epoch).round() as usize;
        // Guard against rounding on either side of the exact solution.
        (n.saturating_sub(1)..=n + 1)
            .find(|&k| self.at(k) <= self.floor)
            .unwrap_or(n + 1)
    }
}

impl CommNetPolicy {
    pub fn new<R: Rng + ?Sized>(config: CommNetConfig, rng: &mut R) -> Result<Self> {
        let (encoder, comm, decoder) = Self::layouts(&config)?;
        let mut params = encoder.init(rng);
        for layer in &comm {
            params.extend(layer.init(rng));
        }
        params.extend(decoder.init(rng));
        Ok(Self {
            config,
            encoder,
            comm,
            decoder,
            params,
            version: 0,
        })
    }

    fn layouts(config: &CommNetConfig) -> Result<(MlpLayout, Vec<MlpLayout>, MlpLayout)> {
        let h = config.hidden;
        let encoder = MlpLayout::new(&[config.obs_dim, h], Activation::Relu)?;
        let comm = (0..config.comm_layers)
            .map(|_| MlpLayout::new(&[2 * h, h], Activation::Relu))
            .collect::<Result<Vec<_>>>()?;
        let decoder = MlpLayout::new(&[h, config.num_actions], Activation::Identity)?;
        Ok((encoder, comm, decoder))
    }

    pub fn config(&self) -> &CommNetConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the shared parameter vector; invalidates caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Parameter ranges: encoder, each communication layer, decoder.
    fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        std::iter::once(&self.encoder)
            .chain(&self.comm)
            .chain(std::iter::once(&self.decoder))
            .map(|l| {
                let r = start..start + l.param_count();
                start = r.end;
                r
            })
            .collect()
    }

    /// First hidden vector of one agent.
    pub fn encode(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let r = &self.ranges()[0];
        Ok(self.encoder.forward(&self.params[r.clone()], obs)?.output().to_vec())
    }

    /// Runs all agents together. With `communicate` false every agent sees a
    /// zero communication vector.
    pub fn forward_joint(&self, observations: &[Vec<f64>], communicate: bool) -> Result<JointCache> {
        if observations.is_empty() {
            return Err(Error::shape("joint observations", 1, 0));
        }
        let ranges = self.ranges();
        let h = self.config.hidden;
        let encoder = observations
            .iter()
            .map(|o| self.encoder.forward(&self.params[ranges[0].clone()], o))
            .collect::<Result<Vec<_>>>()?;
        let mut comm: Vec<Vec<ForwardCache>> = Vec::with_capacity(self.comm.len());
        let mut input = vec![0.0; 2 * h];
        for (i, layer) in self.comm.iter().enumerate() {
            let prev: Vec<&[f64]> = if i == 0 {
                encoder.iter().map(|c| c.output()).collect()
            } else {
                comm[i - 1].iter().map(|c| c.output()).collect()
            };
            let caches = (0..prev.len())
                .map(|j| {
                    input[..h].copy_from_slice(prev[j]);
                    if communicate {
                        input[h..].copy_from_slice(&comm_mean(&prev, j));
                    } else {
                        input[h..].fill(0.0);
                    }
                    layer.forward(&self.params[ranges[i + 1].clone()], &input)
                })
                .collect::<Result<Vec<_>>>()?;
            comm.push(caches);
        }
        let last: Vec<&[f64]> = match comm.last() {
            Some(layer) => layer.iter().map(|c| c.output()).collect(),
            None => encoder.iter().map(|c| c.output()).collect(),
        };
        let dec_range = ranges.last().unwrap().clone();
        let decoder = last
            .iter()
            .map(|hidden| self.decoder.forward(&self.params[dec_range.clone()], hidden))
            .collect::<Result<Vec<_>>>()?;
        let probs = decoder.iter().map(|c| softmax(c.output())).collect();
        Ok(JointCache {
            encoder,
            comm,
            decoder,
            probs,
            communicate,
            version: self.version,
        })
    }

    /// Backpropagates per-agent logit gradients through the decoder, the
    /// communication layers (including the averaging across agents) and the
    /// encoder. Returns the gradient of the shared parameter vector.
    pub fn backward_joint(&self, cache: &JointCache, logit_grads: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.params.len()];
        self.backward_joint_into(cache, logit_grads, &mut grad)?;
        Ok(grad)
    }

    pub fn backward_joint_into(&self, cache: &JointCache, logit_grads: &[Vec<f64>], grad: &mut [f64]) -> Result<()> {
        if cache.version != self.version {
            return Err(Error::StaleCache(
                "policy parameters changed since the joint forward pass",
            ));
        }
        let agents = cache.num_agents();
        if logit_grads.len() != agents {
            return Err(Error::shape("per-agent logit gradients", agents, logit_grads.len()));
        }
        if grad.len() != self.params.len() {
            return Err(Error::shape("policy gradient buffer", self.params.len(), grad.len()));
        }
        let ranges = self.ranges();
        let h = self.config.hidden;
        let dec_range = ranges.last().unwrap().clone();

        let mut dh: Vec<Vec<f64>> = Vec::with_capacity(agents);
        for (j, g) in logit_grads.iter().enumerate() {
            if g.iter().all(|&v| v == 0.0) {
                dh.push(vec![0.0; h]);
                continue;
            }
            dh.push(self.decoder.backward(
                &self.params[dec_range.clone()],
                &cache.decoder[j],
                g,
                &mut grad[dec_range.clone()],
            )?);
        }
        for (i, layer) in self.comm.iter().enumerate().rev() {
            let range = ranges[i + 1].clone();
            let mut next = vec![vec![0.0; h]; agents];
            let mut dc = vec![vec![0.0; h]; agents];
            for j in 0..agents {
                if dh[j].iter().all(|&v| v == 0.0) {
                    continue;
                }
                let d_in = layer.backward(
                    &self.params[range.clone()],
                    &cache.comm[i][j],
                    &dh[j],
                    &mut grad[range.clone()],
                )?;
                for (n, d) in next[j].iter_mut().zip(&d_in[..h]) {
                    *n += d;
                }
                dc[j].copy_from_slice(&d_in[h..]);
            }
            if cache.communicate && agents > 1 {
                let scale = 1.0 / (agents - 1) as f64;
                for (j, dcj) in dc.iter().enumerate() {
                    for (k, nk) in next.iter_mut().enumerate() {
                        if k != j {
                            for (n, d) in nk.iter_mut().zip(dcj) {
                                *n += scale * d;
                            }
                        }
                    }
                }
            }
            dh = next;
        }
        let enc_range = ranges[0].clone();
        for (j, g) in dh.iter().enumerate() {
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            self.encoder.backward(
                &self.params[enc_range.clone()],
                &cache.encoder[j],
                g,
                &mut grad[enc_range.clone()],
            )?;
        }
        Ok(())
    }

    /// The policy as one record per sub-network, for checkpoints.
    pub fn to_records(&self, prefix: &str) -> Vec<NetworkRecord> {
        let ranges = self.ranges();
        let mut out = vec![NetworkRecord {
            name: format!("{prefix}.encoder"),
            layout: self.encoder.clone(),
            params: self.params[ranges[0].clone()].to_vec(),
        }];
        for (i, layer) in self.comm.iter().enumerate() {
            out.push(NetworkRecord {
                name: format!("{prefix}.comm{}", i + 1),
                layout: layer.clone(),
                params: self.params[ranges[i + 1].clone()].to_vec(),
            });
        }
        out.push(NetworkRecord {
            name: format!("{prefix}.decoder"),
            layout: self.decoder.clone(),
            params: self.params[ranges.last().unwrap().clone()].to_vec(),
        });
        out
    }

    /// Rebuilds a policy from [`CommNetPolicy::to_records`] output.
    pub fn from_records(config: CommNetConfig, records: &[&NetworkRecord]) -> Result<Self> {
        let (encoder, comm, decoder) = Self::layouts(&config)?;
        let expected: Vec<&MlpLayout> = std::iter::once(&encoder)
            .chain(&comm)
            .chain(std::iter::once(&decoder))
            .collect();
        if records.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "policy needs {} networks, checkpoint has {}",
                expected.len(),
                records.len()
            )));
        }
        let mut params = Vec::new();
        for (rec, layout) in records.iter().zip(expected) {
            if &rec.layout != layout {
                return Err(Error::Checkpoint(format!(
                    "network {} has layout {:?}, expected {:?}",
                    rec.name,
                    rec.layout.sizes(),
                    layout.sizes()
                )));
            }
            params.extend_from_slice(&rec.params);
        }
        Ok(Self {
            config,
            encoder,
            comm,
            decoder,
            params,
            version: 0,
        })
    }
}

#[cfg(test)]
mod tests;
