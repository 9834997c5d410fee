use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Minimize: step against the gradient.
    Descent,
    /// Maximize: step along the gradient.
    Ascent,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Descent => -1.0,
            Direction::Ascent => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: u64,
}

impl AdamState {
    pub fn new(param_count: usize, learning_rate: f64, config: AdamConfig) -> Self {
        Self {
            learning_rate,
            config,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], direction: Direction) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::shape("adam parameters", self.first_moment.len(), params.len()));
        }
        if grad.len() != params.len() {
            return Err(Error::shape("adam gradient", params.len(), grad.len()));
        }
        self.steps += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        let t = self.steps as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let scale = direction.sign() * self.learning_rate;
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p += scale * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Either plain gradient steps or Adam.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd { learning_rate: f64 },
    Adam(AdamState),
}

impl Optimizer {
    pub fn adam(param_count: usize, learning_rate: f64, config: AdamConfig) -> Self {
        Optimizer::Adam(AdamState::new(param_count, learning_rate, config))
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], direction: Direction) -> Result<()> {
        match self {
            Optimizer::Sgd { learning_rate } => {
                if grad.len() != params.len() {
                    return Err(Error::shape("sgd gradient", params.len(), grad.len()));
                }
                let scale = direction.sign() * *learning_rate;
                for (p, g) in params.iter_mut().zip(grad) {
                    *p += scale * g;
                }
                Ok(())
            }
            Optimizer::Adam(state) => state.step(params, grad, direction),
        }
    }
}

/// Rescales `grad` so its L2 norm is at most `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}
