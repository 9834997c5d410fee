use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, Activation, AdamConfig, Direction, Mlp, NetworkRecord, Optimizer};

/// `r + γ·V(s′) − V(s)`, with the bootstrap term dropped on terminal steps.
pub fn td_error(reward: f64, value: f64, next_value: f64, discount: f64, terminal: bool) -> f64 {
    let bootstrap = if terminal { 0.0 } else { discount * next_value };
    reward + bootstrap - value
}

/// Scalar state-value network with its own optimizer.
#[derive(Debug, Clone)]
pub struct ValueCritic {
    net: Mlp,
    optimizer: Optimizer,
    grad_clip: f64,
}

impl ValueCritic {
    /// `input → hidden → 1` network trained with Adam.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: usize,
        learning_rate: f64,
        grad_clip: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let net = Mlp::new(&[input_dim, hidden, 1], Activation::Identity, rng)?;
        let optimizer = Optimizer::adam(net.param_count(), learning_rate, AdamConfig::default());
        Ok(Self::from_parts(net, optimizer, grad_clip))
    }

    pub fn from_parts(net: Mlp, optimizer: Optimizer, grad_clip: f64) -> Self {
        Self {
            net,
            optimizer,
            grad_clip,
        }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.layout().input_dim()
    }

    pub fn value(&self, input: &[f64]) -> Result<f64> {
        Ok(self.net.predict(input)?[0])
    }

    /// Semi-gradient descent on `½·mean δ²`: the targets are held fixed, so
    /// the step follows `mean δ·∇V(x)` upward. `deltas[i]` belongs to `inputs[i]`.
    pub fn update(&mut self, inputs: &[&[f64]], deltas: &[f64]) -> Result<()> {
        if inputs.len() != deltas.len() {
            return Err(Error::shape("critic deltas", inputs.len(), deltas.len()));
        }
        if inputs.is_empty() || deltas.iter().all(|&d| d == 0.0) {
            return Ok(());
        }
        let mut grad = vec![0.0; self.net.param_count()];
        let scale = -1.0 / inputs.len() as f64;
        for (x, &d) in inputs.iter().zip(deltas) {
            if d == 0.0 {
                continue;
            }
            let cache = self.net.forward(x)?;
            self.net.backward_into(&cache, &[scale * d], &mut grad)?;
        }
        clip_global_norm(&mut grad, self.grad_clip);
        self.optimizer.step(self.net.params_mut(), &grad, Direction::Descent)
    }

    pub fn to_record(&self, name: &str) -> NetworkRecord {
        self.net.to_record(name)
    }

    /// Replaces the weights; the layout must match.
    pub fn load_record(&mut self, record: &NetworkRecord) -> Result<()> {
        if record.layout != *self.net.layout() {
            return Err(Error::Checkpoint(format!(
                "critic {} has layout {:?}, expected {:?}",
                record.name,
                record.layout.sizes(),
                self.net.layout().sizes()
            )));
        }
        self.net = Mlp::from_params(record.layout.clone(), record.params.clone())?;
        Ok(())
    }
}
