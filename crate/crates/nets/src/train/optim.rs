use serde::{Deserialize, Serialize};

/// Adam moments and step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2 weight decay added to the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-6 }
    }
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, lr: f64, cfg: &AdamConfig) {
    assert_eq!(params.len(), grad.len(), "parameter and gradient lengths");
    assert_eq!(params.len(), state.m.len(), "optimizer state length");
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grad[i] + cfg.weight_decay * params[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scheduler {
    None,
    Step { interval: usize, gamma: f64 },
    Exponential { gamma: f64 },
}

impl Scheduler {
    /// Learning rate used during epoch `epoch` (0-based).
    pub fn rate(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            Scheduler::None => base,
            Scheduler::Step { interval, gamma } => base * gamma.powi((epoch / interval.max(1)) as i32),
            Scheduler::Exponential { gamma } => base * gamma.powi(epoch as i32),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let gamma = match *self {
            Scheduler::None => return Ok(()),
            Scheduler::Step { interval, gamma } => {
                if interval == 0 {
                    return Err("step scheduler interval must be positive".into());
                }
                gamma
            }
            Scheduler::Exponential { gamma } => gamma,
        };
        if gamma > 0.0 && gamma <= 1.0 {
            Ok(())
        } else {
            Err(format!("scheduler gamma {gamma} outside (0, 1]"))
        }
    }
}
