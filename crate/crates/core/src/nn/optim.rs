//! Bias-corrected Adam.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    /// Defaults: lr 1e-4, no weight decay, betas (0.9, 0.999), eps 1e-8.
    pub fn adam(param_count: usize, lr: f64) -> Self {
        OptimizerState {
            lr,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    /// One update: `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn adam_step(&mut self, params: &mut [f32], grads: &[f32]) -> Result<()> {
        if grads.len() != self.m.len() || params.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "optimizer tracks {} params, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient at parameter {i}")));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let mut g = grads[i] as f64;
            if self.weight_decay != 0.0 {
                g += self.weight_decay * params[i] as f64;
            }
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = (params[i] as f64 - self.lr * m_hat / (v_hat.sqrt() + self.epsilon)) as f32;
        }
        Ok(())
    }
}
