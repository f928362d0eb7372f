//! Adam optimizer over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment estimates plus the step counter. Serializable so a
/// paused training run can resume exactly where it left off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// One Adam update in place:
    ///
    /// ```text
    /// m <- b1 m + (1-b1) g        m_hat = m / (1 - b1^t)
    /// v <- b2 v + (1-b2) g^2      v_hat = v / (1 - b2^t)
    /// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
    /// ```
    ///
    /// The epsilon sits outside the square root, so the very first step with
    /// gradient g moves each parameter by `-lr * sign(g) / (1 + eps)` scaled
    /// appropriately; for lr 0.1 and g = 1 that is -0.1 / (1 + 1e-8).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], learning_rate: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "adam state holds {} parameters, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let b1t = 1.0 - BETA1.powi(self.t as i32);
        let b2t = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + EPSILON);
        }
        Ok(())
    }
}
