use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamMoments {
    pub fn zeros<I: IntoIterator<Item = usize>>(sizes: I) -> Self {
        let m: Vec<Vec<f64>> = sizes.into_iter().map(|n| vec![0.0; n]).collect();
        let v = m.clone();
        Self { m, v }
    }
}

/// One bias-corrected Adam update at step `t` (1-based) with rate `lr`.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    moments: &mut AdamMoments,
    t: u64,
    lr: f64,
    hyper: &AdamHyper,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Validation("Adam step index starts at 1".into()));
    }
    if params.len() != grads.len() || params.len() != moments.m.len() {
        return Err(Error::Shape(format!(
            "{} parameter tensors, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            moments.m.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != moments.m[k].len() {
            return Err(Error::Shape(format!(
                "tensor {k}: {} parameters, {} gradients, {} moments",
                p.len(),
                g.len(),
                moments.m[k].len()
            )));
        }
    }

    let AdamHyper {
        beta1,
        beta2,
        epsilon,
    } = *hyper;
    let bc1 = 1.0 - beta1.powf(t as f64);
    let bc2 = 1.0 - beta2.powf(t as f64);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut moments.m[k];
        let v = &mut moments.v[k];
        for j in 0..p.len() {
            let gj = g[j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
            v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

/// Time-based decay: `lr0 / (1 + decay_rate * epoch)` with `epoch` starting at 0.
pub fn lr_schedule(epoch: usize, lr0: f64, decay_rate: f64) -> f64 {
    lr0 / (1.0 + decay_rate * epoch as f64)
}
