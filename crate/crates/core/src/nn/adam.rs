use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamId, ParamSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Tensors without a gradient in a step are
/// treated as having a zero gradient.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros = || params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &Grads) {
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (i, tensor) in params.tensors_mut().iter_mut().enumerate() {
            if !tensor.trainable {
                continue;
            }
            let g = grads.get(ParamId(i));
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..tensor.data.len() {
                let gj = g.map_or(0.0, |g| g[j]);
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let update = lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
                tensor.data[j] -= update;
            }
        }
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut Grads, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tape;

    #[test]
    fn minimizes_a_quadratic() {
        let mut params = ParamSet::new();
        let w = params.add("w", &[1, 2], vec![3.0, -2.0]);
        let mut adam = Adam::new(AdamConfig { lr: 0.05, ..Default::default() }, &params);
        for _ in 0..500 {
            let grads = {
                let mut tape = Tape::new(&params);
                let x = tape.input(vec![1.0, 1.0]);
                let y = tape.linear(w, None, x);
                let loss = tape.squared_error(y, &[0.5]);
                tape.backward(loss)
            };
            adam.step(&mut params, &grads);
        }
        let s: f64 = params.data(w).iter().sum();
        assert!((s - 0.5).abs() < 1e-3, "{s}");
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut params = ParamSet::new();
        let w = params.add("w", &[1, 1], vec![1.0]);
        let before = params.clone();
        let mut adam = Adam::new(AdamConfig { lr: 0.0, ..Default::default() }, &params);
        let mut grads = params.zero_grads();
        grads.slot(w)[0] = 3.0;
        adam.step(&mut params, &grads);
        assert_eq!(params, before);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut params = ParamSet::new();
        let w = params.add("w", &[2], vec![0.0, 0.0]);
        let mut grads = params.zero_grads();
        grads.slot(w).copy_from_slice(&[30.0, 40.0]);
        assert_eq!(clip_grad_norm(&mut grads, 5.0), 50.0);
        assert!((grads.norm() - 5.0).abs() < 1e-12);
    }
}
