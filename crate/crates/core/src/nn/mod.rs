//! Numerical machinery shared by every trainable model: named parameter
//! sets, a reverse-mode autodiff tape over `f64` vectors, the Adam
//! optimizer, finite-difference gradient checks and the tensor file
//! format.

mod adam;
mod gradcheck;
mod params;
mod tape;
pub mod tensorfile;
mod train;

pub use adam::{clip_grad_norm, Adam, AdamConfig};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use params::{Grads, ParamId, ParamSet, Tensor};
pub use tape::{Conv2dSpec, Tape, Var};
pub use train::{fit, TrainConfig};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform Glorot initialization for a `[fan_out, fan_in]` matrix.
pub fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

pub fn uniform(rng: &mut ChaCha8Rng, limit: f64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
