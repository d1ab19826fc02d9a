use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{Grads, ParamId, ParamSet};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Number of trainable coordinates to probe (all, if fewer exist).
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            samples: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(tensor, index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Compares the analytic gradient of `objective` with central finite
/// differences on a random subset of trainable coordinates. The relative
/// error of one coordinate is `|ga - gn| / max(1e-8, |ga| + |gn|)`.
pub fn gradient_check<F>(params: &ParamSet, objective: F, config: GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&ParamSet) -> Result<(f64, Grads)>,
{
    let (_, grads) = objective(params)?;
    if !grads.is_finite() {
        return Err(Error::NonFinite("analytic gradient".into()));
    }
    let coords: Vec<(ParamId, usize)> = params
        .tensors()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.trainable)
        .flat_map(|(i, t)| (0..t.data.len()).map(move |j| (ParamId(i), j)))
        .collect();
    let chosen: Vec<(ParamId, usize)> = if coords.len() <= config.samples {
        coords
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut picked = sample(&mut rng, coords.len(), config.samples).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| coords[i]).collect()
    };

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: chosen.len(),
        worst: None,
    };
    for (id, j) in chosen {
        let original = probe.data(id)[j];
        probe.get_mut(id).data[j] = original + config.step;
        let plus = objective(&probe)?.0;
        probe.get_mut(id).data[j] = original - config.step;
        let minus = objective(&probe)?.0;
        probe.get_mut(id).data[j] = original;
        let numeric = (plus - minus) / (2.0 * config.step);
        if !numeric.is_finite() {
            return Err(Error::NonFinite("numeric gradient".into()));
        }
        let analytic = grads.value(id, j);
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            if rel >= report.max_rel_error {
                report.worst = Some((params.get(id).name.clone(), j, analytic, numeric));
            }
        }
    }
    Ok(report)
}
