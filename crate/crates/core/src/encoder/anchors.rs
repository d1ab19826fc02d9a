use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Embedding;
use crate::corpus::{AnchorWord, Modality};
use crate::nn::{fit, glorot, sigmoid, tensorfile, Grads, ParamId, ParamSet, Tape, TrainConfig};
use crate::{Error, Result};

/// Settings saved alongside the classifier weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorClassifierMeta {
    pub modality: Modality,
    pub dim: usize,
    pub thresholds: Vec<f64>,
    pub final_loss: Option<f64>,
}

/// Logistic regression from an embedding to each anchor label of one
/// modality, with a per-label decision threshold.
#[derive(Clone, Debug)]
pub struct AnchorClassifier {
    meta: AnchorClassifierMeta,
    params: ParamSet,
    w: ParamId,
    b: ParamId,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

impl AnchorClassifier {
    pub fn new(modality: Modality, dim: usize, seed: u64) -> Self {
        let labels = modality.anchor_vocabulary().len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let w = params.add("anchor.weight", &[labels, dim], glorot(&mut rng, dim, labels, labels * dim));
        let b = params.add("anchor.bias", &[labels], vec![0.0; labels]);
        Self {
            meta: AnchorClassifierMeta {
                modality,
                dim,
                thresholds: vec![DEFAULT_THRESHOLD; labels],
                final_loss: None,
            },
            params,
            w,
            b,
        }
    }

    pub fn modality(&self) -> Modality {
        self.meta.modality
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn labels(&self) -> &'static [&'static str] {
        self.meta.modality.anchor_vocabulary()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.meta.thresholds
    }

    pub fn set_thresholds(&mut self, thresholds: Vec<f64>) -> Result<()> {
        if thresholds.len() != self.labels().len() {
            return Err(Error::shape("thresholds", self.labels().len(), thresholds.len()));
        }
        if thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::Invalid("thresholds must lie in (0, 1)".into()));
        }
        self.meta.thresholds = thresholds;
        Ok(())
    }

    /// Mean training loss of the last epoch, once trained.
    pub fn final_loss(&self) -> Option<f64> {
        self.meta.final_loss
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.meta.dim {
            return Err(Error::shape("embedding", self.meta.dim, f.len()));
        }
        Ok(())
    }

    pub fn logits(&self, f: &Embedding) -> Result<Vec<f64>> {
        self.check(f.values())?;
        let (w, b) = (self.params.data(self.w), self.params.data(self.b));
        let d = self.meta.dim;
        Ok(b.iter()
            .enumerate()
            .map(|(i, bias)| bias + w[i * d..(i + 1) * d].iter().zip(f.values()).map(|(a, x)| a * x).sum::<f64>())
            .collect())
    }

    pub fn probabilities(&self, f: &Embedding) -> Result<Vec<f64>> {
        Ok(self.logits(f)?.into_iter().map(sigmoid).collect())
    }

    /// Labels whose probability reaches their threshold, most probable
    /// first; when none does, the single most probable label.
    pub fn predict(&self, f: &Embedding) -> Result<Vec<AnchorWord>> {
        let probs = self.probabilities(f)?;
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        let mut chosen: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| probs[i] >= self.meta.thresholds[i])
            .collect();
        if chosen.is_empty() {
            chosen.push(order[0]);
        }
        let labels = self.labels();
        chosen.into_iter().map(|i| AnchorWord::parse(self.meta.modality, labels[i])).collect()
    }

    /// Mean per-label binary cross-entropy on one example.
    pub fn loss(&self, params: &ParamSet, f: &[f64], targets: &[f64]) -> Result<(f64, Grads)> {
        self.check(f)?;
        if targets.len() != self.labels().len() {
            return Err(Error::shape("targets", self.labels().len(), targets.len()));
        }
        let mut tape = Tape::new(params);
        let x = tape.input(f.to_vec());
        let z = tape.linear(self.w, Some(self.b), x);
        let l = tape.bce_logits(z, targets);
        Ok((tape.scalar(l), tape.backward(l)))
    }

    pub fn save(&self, bin: &Path, json: &Path) -> Result<()> {
        tensorfile::write(bin, &self.params)?;
        let text = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(json, text).map_err(|e| Error::io(json, e))
    }

    pub fn load(bin: &Path, json: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(json).map_err(|e| Error::io(json, e))?;
        let meta: AnchorClassifierMeta = serde_json::from_str(&text)?;
        let mut clf = Self::new(meta.modality, meta.dim, 0);
        clf.set_thresholds(meta.thresholds.clone())?;
        clf.meta.final_loss = meta.final_loss;
        clf.params.load_from(&tensorfile::read(bin)?)?;
        Ok(clf)
    }
}

/// Fits an anchor classifier on `(embedding, labels)` pairs with Adam on
/// the mean per-label binary cross-entropy.
pub fn train_anchor_classifier(
    modality: Modality,
    pairs: &[(Embedding, Vec<AnchorWord>)],
    config: &TrainConfig,
) -> Result<AnchorClassifier> {
    let first = pairs.first().ok_or_else(|| Error::Invalid("empty training set".into()))?;
    let dim = first.0.dim();
    let mut clf = AnchorClassifier::new(modality, dim, config.seed);
    let mut data = Vec::with_capacity(pairs.len());
    for (f, labels) in pairs {
        if f.dim() != dim {
            return Err(Error::shape("embedding", dim, f.dim()));
        }
        let targets = crate::corpus::anchor_indicator(modality, labels);
        data.push((f.values().to_vec(), targets));
    }
    let mut params = clf.params.clone();
    let curve = fit(&mut params, &data, config, |p, (f, t)| clf.loss(p, f, t), |_, _, _| false)?;
    clf.params = params;
    clf.meta.final_loss = curve.last().copied();
    Ok(clf)
}
