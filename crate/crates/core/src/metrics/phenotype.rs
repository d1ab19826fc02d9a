use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pr::{averaged_accuracy, mean_pr_auc};
use crate::corpus::{anchor_indicator, AnchorWord, Modality};
use crate::nn::{fit, glorot, sigmoid, tensorfile, AdamConfig, Grads, ParamId, ParamSet, Tape, TrainConfig};
use crate::{Error, Result};

/// Characters the classifier sees; anything else becomes an all-zero column.
pub const ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz0123456789 .,;:()";

/// One-hot indices of `text` after lowercasing; whitespace maps to space.
/// Text beyond `max_len` characters is dropped with a warning.
pub fn encode_text(text: &str, max_len: usize) -> Vec<Option<usize>> {
    let mut out: Vec<Option<usize>> = text
        .chars()
        .map(|c| {
            let c = if c.is_whitespace() { ' ' } else { c.to_ascii_lowercase() };
            ALPHABET.find(c)
        })
        .collect();
    if out.len() > max_len {
        log::warn!("truncating {}-character text to {max_len}", out.len());
        out.truncate(max_len);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhenotypeConfig {
    pub max_len: usize,
    pub kernel: usize,
    pub filters: usize,
    pub train: TrainConfig,
}

impl Default for PhenotypeConfig {
    fn default() -> Self {
        Self {
            max_len: 1024,
            kernel: 5,
            filters: 32,
            train: TrainConfig {
                epochs: 30,
                batch_size: 32,
                adam: AdamConfig { lr: 5e-3, ..Default::default() },
                clip_norm: Some(5.0),
                seed: 0,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Meta {
    modality: Modality,
    max_len: usize,
    kernel: usize,
    filters: usize,
    final_loss: Option<f64>,
}

/// Character CNN: one-hot convolution, ReLU, max over time, then a linear
/// layer to one logit per anchor label.
#[derive(Clone, Debug)]
pub struct PhenotypeClassifier {
    meta: Meta,
    params: ParamSet,
    conv_w: ParamId,
    conv_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

impl PhenotypeClassifier {
    pub fn new(modality: Modality, config: &PhenotypeConfig) -> Self {
        let labels = modality.anchor_vocabulary().len();
        let (f, a, k) = (config.filters, ALPHABET.len(), config.kernel);
        let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
        let mut params = ParamSet::new();
        let conv_w = params.add("char.conv.weight", &[f, a, k], glorot(&mut rng, k, f * k, f * a * k));
        let conv_b = params.add("char.conv.bias", &[f], vec![0.0; f]);
        let out_w = params.add("char.out.weight", &[labels, f], glorot(&mut rng, f, labels, labels * f));
        let out_b = params.add("char.out.bias", &[labels], vec![0.0; labels]);
        Self {
            meta: Meta {
                modality,
                max_len: config.max_len,
                kernel: k,
                filters: f,
                final_loss: None,
            },
            params,
            conv_w,
            conv_b,
            out_w,
            out_b,
        }
    }

    pub fn modality(&self) -> Modality {
        self.meta.modality
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.meta.final_loss
    }

    fn chars(&self, text: &str) -> Vec<Option<usize>> {
        let mut c = encode_text(text, self.meta.max_len);
        if c.len() < self.meta.kernel {
            c.resize(self.meta.kernel, None);
        }
        c
    }

    fn forward(&self, tape: &mut Tape, chars: &[Option<usize>]) -> crate::nn::Var {
        let h = tape.one_hot_conv1d(chars, self.conv_w, self.conv_b);
        let h = tape.relu(h);
        let h = tape.max_over_time(h, self.meta.filters);
        tape.linear(self.out_w, Some(self.out_b), h)
    }

    pub fn probabilities(&self, text: &str) -> Vec<f64> {
        let mut tape = Tape::new(&self.params);
        let z = self.forward(&mut tape, &self.chars(text));
        tape.value(z).iter().map(|&v| sigmoid(v)).collect()
    }

    /// Mean per-label binary cross-entropy of one text against `targets`.
    pub fn loss(&self, params: &ParamSet, text: &str, targets: &[f64]) -> Result<(f64, Grads)> {
        let labels = self.meta.modality.anchor_vocabulary().len();
        if targets.len() != labels {
            return Err(Error::shape("targets", labels, targets.len()));
        }
        let chars = self.chars(text);
        let mut tape = Tape::new(params);
        let z = self.forward(&mut tape, &chars);
        let l = tape.bce_logits(z, targets);
        Ok((tape.scalar(l), tape.backward(l)))
    }

    pub fn save(&self, bin: &Path, json: &Path) -> Result<()> {
        tensorfile::write(bin, &self.params)?;
        std::fs::write(json, serde_json::to_string_pretty(&self.meta)?).map_err(|e| Error::io(json, e))
    }

    pub fn load(bin: &Path, json: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(json).map_err(|e| Error::io(json, e))?;
        let meta: Meta = serde_json::from_str(&text)?;
        let config = PhenotypeConfig {
            max_len: meta.max_len,
            kernel: meta.kernel,
            filters: meta.filters,
            ..Default::default()
        };
        let mut clf = Self::new(meta.modality, &config);
        clf.meta.final_loss = meta.final_loss;
        clf.params.load_from(&tensorfile::read(bin)?)?;
        Ok(clf)
    }
}

pub fn train_phenotype_classifier(
    modality: Modality,
    reports: &[(String, Vec<AnchorWord>)],
    config: &PhenotypeConfig,
) -> Result<PhenotypeClassifier> {
    if reports.is_empty() {
        return Err(Error::Invalid("empty training set".into()));
    }
    if config.kernel == 0 || config.filters == 0 || config.max_len < config.kernel {
        return Err(Error::Invalid("phenotype classifier sizes are inconsistent".into()));
    }
    let mut clf = PhenotypeClassifier::new(modality, config);
    let data: Vec<(String, Vec<f64>)> = reports
        .iter()
        .map(|(t, labels)| (t.clone(), anchor_indicator(modality, labels)))
        .collect();
    let mut params = clf.params.clone();
    let curve = fit(&mut params, &data, &config.train, |p, (t, y)| clf.loss(p, t, y), |_, _, _| false)?;
    clf.params = params;
    clf.meta.final_loss = curve.last().copied();
    Ok(clf)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeScores {
    pub accuracy: f64,
    pub pr_auc: f64,
}

/// Scores the classifier's reading of `generated` texts against the gold
/// label sets.
pub fn phenotype_eval(generated: &[String], gold: &[Vec<AnchorWord>], clf: &PhenotypeClassifier) -> Result<PhenotypeScores> {
    if generated.len() != gold.len() {
        return Err(Error::shape("gold label sets", generated.len(), gold.len()));
    }
    let probs: Vec<Vec<f64>> = generated.iter().map(|t| clf.probabilities(t)).collect();
    let truth: Vec<Vec<bool>> = gold
        .iter()
        .map(|g| anchor_indicator(clf.modality(), g).into_iter().map(|v| v > 0.5).collect())
        .collect();
    Ok(PhenotypeScores {
        accuracy: averaged_accuracy(&probs, &truth),
        pr_auc: mean_pr_auc(&probs, &truth),
    })
}
