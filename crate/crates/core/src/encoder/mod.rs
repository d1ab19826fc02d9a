//! Input encoder: recordings to a fixed-size embedding, and the anchor
//! classifier that proposes anchor words from that embedding.

mod anchors;
mod cnn;
mod recording;
#[cfg(test)]
mod tests;

pub use anchors::{train_anchor_classifier, AnchorClassifier, AnchorClassifierMeta, DEFAULT_THRESHOLD};
pub use cnn::{EncoderParams, EncoderSpec};
pub use recording::RecordingInput;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The embedding `f` of one recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Thin wrapper matching the free-function form used elsewhere.
pub fn predict_anchor_words(f: &Embedding, clf: &AnchorClassifier) -> Result<Vec<crate::corpus::AnchorWord>> {
    clf.predict(f)
}
