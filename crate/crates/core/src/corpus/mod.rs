//! Report corpora: the report model, tokenization, vocabulary and the
//! synthetic corpus generator used as a desk-scale test substrate.

mod io;
pub mod synth;
mod tokenize;
mod vocab;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{load_corpus, parse_corpus, write_corpus};
pub use synth::{synth_corpus, synth_recording};
pub use tokenize::{split_sentences, tokenize};
pub(crate) use vocab::join_tokens;
pub use vocab::{build_vocabulary, TokenId, Vocabulary, BOS, EOS, PAD, UNK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Xray,
    Eeg,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Xray => "xray",
            Modality::Eeg => "eeg",
        }
    }

    /// Section generation focuses on unless overridden.
    pub fn default_section(self) -> &'static str {
        match self {
            Modality::Xray => "findings",
            Modality::Eeg => "impression",
        }
    }

    /// The anchor-word label set, in canonical order.
    pub fn anchor_vocabulary(self) -> &'static [&'static str] {
        match self {
            Modality::Xray => XRAY_ANCHORS,
            Modality::Eeg => EEG_ANCHORS,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Modality::Xray => 0,
            Modality::Eeg => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Modality::Xray),
            1 => Ok(Modality::Eeg),
            other => Err(Error::Format(format!("unknown modality code {other}"))),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xray" | "x-ray" => Ok(Modality::Xray),
            "eeg" => Ok(Modality::Eeg),
            _ => Err(Error::Invalid(format!("unknown modality {s:?}"))),
        }
    }
}

pub const XRAY_ANCHORS: &[&str] = &[
    "No Finding",
    "Enlarged Cardiomediastinum",
    "Cardiomegaly",
    "Lung Lesion",
    "Airspace Opacity",
    "Edema",
    "Consolidation",
    "Pneumonia",
    "Atelectasis",
    "Pneumothorax",
    "Pleural Effusion",
    "Pleural Other",
    "Fracture",
];

pub const EEG_ANCHORS: &[&str] = &[
    "Normality",
    "Sleep",
    "Generalized Slowing",
    "Focal Slowing",
    "Epileptiform Discharges",
    "Drowsiness",
    "Spindles",
    "Vertex Waves",
    "Seizure",
];

/// A phenotype keyword from a modality's anchor vocabulary.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnchorWord(String);

impl AnchorWord {
    /// Resolves `label` against the modality vocabulary. Matching ignores
    /// case and surrounding whitespace; the canonical spelling is kept.
    pub fn parse(modality: Modality, label: &str) -> Result<Self> {
        let wanted = label.trim();
        modality
            .anchor_vocabulary()
            .iter()
            .find(|known| known.eq_ignore_ascii_case(wanted))
            .map(|known| AnchorWord((*known).to_string()))
            .ok_or_else(|| Error::UnknownAnchor {
                label: label.to_string(),
                modality: modality.to_string(),
            })
    }

    pub fn label(&self) -> &str {
        &self.0
    }

    /// Index of this label within the modality vocabulary.
    pub fn index(&self, modality: Modality) -> Option<usize> {
        modality.anchor_vocabulary().iter().position(|l| *l == self.0)
    }
}

impl fmt::Display for AnchorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub modality: Modality,
    pub sections: BTreeMap<String, String>,
    pub anchors: Vec<AnchorWord>,
    pub signal_ref: Option<String>,
}

impl Report {
    /// Patient identifier: the part of the id before the first `:`, or the
    /// whole id when it has none. Splits are disjoint on this key.
    pub fn patient_id(&self) -> &str {
        self.id.split(':').next().unwrap_or(&self.id)
    }

    /// Text of `section`, or of the modality default when `None`.
    pub fn section_text(&self, section: Option<&str>) -> &str {
        let name = section.unwrap_or(self.modality.default_section());
        self.sections.get(name).map(String::as_str).unwrap_or("")
    }

    pub fn sentences(&self, section: Option<&str>) -> Vec<String> {
        split_sentences(self.section_text(section))
    }

    /// Indicator vector over the modality anchor vocabulary.
    pub fn anchor_targets(&self) -> Vec<f64> {
        anchor_indicator(self.modality, &self.anchors)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.sections.values().all(|t| t.trim().is_empty()) {
            return Err(Error::Invalid(format!("report {}: all sections empty", self.id)));
        }
        for anchor in &self.anchors {
            AnchorWord::parse(self.modality, anchor.label())?;
        }
        Ok(())
    }
}

pub fn anchor_indicator(modality: Modality, anchors: &[AnchorWord]) -> Vec<f64> {
    let mut out = vec![0.0; modality.anchor_vocabulary().len()];
    for a in anchors {
        if let Some(i) = a.index(modality) {
            out[i] = 1.0;
        }
    }
    out
}
