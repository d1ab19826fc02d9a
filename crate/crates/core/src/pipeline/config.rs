use serde::{Deserialize, Serialize};

use crate::corpus::Modality;
use crate::encoder::EncoderSpec;
use crate::metrics::PhenotypeConfig;
use crate::nn::{AdamConfig, TrainConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Retrieve a template, then rewrite it with the editor.
    #[default]
    Full,
    /// Emit the retrieved template verbatim.
    RetrieveOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSource {
    /// Use the anchors given by the caller (the report's gold anchors in
    /// evaluation).
    #[default]
    User,
    /// Predict anchors from the embedding.
    Predicted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub mode: Mode,
    pub anchors_source: AnchorSource,
    pub anchor_count_cap: usize,
    pub k_retrieve: usize,
    pub max_len: usize,
    /// Sentences per report; `None` means one per anchor, capped at 5.
    pub sentence_budget: Option<usize>,
    /// Evaluation only: feed the first `prefix_len` gold tokens of each
    /// sentence as its prefix.
    pub gold_prefix: bool,
    pub prefix_len: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Full,
            anchors_source: AnchorSource::User,
            anchor_count_cap: 5,
            k_retrieve: 1,
            max_len: 40,
            sentence_budget: None,
            gold_prefix: false,
            prefix_len: 2,
        }
    }
}

pub const MAX_DEFAULT_SENTENCES: usize = 5;

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_retrieve == 0 {
            return Err(Error::Invalid("k_retrieve must be at least 1".into()));
        }
        if self.sentence_budget == Some(0) {
            return Err(Error::Invalid("sentence budget must be at least 1".into()));
        }
        if self.anchor_count_cap == 0 {
            return Err(Error::Invalid("anchor_count_cap must be at least 1".into()));
        }
        if self.max_len < 2 {
            return Err(Error::Invalid("max_len must be at least 2".into()));
        }
        Ok(())
    }

    pub fn budget(&self, anchors: usize) -> usize {
        self.sentence_budget
            .unwrap_or_else(|| anchors.min(MAX_DEFAULT_SENTENCES))
    }
}

/// Encoder layer sizes; input shape comes from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderSizes {
    pub temporal_filters: usize,
    pub temporal_kernel: usize,
    pub depth_multiplier: usize,
    pub separable_filters: usize,
    pub separable_kernel: usize,
    pub pool1: usize,
    pub pool2: usize,
    pub dim: usize,
}

impl Default for EncoderSizes {
    fn default() -> Self {
        let s = EncoderSpec::new(Modality::Eeg, 1, 1);
        Self {
            temporal_filters: s.temporal_filters,
            temporal_kernel: s.temporal_kernel,
            depth_multiplier: s.depth_multiplier,
            separable_filters: s.separable_filters,
            separable_kernel: s.separable_kernel,
            pool1: s.pool1,
            pool2: s.pool2,
            dim: s.dim,
        }
    }
}

impl EncoderSizes {
    pub fn spec(&self, modality: Modality, channels: usize, samples: usize) -> EncoderSpec {
        EncoderSpec {
            temporal_filters: self.temporal_filters,
            temporal_kernel: self.temporal_kernel,
            depth_multiplier: self.depth_multiplier,
            separable_filters: self.separable_filters,
            separable_kernel: self.separable_kernel,
            pool1: self.pool1,
            pool2: self.pool2,
            dim: self.dim,
            ..EncoderSpec::new(modality, channels, samples)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditorSizes {
    pub embed_dim: usize,
    pub hidden: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
}

impl Default for EditorSizes {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            hidden: 128,
            encoder_layers: 2,
            decoder_layers: 3,
        }
    }
}

/// Everything needed to fit a system from a corpus. The seeds inside the
/// nested training configs are ignored; each component derives its own
/// from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Report section to index and generate; `None` uses the modality
    /// default.
    pub section: Option<String>,
    pub min_count: usize,
    /// Fractions of patients in the train and validation splits; the rest
    /// is test.
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub encoder: EncoderSizes,
    /// Recordings used to calibrate the encoder's normalization layers.
    pub calibration_recordings: usize,
    pub editor: EditorSizes,
    pub editor_train: TrainConfig,
    pub anchor_train: TrainConfig,
    pub phenotype: PhenotypeConfig,
    pub generation: GenerationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            section: None,
            min_count: 3,
            train_fraction: 0.7,
            validation_fraction: 0.1,
            encoder: EncoderSizes::default(),
            calibration_recordings: 256,
            editor: EditorSizes::default(),
            editor_train: TrainConfig {
                epochs: 20,
                batch_size: 16,
                adam: AdamConfig { lr: 5e-3, ..Default::default() },
                clip_norm: Some(5.0),
                seed: 0,
            },
            anchor_train: TrainConfig {
                epochs: 60,
                batch_size: 32,
                adam: AdamConfig { lr: 1e-2, ..Default::default() },
                clip_norm: None,
                seed: 0,
            },
            phenotype: PhenotypeConfig::default(),
            generation: GenerationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.train_fraction, self.validation_fraction);
        if !(a > 0.0 && b >= 0.0 && a + b < 1.0) {
            return Err(Error::Invalid(format!("bad split fractions {a} / {b}")));
        }
        if self.min_count == 0 {
            return Err(Error::Invalid("min_count must be at least 1".into()));
        }
        self.generation.validate()
    }

    /// Stable 64-bit FNV-1a hash of the JSON form, as 16 hex digits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }

    pub(crate) fn derived_seed(&self, tag: &str) -> u64 {
        self.seed ^ fnv1a(tag.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}
