#![allow(dead_code)]

use clara::corpus::{synth_corpus, Modality, Report};
use clara::nn::TrainConfig;
use clara::pipeline::{split_by_patient, EditorSizes, PipelineConfig, RecordingSource, System};

/// Sizes small enough to fit a whole system in well under a second.
pub fn small_config(seed: u64) -> PipelineConfig {
    let mut c = PipelineConfig {
        seed,
        min_count: 1,
        calibration_recordings: 16,
        ..PipelineConfig::default()
    };
    c.encoder.temporal_kernel = 8;
    c.encoder.separable_kernel = 4;
    c.encoder.dim = 24;
    c.editor = EditorSizes {
        embed_dim: 8,
        hidden: 12,
        encoder_layers: 1,
        decoder_layers: 1,
    };
    c.editor_train = TrainConfig { epochs: 3, ..c.editor_train };
    c.anchor_train = TrainConfig { epochs: 10, ..c.anchor_train };
    c.phenotype.max_len = 200;
    c.phenotype.filters = 8;
    c.phenotype.train.epochs = 2;
    c
}

pub fn small_system(modality: Modality, n: usize) -> (System, Vec<Report>) {
    let corpus = synth_corpus(7, n, modality);
    let config = small_config(3);
    let split = split_by_patient(&corpus, config.seed, 0.7, 0.1).unwrap();
    let system = System::fit(&split.train, &config, &RecordingSource::synthetic(1)).unwrap();
    (system, split.test)
}
