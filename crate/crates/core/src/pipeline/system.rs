use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::corpus::{synth_recording, AnchorWord, Modality, Report, Vocabulary, EOS};
use crate::editor::{train_editor, EditExample, EditStep, Editor, EditorConfig};
use crate::encoder::{train_anchor_classifier, AnchorClassifier, Embedding, EncoderParams, RecordingInput};
use crate::metrics::{train_phenotype_classifier, PhenotypeClassifier};
use crate::nn::TrainConfig;
use crate::prototype::{make_query, PrototypeEntry, PrototypeRepository};
use crate::{Error, Result};

/// Where recordings come from. A report's `signal_ref` is read relative
/// to `base_dir`; reports without one get a synthetic recording rendered
/// from their text with `synth_seed`.
#[derive(Clone, Debug, Default)]
pub struct RecordingSource {
    pub base_dir: Option<PathBuf>,
    pub synth_seed: u64,
}

impl RecordingSource {
    pub fn synthetic(seed: u64) -> Self {
        Self { base_dir: None, synth_seed: seed }
    }

    pub fn recording(&self, report: &Report) -> Result<RecordingInput> {
        match &report.signal_ref {
            Some(r) => {
                let path = match &self.base_dir {
                    Some(dir) => dir.join(r),
                    None => PathBuf::from(r),
                };
                RecordingInput::read(&path)
            }
            None => Ok(synth_recording(report, self.synth_seed)),
        }
    }
}

const MANIFEST: &str = "system.json";
const VOCAB: &str = "vocab.tsv";
const REPO: &str = "repo.jsonl";

#[derive(Serialize, Deserialize)]
struct Manifest {
    modality: Modality,
    config: PipelineConfig,
}

/// The trained models and the sentence repository they share. The base
/// (vocabulary, repository, encoder) is always present; the anchor
/// classifier, editor and phenotype classifier can be fitted separately.
#[derive(Clone, Debug)]
pub struct System {
    config: PipelineConfig,
    modality: Modality,
    repo: PrototypeRepository,
    encoder: EncoderParams,
    anchors: Option<AnchorClassifier>,
    editor: Option<Editor>,
    phenotype: Option<PhenotypeClassifier>,
}

impl System {
    /// Builds vocabulary, repository and a calibrated encoder from
    /// training reports.
    pub fn fit_base(train: &[Report], config: &PipelineConfig, source: &RecordingSource) -> Result<Self> {
        config.validate()?;
        let first = train.first().ok_or(Error::EmptyCorpus)?;
        let modality = first.modality;
        if let Some(r) = train.iter().find(|r| r.modality != modality) {
            return Err(Error::Invalid(format!("report {} is {}, corpus is {modality}", r.id, r.modality)));
        }
        let section = config.section.as_deref();
        let vocab = Arc::new(Vocabulary::build(train, config.min_count, section)?);
        let repo = PrototypeRepository::build_in(train, vocab, section)?;
        let n_cal = config.calibration_recordings.clamp(1, train.len());
        let recs: Vec<RecordingInput> = train[..n_cal]
            .par_iter()
            .map(|r| source.recording(r))
            .collect::<Result<_>>()?;
        let spec = config.encoder.spec(modality, recs[0].channels(), recs[0].samples());
        let mut encoder = EncoderParams::init(spec, config.derived_seed("encoder"))?;
        let epochs: Vec<Vec<f64>> = recs
            .iter()
            .flat_map(|r| (0..r.epochs()).map(move |e| r.epoch(e)))
            .collect();
        encoder.calibrate(&epochs)?;
        log::info!("base fitted: {} sentences, vocabulary {}", repo.len(), repo.vocab().len());
        Ok(Self {
            config: config.clone(),
            modality,
            repo,
            encoder,
            anchors: None,
            editor: None,
            phenotype: None,
        })
    }

    /// Fits every component on `train`.
    pub fn fit(train: &[Report], config: &PipelineConfig, source: &RecordingSource) -> Result<Self> {
        let mut system = Self::fit_base(train, config, source)?;
        let embeddings = system.embed_reports(train, source)?;
        system.fit_anchors(train, &embeddings)?;
        system.fit_editor(train, &embeddings)?;
        system.fit_phenotype(train)?;
        Ok(system)
    }

    pub fn fit_anchors(&mut self, train: &[Report], embeddings: &[Embedding]) -> Result<()> {
        check_lengths(train, embeddings)?;
        let pairs: Vec<(Embedding, Vec<AnchorWord>)> = embeddings
            .iter()
            .cloned()
            .zip(train.iter().map(|r| r.anchors.clone()))
            .collect();
        let train_cfg = self.seeded(&self.config.anchor_train, "anchors");
        self.anchors = Some(train_anchor_classifier(self.modality, &pairs, &train_cfg)?);
        Ok(())
    }

    pub fn fit_editor(&mut self, train: &[Report], embeddings: &[Embedding]) -> Result<Vec<f64>> {
        let examples = self.edit_examples(train, embeddings)?;
        let sizes = &self.config.editor;
        let config = EditorConfig {
            embed_dim: sizes.embed_dim,
            hidden: sizes.hidden,
            encoder_layers: sizes.encoder_layers,
            decoder_layers: sizes.decoder_layers,
            max_len: self.config.generation.max_len,
            ..EditorConfig::new(self.vocab().len(), self.encoder.dim())
        };
        let train_cfg = self.seeded(&self.config.editor_train, "editor");
        log::info!("training editor on {} reports", examples.len());
        let (editor, curve) = train_editor(&examples, &config, &train_cfg)?;
        self.editor = Some(editor);
        Ok(curve)
    }

    pub fn fit_phenotype(&mut self, train: &[Report]) -> Result<()> {
        let section = self.config.section.as_deref();
        let texts: Vec<(String, Vec<AnchorWord>)> = train
            .iter()
            .map(|r| (r.section_text(section).to_string(), r.anchors.clone()))
            .collect();
        let mut cfg = self.config.phenotype.clone();
        cfg.train = self.seeded(&cfg.train, "phenotype");
        self.phenotype = Some(train_phenotype_classifier(self.modality, &texts, &cfg)?);
        Ok(())
    }

    fn seeded(&self, cfg: &TrainConfig, tag: &str) -> TrainConfig {
        TrainConfig {
            seed: self.config.derived_seed(tag),
            ..cfg.clone()
        }
    }

    /// Training chains built with the retrieval used at generation time:
    /// sentence `j` of a report takes the top template for anchor
    /// `j mod |anchors|` and is the editor's target for it.
    pub fn edit_examples(&self, reports: &[Report], embeddings: &[Embedding]) -> Result<Vec<EditExample>> {
        check_lengths(reports, embeddings)?;
        let section = self.config.section.as_deref();
        let max_len = self.config.generation.max_len;
        let mut out = Vec::new();
        for (r, f) in reports.iter().zip(embeddings) {
            if r.anchors.is_empty() {
                continue;
            }
            let mut steps = Vec::new();
            for (j, sentence) in r.sentences(section).iter().enumerate() {
                let anchor = &r.anchors[j % r.anchors.len()];
                let Some((entry, _)) = self.top_template(anchor, None)? else {
                    break;
                };
                let mut target = self.vocab().encode(sentence);
                target.truncate(max_len - 1);
                target.push(EOS);
                steps.push(EditStep {
                    template: entry.tokens.clone(),
                    target,
                });
            }
            if !steps.is_empty() {
                out.push(EditExample { f: f.clone(), steps });
            }
        }
        if out.is_empty() {
            return Err(Error::Invalid("no report yields an editor training example".into()));
        }
        Ok(out)
    }

    /// Best template for one anchor plus an optional prefix, or `None`
    /// when nothing in the repository matches.
    pub fn top_template(&self, anchor: &AnchorWord, prefix: Option<&str>) -> Result<Option<(&PrototypeEntry, f64)>> {
        let query = make_query(std::slice::from_ref(anchor), prefix, self.vocab())?;
        let k = self.config.generation.k_retrieve.max(1);
        match self.repo.retrieve(&query, k) {
            Ok(hits) => Ok(hits.into_iter().next()),
            Err(Error::EmptyQuery) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn embed(&self, rec: &RecordingInput) -> Result<Embedding> {
        self.encoder.encode_recording(rec)
    }

    /// Embeddings of every report's recording, in order.
    pub fn embed_reports(&self, reports: &[Report], source: &RecordingSource) -> Result<Vec<Embedding>> {
        reports
            .par_iter()
            .map(|r| self.embed(&source.recording(r)?))
            .collect()
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn section(&self) -> Option<&str> {
        self.config.section.as_deref()
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        self.repo.vocab()
    }

    pub fn repository(&self) -> &PrototypeRepository {
        &self.repo
    }

    pub fn encoder(&self) -> &EncoderParams {
        &self.encoder
    }

    pub fn anchor_classifier(&self) -> Option<&AnchorClassifier> {
        self.anchors.as_ref()
    }

    pub fn editor(&self) -> Option<&Editor> {
        self.editor.as_ref()
    }

    pub fn phenotype(&self) -> Option<&PhenotypeClassifier> {
        self.phenotype.as_ref()
    }

    pub fn set_editor(&mut self, editor: Editor) -> Result<()> {
        let c = editor.config();
        if c.vocab_size != self.vocab().len() || c.input_dim != self.encoder.dim() {
            return Err(Error::Invalid("editor sizes do not match this system".into()));
        }
        self.editor = Some(editor);
        Ok(())
    }

    /// Writes the system into `dir`: `system.json`, `vocab.tsv`,
    /// `repo.jsonl` and a `.bin`/`.json` pair per model.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            modality: self.modality,
            config: self.config.clone(),
        };
        let path = dir.join(MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        self.vocab().write_tsv(&dir.join(VOCAB))?;
        self.repo.save(&dir.join(REPO), VOCAB)?;
        let (bin, json) = pair(dir, "encoder");
        self.encoder.save(&bin, &json)?;
        if let Some(m) = &self.anchors {
            let (bin, json) = pair(dir, "anchors");
            m.save(&bin, &json)?;
        }
        if let Some(m) = &self.editor {
            let (bin, json) = pair(dir, "editor");
            m.save(&bin, &json)?;
        }
        if let Some(m) = &self.phenotype {
            let (bin, json) = pair(dir, "phenotype");
            m.save(&bin, &json)?;
        }
        Ok(())
    }

    /// Reads a system written by [`System::save`]. Models whose files are
    /// absent load as `None`.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let repo_path = dir.join(REPO);
        let vocab_ref = PrototypeRepository::snapshot_vocab_ref(&repo_path)?;
        let vocab = Arc::new(Vocabulary::read_tsv(&dir.join(vocab_ref))?);
        let repo = PrototypeRepository::load(&repo_path, vocab)?;
        let (bin, json) = pair(dir, "encoder");
        let encoder = EncoderParams::load(&bin, &json)?;
        let anchors = optional(dir, "anchors", AnchorClassifier::load)?;
        let editor = optional(dir, "editor", Editor::load)?;
        let phenotype = optional(dir, "phenotype", PhenotypeClassifier::load)?;
        let system = Self {
            config: manifest.config,
            modality: manifest.modality,
            repo,
            encoder,
            anchors,
            editor,
            phenotype,
        };
        if let Some(ed) = &system.editor {
            let c = ed.config();
            if c.vocab_size != system.vocab().len() || c.input_dim != system.encoder.dim() {
                return Err(Error::Format("editor sizes do not match the stored vocabulary and encoder".into()));
            }
        }
        Ok(system)
    }
}

fn pair(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.bin")), dir.join(format!("{name}.json")))
}

fn optional<T>(dir: &Path, name: &str, load: fn(&Path, &Path) -> Result<T>) -> Result<Option<T>> {
    let (bin, json) = pair(dir, name);
    if !bin.exists() && !json.exists() {
        return Ok(None);
    }
    load(&bin, &json).map(Some)
}

fn check_lengths(reports: &[Report], embeddings: &[Embedding]) -> Result<()> {
    if reports.len() != embeddings.len() {
        return Err(Error::shape("embeddings", reports.len(), embeddings.len()));
    }
    Ok(())
}
