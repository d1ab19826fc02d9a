use serde::{Deserialize, Serialize};

use super::config::{AnchorSource, GenerationConfig, Mode};
use super::system::System;
use crate::corpus::{join_tokens, tokenize, AnchorWord};
use crate::editor::{ContextVector, EditInput, Editor};
use crate::encoder::{predict_anchor_words, Embedding};
use crate::prototype::SentenceId;
use crate::{Error, Result};

/// Where a sentence came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Template {
        sentence_id: SentenceId,
        template: String,
        score: f64,
    },
    /// Retrieval found nothing for the query.
    NoTemplate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSentence {
    pub text: String,
    pub anchor: AnchorWord,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedReport {
    pub anchors: Vec<AnchorWord>,
    pub sentences: Vec<GeneratedSentence>,
    /// Slot at which retrieval came back empty and generation stopped.
    pub stopped_at: Option<usize>,
}

impl GeneratedReport {
    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Anchors for a report: the given ones, or predictions from `f` when the
/// config asks for them or none were given. Capped at
/// `anchor_count_cap`.
pub fn resolve_anchors(
    system: &System,
    f: &Embedding,
    given: Option<&[AnchorWord]>,
    config: &GenerationConfig,
) -> Result<Vec<AnchorWord>> {
    let given = given.filter(|a| !a.is_empty());
    let mut anchors = match (config.anchors_source, given) {
        (AnchorSource::User, Some(a)) => a.to_vec(),
        _ => {
            let clf = system
                .anchor_classifier()
                .ok_or_else(|| Error::Invalid("no anchors given and no anchor classifier loaded".into()))?;
            predict_anchor_words(f, clf)?
        }
    };
    anchors.truncate(config.anchor_count_cap);
    Ok(anchors)
}

/// One slot of generation: retrieve for `anchor` and `prefix`, then
/// either edit the template or pass it through. Returns `None` when
/// nothing was retrieved; otherwise the sentence and the context the
/// template encoded to (unchanged in retrieve-only mode).
pub(crate) fn compose(
    system: &System,
    f: &Embedding,
    z: &ContextVector,
    anchor: &AnchorWord,
    prefix: Option<&str>,
    config: &GenerationConfig,
) -> Result<Option<(GeneratedSentence, ContextVector)>> {
    let Some((entry, score)) = system.top_template(anchor, prefix)? else {
        return Ok(None);
    };
    let provenance = Provenance::Template {
        sentence_id: entry.sentence_id,
        template: entry.raw.clone(),
        score,
    };
    let (text, z_next) = match config.mode {
        Mode::RetrieveOnly => (entry.raw.clone(), z.clone()),
        Mode::Full => {
            let editor = require_editor(system)?;
            let prefix_words = prefix.map(tokenize).unwrap_or_default();
            let prefix_ids = system.vocab().encode_tokens(&prefix_words);
            let input = EditInput {
                template: &entry.tokens,
                f,
                z_prev: z,
                prefix: &prefix_ids,
                max_len: config.max_len,
            };
            let (out, z_next) = editor.edit_sentence(&input)?;
            // Keep the prefix as typed, even where it maps to unknown ids.
            let mut words = prefix_words;
            words.extend(system.vocab().decode(&out[prefix_ids.len()..]));
            (join_tokens(&words), z_next)
        }
    };
    let sentence = GeneratedSentence {
        text,
        anchor: anchor.clone(),
        provenance,
    };
    Ok(Some((sentence, z_next)))
}

pub(crate) fn require_editor(system: &System) -> Result<&Editor> {
    system
        .editor()
        .ok_or_else(|| Error::Invalid("full mode needs a trained editor".into()))
}

fn initial_context(system: &System, config: &GenerationConfig) -> Result<ContextVector> {
    Ok(match config.mode {
        Mode::Full => ContextVector::zeros(require_editor(system)?.hidden()),
        Mode::RetrieveOnly => ContextVector::zeros(system.editor().map_or(0, Editor::hidden)),
    })
}

/// Writes a report sentence by sentence. Slot `j` queries with anchor
/// `j mod |anchors|` and `prefixes[j]` if present; in full mode the
/// context of each edited template feeds the next slot.
pub fn generate_report(
    system: &System,
    f: &Embedding,
    anchors: Option<&[AnchorWord]>,
    prefixes: Option<&[String]>,
    config: &GenerationConfig,
) -> Result<GeneratedReport> {
    config.validate()?;
    let anchors = resolve_anchors(system, f, anchors, config)?;
    if anchors.is_empty() {
        return Err(Error::Invalid("no anchors to generate from".into()));
    }
    let mut z = initial_context(system, config)?;
    let mut report = GeneratedReport {
        anchors: anchors.clone(),
        sentences: Vec::new(),
        stopped_at: None,
    };
    for j in 0..config.budget(anchors.len()) {
        let anchor = &anchors[j % anchors.len()];
        let prefix = prefixes.and_then(|p| p.get(j)).map(String::as_str);
        match compose(system, f, &z, anchor, prefix, config)? {
            Some((sentence, z_next)) => {
                report.sentences.push(sentence);
                z = z_next;
            }
            None => {
                report.stopped_at = Some(j);
                break;
            }
        }
    }
    Ok(report)
}

/// State of one interactive composition: the embedding, the anchors in
/// play, the accepted sentences and the context they built up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub f: Embedding,
    pub anchors: Vec<AnchorWord>,
    pub accepted: Vec<String>,
    pub z: ContextVector,
    pub config: GenerationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub sentence: String,
    pub anchor: AnchorWord,
    pub provenance: Provenance,
}

impl SessionState {
    pub fn new(system: &System, f: Embedding, anchors: Option<&[AnchorWord]>, config: GenerationConfig) -> Result<Self> {
        config.validate()?;
        if f.dim() != system.encoder().dim() {
            return Err(Error::shape("embedding", system.encoder().dim(), f.dim()));
        }
        let anchors = resolve_anchors(system, &f, anchors, &config)?;
        if anchors.is_empty() {
            return Err(Error::Invalid("no anchors to compose with".into()));
        }
        let z = initial_context(system, &config)?;
        Ok(Self {
            f,
            anchors,
            accepted: Vec::new(),
            z,
            config,
        })
    }

    pub fn step(&self) -> usize {
        self.accepted.len()
    }

    pub fn next_anchor(&self) -> &AnchorWord {
        &self.anchors[self.step() % self.anchors.len()]
    }

    /// Previews the next sentence. Leaves the state untouched. With no
    /// template, the suggestion is just the prefix.
    pub fn suggest(&self, system: &System, prefix: Option<&str>, anchor_override: Option<&AnchorWord>) -> Result<Suggestion> {
        let anchor = anchor_override.unwrap_or_else(|| self.next_anchor());
        match compose(system, &self.f, &self.z, anchor, prefix, &self.config)? {
            Some((s, _)) => Ok(Suggestion {
                sentence: s.text,
                anchor: s.anchor,
                provenance: s.provenance,
            }),
            None => Ok(Suggestion {
                sentence: prefix.map(|p| join_tokens(&tokenize(p))).unwrap_or_default(),
                anchor: anchor.clone(),
                provenance: Provenance::NoTemplate,
            }),
        }
    }

    /// Appends `sentence` and advances the context by encoding it as the
    /// next template.
    pub fn accept(&mut self, system: &System, sentence: &str) -> Result<()> {
        let sentence = sentence.trim();
        if sentence.is_empty() {
            return Err(Error::Invalid("accepted sentence is empty".into()));
        }
        if let Some(editor) = system.editor().filter(|_| self.z.dim() > 0) {
            let tokens = system.vocab().encode(sentence);
            if tokens.is_empty() {
                return Err(Error::Invalid("accepted sentence has no tokens".into()));
            }
            let input = EditInput {
                template: &tokens,
                f: &self.f,
                z_prev: &self.z,
                prefix: &[],
                max_len: self.config.max_len,
            };
            self.z = editor.encode_template(&input)?;
        }
        self.accepted.push(sentence.to_string());
        Ok(())
    }

    pub fn report(&self) -> String {
        self.accepted.join(" ")
    }
}
