use serde::{Deserialize, Serialize};

use super::model::{Editor, EditorConfig};
use crate::corpus::{TokenId, BOS, EOS};
use crate::encoder::Embedding;
use crate::nn::{fit, gradient_check, GradCheckConfig, GradCheckReport, Grads, ParamSet, Tape, TrainConfig};
use crate::{Error, Result};

/// One sentence of a training chain: template in, target out. The target
/// ends with EOS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditStep {
    pub template: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

/// A report's worth of edits sharing one embedding. Contexts are chained
/// through the steps in order, starting from zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditExample {
    pub f: Embedding,
    pub steps: Vec<EditStep>,
}

impl EditExample {
    fn validate(&self, config: &EditorConfig) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Invalid("training example without sentences".into()));
        }
        if self.f.dim() != config.input_dim {
            return Err(Error::shape("embedding", config.input_dim, self.f.dim()));
        }
        for s in &self.steps {
            if s.template.is_empty() {
                return Err(Error::Invalid("empty template in training data".into()));
            }
            if s.target.last() != Some(&EOS) {
                return Err(Error::Invalid("training targets must end with EOS".into()));
            }
            let bad = s.template.iter().chain(&s.target).find(|&&t| t as usize >= config.vocab_size);
            if let Some(t) = bad {
                return Err(Error::Invalid(format!("token id {t} outside vocabulary")));
            }
        }
        Ok(())
    }
}

impl Editor {
    /// Teacher-forced cross-entropy per target token over the whole chain,
    /// with gradients for every tensor the chain touches.
    pub fn loss(&self, params: &ParamSet, example: &EditExample) -> Result<(f64, Grads)> {
        let mut tape = Tape::new(params);
        let f = tape.input(example.f.values().to_vec());
        let mut z = tape.input(vec![0.0; self.config.hidden]);
        let mut terms = Vec::new();
        for step in &example.steps {
            z = self.encode_on(&mut tape, &step.template, f, z);
            let mut state = self.decoder_start(&mut tape);
            let mut prev = BOS;
            for &t in &step.target {
                let logits = self.decode_step(&mut tape, &mut state, prev, z);
                terms.push(tape.softmax_xent(logits, t as usize));
                prev = t;
            }
        }
        let total = tape.sum(&terms);
        let loss = tape.scale(total, 1.0 / terms.len() as f64);
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFinite("editor loss".into()));
        }
        Ok((value, tape.backward(loss)))
    }
}

/// Trains a fresh editor; returns it with the per-epoch mean losses.
pub fn train_editor(dataset: &[EditExample], config: &EditorConfig, train: &TrainConfig) -> Result<(Editor, Vec<f64>)> {
    train_editor_with(dataset, config, train, |_, _, _| false)
}

/// As [`train_editor`], consulting `stop(epoch, editor, loss)` after
/// each epoch.
pub fn train_editor_with<S>(
    dataset: &[EditExample],
    config: &EditorConfig,
    train: &TrainConfig,
    mut stop: S,
) -> Result<(Editor, Vec<f64>)>
where
    S: FnMut(usize, &Editor, f64) -> bool,
{
    if dataset.is_empty() {
        return Err(Error::Invalid("empty training set".into()));
    }
    let editor = Editor::new(config.clone(), train.seed)?;
    for ex in dataset {
        ex.validate(config)?;
    }
    let mut params = editor.params.clone();
    let curve = fit(
        &mut params,
        dataset,
        train,
        |p, ex| editor.loss(p, ex),
        |epoch, p, loss| stop(epoch, &editor.with_params(p.clone()), loss),
    )?;
    Ok((editor.with_params(params), curve))
}

/// Finite-difference check of the full encode-decode loss on `example`.
pub fn editor_gradient_check(editor: &Editor, example: &EditExample, config: GradCheckConfig) -> Result<GradCheckReport> {
    example.validate(&editor.config)?;
    gradient_check(editor.params(), |p| editor.loss(p, example), config)
}
