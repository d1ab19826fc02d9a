use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenId, BOS, EOS, PAD};
use crate::encoder::Embedding;
use crate::nn::{glorot, tensorfile, uniform, ParamId, ParamSet, Tape, Var};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditorConfig {
    pub vocab_size: usize,
    /// Dimension of the recording embedding `f`.
    pub input_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub max_len: usize,
    /// Only greedy decoding (width 1) is implemented.
    pub beam_width: usize,
}

impl EditorConfig {
    pub fn new(vocab_size: usize, input_dim: usize) -> Self {
        Self {
            vocab_size,
            input_dim,
            embed_dim: 64,
            hidden: 128,
            encoder_layers: 2,
            decoder_layers: 3,
            max_len: 40,
            beam_width: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size <= EOS as usize {
            return Err(Error::Invalid("vocabulary must hold the reserved tokens".into()));
        }
        let sizes = [self.input_dim, self.embed_dim, self.hidden, self.encoder_layers, self.decoder_layers];
        if sizes.contains(&0) {
            return Err(Error::Invalid("editor sizes must be positive".into()));
        }
        if self.max_len < 2 {
            return Err(Error::Invalid("max_len must be at least 2".into()));
        }
        if self.beam_width != 1 {
            return Err(Error::Invalid("only greedy decoding (beam width 1) is supported".into()));
        }
        Ok(())
    }
}

/// The context `z` carried from one sentence to the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextVector(Vec<f64>);

impl ContextVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("context vector".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Everything one edit needs.
#[derive(Clone, Copy, Debug)]
pub struct EditInput<'a> {
    pub template: &'a [TokenId],
    pub f: &'a Embedding,
    pub z_prev: &'a ContextVector,
    pub prefix: &'a [TokenId],
    pub max_len: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Cell {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub(crate) embed: ParamId,
    enc: Vec<[Cell; 2]>,
    wf: ParamId,
    wz: ParamId,
    proj_w: ParamId,
    proj_b: ParamId,
    dec: Vec<Cell>,
    out_w: ParamId,
    out_b: ParamId,
}

#[derive(Clone, Debug)]
pub struct Editor {
    pub(crate) config: EditorConfig,
    pub(crate) params: ParamSet,
    pub(crate) layout: Layout,
}

fn add_cell(params: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, input: usize, h: usize) -> Cell {
    let w = params.add(format!("{name}.w"), &[4 * h, input + h], glorot(rng, input + h, 4 * h, 4 * h * (input + h)));
    // Forget-gate bias starts at 1 so early training keeps the cell state.
    let mut bias = vec![0.0; 4 * h];
    bias[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
    let b = params.add(format!("{name}.b"), &[4 * h], bias);
    Cell { w, b }
}

pub(crate) struct LstmState {
    h: Vec<Var>,
    c: Vec<Var>,
}

impl Editor {
    pub fn new(config: EditorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (v, e, h, d) = (config.vocab_size, config.embed_dim, config.hidden, config.input_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let embed = params.add("embed", &[v, e], uniform(&mut rng, 1.0, v * e));
        let mut enc = Vec::new();
        for l in 0..config.encoder_layers {
            let input = if l == 0 { e } else { 2 * h };
            enc.push([
                add_cell(&mut params, &mut rng, &format!("enc.l{l}.fwd"), input, h),
                add_cell(&mut params, &mut rng, &format!("enc.l{l}.bwd"), input, h),
            ]);
        }
        let wf = params.add("cond.wf", &[h, d], glorot(&mut rng, d, h, h * d));
        let wz = params.add("cond.wz", &[h, h], glorot(&mut rng, h, h, h * h));
        let proj_w = params.add("proj.w", &[h, 2 * h], glorot(&mut rng, 2 * h, h, 2 * h * h));
        let proj_b = params.add("proj.b", &[h], vec![0.0; h]);
        let mut dec = Vec::new();
        for l in 0..config.decoder_layers {
            let input = if l == 0 { e + h } else { h };
            dec.push(add_cell(&mut params, &mut rng, &format!("dec.l{l}"), input, h));
        }
        let out_w = params.add("out.w", &[v, h], glorot(&mut rng, h, v, v * h));
        let out_b = params.add("out.b", &[v], vec![0.0; v]);
        let layout = Layout {
            embed,
            enc,
            wf,
            wz,
            proj_w,
            proj_b,
            dec,
            out_w,
            out_b,
        };
        Ok(Self { config, params, layout })
    }

    pub fn config(&self) -> &EditorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    pub(crate) fn with_params(&self, params: ParamSet) -> Self {
        Self {
            config: self.config.clone(),
            params,
            layout: self.layout.clone(),
        }
    }

    fn check_tokens(&self, what: &str, tokens: &[TokenId]) -> Result<()> {
        if let Some(t) = tokens.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(Error::Invalid(format!("{what} token id {t} outside vocabulary of {}", self.config.vocab_size)));
        }
        Ok(())
    }

    pub(crate) fn check_conditioning(&self, f: &[f64], z: &[f64]) -> Result<()> {
        if f.len() != self.config.input_dim {
            return Err(Error::shape("embedding", self.config.input_dim, f.len()));
        }
        if z.len() != self.config.hidden {
            return Err(Error::shape("context vector", self.config.hidden, z.len()));
        }
        Ok(())
    }

    fn cell(&self, tape: &mut Tape, cell: Cell, x: Var, h: Var, c: Var) -> (Var, Var) {
        let n = self.config.hidden;
        let xh = tape.concat(&[x, h]);
        let gates = tape.linear(cell.w, Some(cell.b), xh);
        let i = tape.slice(gates, 0, n);
        let i = tape.sigmoid(i);
        let f = tape.slice(gates, n, n);
        let f = tape.sigmoid(f);
        let g = tape.slice(gates, 2 * n, n);
        let g = tape.tanh(g);
        let o = tape.slice(gates, 3 * n, n);
        let o = tape.sigmoid(o);
        let keep = tape.mul(f, c);
        let write = tape.mul(i, g);
        let c = tape.add(keep, write);
        let squashed = tape.tanh(c);
        let h = tape.mul(o, squashed);
        (h, c)
    }

    /// Runs the bidirectional encoder on the tape and returns the new
    /// context `z`.
    pub(crate) fn encode_on(&self, tape: &mut Tape, template: &[TokenId], f: Var, z_prev: Var) -> Var {
        let l = &self.layout;
        let h = self.config.hidden;
        let from_f = tape.linear(l.wf, None, f);
        let from_z = tape.linear(l.wz, None, z_prev);
        let h0 = tape.add(from_f, from_z);
        let c0 = tape.input(vec![0.0; h]);
        let mut seq: Vec<Var> = template.iter().map(|&t| tape.row(l.embed, t as usize)).collect();
        let (mut last_fwd, mut last_bwd) = (h0, h0);
        for cells in &l.enc {
            let mut fwd = Vec::with_capacity(seq.len());
            let (mut hs, mut cs) = (h0, c0);
            for &x in &seq {
                (hs, cs) = self.cell(tape, cells[0], x, hs, cs);
                fwd.push(hs);
            }
            last_fwd = hs;
            let mut bwd = vec![h0; seq.len()];
            let (mut hs, mut cs) = (h0, c0);
            for (i, &x) in seq.iter().enumerate().rev() {
                (hs, cs) = self.cell(tape, cells[1], x, hs, cs);
                bwd[i] = hs;
            }
            last_bwd = hs;
            seq = fwd.iter().zip(&bwd).map(|(&a, &b)| tape.concat(&[a, b])).collect();
        }
        let both = tape.concat(&[last_fwd, last_bwd]);
        let z = tape.linear(l.proj_w, Some(l.proj_b), both);
        tape.tanh(z)
    }

    pub(crate) fn decoder_start(&self, tape: &mut Tape) -> LstmState {
        let zero = tape.input(vec![0.0; self.config.hidden]);
        let n = self.config.decoder_layers;
        LstmState { h: vec![zero; n], c: vec![zero; n] }
    }

    /// One decoder step on input token `prev`; returns the logits.
    pub(crate) fn decode_step(&self, tape: &mut Tape, state: &mut LstmState, prev: TokenId, z: Var) -> Var {
        let l = &self.layout;
        let e = tape.row(l.embed, prev as usize);
        let mut x = tape.concat(&[e, z]);
        for (k, &cell) in l.dec.iter().enumerate() {
            let (h, c) = self.cell(tape, cell, x, state.h[k], state.c[k]);
            state.h[k] = h;
            state.c[k] = c;
            x = h;
        }
        tape.linear(l.out_w, Some(l.out_b), x)
    }

    pub fn encode_template(&self, input: &EditInput) -> Result<ContextVector> {
        if input.template.is_empty() {
            return Err(Error::Invalid("empty template".into()));
        }
        self.check_tokens("template", input.template)?;
        self.check_conditioning(input.f.values(), input.z_prev.values())?;
        let mut tape = Tape::new(&self.params);
        let f = tape.input(input.f.values().to_vec());
        let z = tape.input(input.z_prev.values().to_vec());
        let out = self.encode_on(&mut tape, input.template, f, z);
        ContextVector::new(tape.value(out).to_vec())
    }

    /// Greedy decoding from `z`. Prefix tokens are fed verbatim first;
    /// afterwards each step takes the highest-scoring token, lowest id on
    /// ties, never emitting padding or BOS. Stops at EOS or after
    /// `max_len` tokens; the result has neither BOS nor EOS.
    pub fn decode_sentence(&self, z: &ContextVector, prefix: &[TokenId], max_len: usize) -> Result<Vec<TokenId>> {
        if max_len < 2 {
            return Err(Error::Invalid("max_len must be at least 2".into()));
        }
        if prefix.len() > max_len {
            return Err(Error::Invalid(format!("prefix of {} tokens exceeds max_len {max_len}", prefix.len())));
        }
        if z.dim() != self.config.hidden {
            return Err(Error::shape("context vector", self.config.hidden, z.dim()));
        }
        self.check_tokens("prefix", prefix)?;
        let mut tape = Tape::new(&self.params);
        let zv = tape.input(z.values().to_vec());
        let mut state = self.decoder_start(&mut tape);
        let mut out: Vec<TokenId> = prefix.to_vec();
        let mut prev = BOS;
        for &p in prefix {
            self.decode_step(&mut tape, &mut state, prev, zv);
            prev = p;
        }
        while out.len() < max_len {
            let logits = self.decode_step(&mut tape, &mut state, prev, zv);
            let next = argmax(tape.value(logits));
            if next == EOS {
                break;
            }
            out.push(next);
            prev = next;
        }
        Ok(out)
    }

    pub fn edit_sentence(&self, input: &EditInput) -> Result<(Vec<TokenId>, ContextVector)> {
        let z = self.encode_template(input)?;
        let out = self.decode_sentence(&z, input.prefix, input.max_len)?;
        Ok((out, z))
    }

    /// Replaces the token embedding table with the `embed` tensor of a
    /// tensor file; the shape must match.
    pub fn load_embeddings(&mut self, path: &Path) -> Result<()> {
        let file = tensorfile::read(path)?;
        let id = file.id("embed").ok_or_else(|| Error::Format(format!("{} has no embed tensor", path.display())))?;
        let src = file.get(id);
        let dst = self.params.get_mut(self.layout.embed);
        if src.shape != dst.shape {
            return Err(Error::shape("embed", format!("{:?}", dst.shape), format!("{:?}", src.shape)));
        }
        dst.data.clone_from(&src.data);
        Ok(())
    }

    pub fn save(&self, bin: &Path, json: &Path) -> Result<()> {
        tensorfile::write(bin, &self.params)?;
        std::fs::write(json, serde_json::to_string_pretty(&self.config)?).map_err(|e| Error::io(json, e))
    }

    pub fn load(bin: &Path, json: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(json).map_err(|e| Error::io(json, e))?;
        let config: EditorConfig = serde_json::from_str(&text)?;
        let mut editor = Self::new(config, 0)?;
        editor.params.load_from(&tensorfile::read(bin)?)?;
        if !editor.params.is_finite() {
            return Err(Error::NonFinite(format!("editor weights in {}", bin.display())));
        }
        Ok(editor)
    }
}

fn argmax(logits: &[f64]) -> TokenId {
    let mut best = None;
    for (i, &v) in logits.iter().enumerate() {
        if i == PAD as usize || i == BOS as usize {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map_or(EOS, |(i, _)| i as TokenId)
}
