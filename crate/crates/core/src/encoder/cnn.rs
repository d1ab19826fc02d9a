use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Embedding, RecordingInput};
use crate::corpus::Modality;
use crate::nn::{glorot, tensorfile, Conv2dSpec, Grads, ParamId, ParamSet, Tape, Var};
use crate::{Error, Result};

/// Layer sizes of the convolutional encoder. Defaults follow the EEG
/// recipe: temporal conv (1, 64) with 8 filters, depthwise spatial conv
/// with multiplier 2, separable conv (1, 16) to 16 filters, pools of 4
/// and 8, and a dense layer to 512.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub modality: Modality,
    pub channels: usize,
    pub samples: usize,
    pub temporal_filters: usize,
    pub temporal_kernel: usize,
    pub depth_multiplier: usize,
    pub separable_filters: usize,
    pub separable_kernel: usize,
    pub pool1: usize,
    pub pool2: usize,
    pub dim: usize,
    pub dropout: f64,
    pub bn_eps: f64,
}

impl EncoderSpec {
    pub fn new(modality: Modality, channels: usize, samples: usize) -> Self {
        Self {
            modality,
            channels,
            samples,
            temporal_filters: 8,
            temporal_kernel: 64,
            depth_multiplier: 2,
            separable_filters: 16,
            separable_kernel: 16,
            pool1: 4,
            pool2: 8,
            dim: 512,
            dropout: 0.5,
            bn_eps: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.channels,
            self.samples,
            self.temporal_filters,
            self.temporal_kernel,
            self.depth_multiplier,
            self.separable_filters,
            self.separable_kernel,
            self.pool1,
            self.pool2,
            self.dim,
        ];
        if positive.contains(&0) {
            return Err(Error::Invalid("encoder sizes must be positive".into()));
        }
        if self.pooled_width() == 0 {
            return Err(Error::Invalid(format!(
                "{} samples is too short for pooling by {} and {}",
                self.samples, self.pool1, self.pool2
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Invalid("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }

    fn spatial_filters(&self) -> usize {
        self.temporal_filters * self.depth_multiplier
    }

    fn pooled_width(&self) -> usize {
        self.samples / self.pool1 / self.pool2
    }

    fn flat_len(&self) -> usize {
        self.separable_filters * self.pooled_width()
    }

    fn temporal(&self) -> Conv2dSpec {
        let (l, r) = Conv2dSpec::same(self.temporal_kernel);
        Conv2dSpec {
            in_ch: 1,
            out_ch: self.temporal_filters,
            h: self.channels,
            w: self.samples,
            kh: 1,
            kw: self.temporal_kernel,
            groups: 1,
            pad_left: l,
            pad_right: r,
        }
    }

    fn depthwise(&self) -> Conv2dSpec {
        Conv2dSpec {
            in_ch: self.temporal_filters,
            out_ch: self.spatial_filters(),
            h: self.channels,
            w: self.samples,
            kh: self.channels,
            kw: 1,
            groups: self.temporal_filters,
            pad_left: 0,
            pad_right: 0,
        }
    }

    fn separable_depthwise(&self) -> Conv2dSpec {
        let (l, r) = Conv2dSpec::same(self.separable_kernel);
        let f = self.spatial_filters();
        Conv2dSpec {
            in_ch: f,
            out_ch: f,
            h: 1,
            w: self.samples / self.pool1,
            kh: 1,
            kw: self.separable_kernel,
            groups: f,
            pad_left: l,
            pad_right: r,
        }
    }

    fn separable_pointwise(&self) -> Conv2dSpec {
        Conv2dSpec {
            in_ch: self.spatial_filters(),
            out_ch: self.separable_filters,
            h: 1,
            w: self.samples / self.pool1,
            kh: 1,
            kw: 1,
            groups: 1,
            pad_left: 0,
            pad_right: 0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct BatchNorm {
    gamma: ParamId,
    beta: ParamId,
    mean: ParamId,
    var: ParamId,
    channels: usize,
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    temporal: ParamId,
    bn1: BatchNorm,
    depthwise: ParamId,
    bn2: BatchNorm,
    sep_depthwise: ParamId,
    sep_pointwise: ParamId,
    bn3: BatchNorm,
    dense_w: ParamId,
    dense_b: ParamId,
}

/// Encoder weights together with the spec they were built for.
#[derive(Clone, Debug)]
pub struct EncoderParams {
    spec: EncoderSpec,
    params: ParamSet,
    layout: Layout,
}

fn batch_norm(params: &mut ParamSet, name: &str, channels: usize) -> BatchNorm {
    BatchNorm {
        gamma: params.add(format!("{name}.gamma"), &[channels], vec![1.0; channels]),
        beta: params.add(format!("{name}.beta"), &[channels], vec![0.0; channels]),
        mean: params.add_buffer(format!("{name}.mean"), &[channels], vec![0.0; channels]),
        var: params.add_buffer(format!("{name}.var"), &[channels], vec![1.0; channels]),
        channels,
    }
}

fn conv_weight(params: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, spec: Conv2dSpec) -> ParamId {
    let shape = spec.weight_shape();
    let fan_in = shape[1] * shape[2] * shape[3];
    let fan_out = shape[0] * shape[2] * shape[3] / spec.groups.max(1);
    let n = shape.iter().product();
    params.add(name, &shape, glorot(rng, fan_in, fan_out, n))
}

impl EncoderParams {
    pub fn init(spec: EncoderSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let temporal = conv_weight(&mut params, &mut rng, "temporal.weight", spec.temporal());
        let bn1 = batch_norm(&mut params, "bn1", spec.temporal_filters);
        let depthwise = conv_weight(&mut params, &mut rng, "depthwise.weight", spec.depthwise());
        let bn2 = batch_norm(&mut params, "bn2", spec.spatial_filters());
        let sep_depthwise = conv_weight(&mut params, &mut rng, "separable.depthwise", spec.separable_depthwise());
        let sep_pointwise = conv_weight(&mut params, &mut rng, "separable.pointwise", spec.separable_pointwise());
        let bn3 = batch_norm(&mut params, "bn3", spec.separable_filters);
        let flat = spec.flat_len();
        let dense_w = params.add("dense.weight", &[spec.dim, flat], glorot(&mut rng, flat, spec.dim, spec.dim * flat));
        let dense_b = params.add("dense.bias", &[spec.dim], vec![0.0; spec.dim]);
        let layout = Layout {
            temporal,
            bn1,
            depthwise,
            bn2,
            sep_depthwise,
            sep_pointwise,
            bn3,
            dense_w,
            dense_b,
        };
        Ok(Self { spec, params, layout })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    fn check_epoch(&self, epoch: &[f64]) -> Result<()> {
        let expected = self.spec.channels * self.spec.samples;
        if epoch.len() != expected {
            return Err(Error::shape(
                "epoch",
                format!("[{} x {}]", self.spec.channels, self.spec.samples),
                format!("{} values", epoch.len()),
            ));
        }
        if epoch.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("epoch input".into()));
        }
        Ok(())
    }

    /// Forward pass recording pre-normalization activations in `taps`.
    /// `dropout` supplies the mask RNG in training; `None` means inference.
    fn forward(
        &self,
        tape: &mut Tape,
        epoch: &[f64],
        mut dropout: Option<&mut ChaCha8Rng>,
        taps: &mut Vec<Var>,
    ) -> Var {
        let s = &self.spec;
        let l = &self.layout;
        let eps = s.bn_eps;
        let x = tape.input(epoch.to_vec());
        let h = tape.conv2d(x, l.temporal, None, s.temporal());
        taps.push(h);
        let h = bn(tape, h, l.bn1, eps);
        let h = tape.conv2d(h, l.depthwise, None, s.depthwise());
        taps.push(h);
        let h = bn(tape, h, l.bn2, eps);
        let h = tape.relu(h);
        let h = tape.avg_pool_w(h, s.spatial_filters(), s.pool1);
        let h = drop(tape, h, s.dropout, dropout.as_deref_mut());
        let h = tape.conv2d(h, l.sep_depthwise, None, s.separable_depthwise());
        let h = tape.conv2d(h, l.sep_pointwise, None, s.separable_pointwise());
        taps.push(h);
        let h = bn(tape, h, l.bn3, eps);
        let h = tape.relu(h);
        let h = tape.avg_pool_w(h, s.separable_filters, s.pool2);
        let h = drop(tape, h, s.dropout, dropout);
        tape.linear(l.dense_w, Some(l.dense_b), h)
    }

    /// Embeds one `[channels x samples]` epoch, flattened channel-major.
    pub fn encode_epoch(&self, epoch: &[f64]) -> Result<Embedding> {
        self.check_epoch(epoch)?;
        let mut tape = Tape::new(&self.params);
        let out = self.forward(&mut tape, epoch, None, &mut Vec::new());
        Embedding::new(tape.value(out).to_vec())
    }

    /// Mean of the per-epoch embeddings.
    pub fn encode_recording(&self, rec: &RecordingInput) -> Result<Embedding> {
        if rec.modality() != self.spec.modality {
            return Err(Error::Invalid(format!(
                "{} recording given to a {} encoder",
                rec.modality(),
                self.spec.modality
            )));
        }
        let mut acc = vec![0.0; self.spec.dim];
        for e in 0..rec.epochs() {
            let f = self.encode_epoch(&rec.epoch(e))?;
            for (a, v) in acc.iter_mut().zip(f.values()) {
                *a += v;
            }
        }
        let n = rec.epochs() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Embedding::new(acc)
    }

    /// Half squared error between the embedding of `epoch` and `target`,
    /// with gradients for every trainable tensor. Evaluated against the
    /// given `params`, which must share this encoder's layout.
    pub fn loss(
        &self,
        params: &ParamSet,
        epoch: &[f64],
        target: &[f64],
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Grads)> {
        self.check_epoch(epoch)?;
        if target.len() != self.spec.dim {
            return Err(Error::shape("target", self.spec.dim, target.len()));
        }
        let mut tape = Tape::new(params);
        let out = self.forward(&mut tape, epoch, dropout, &mut Vec::new());
        let loss = tape.squared_error(out, target);
        Ok((tape.scalar(loss), tape.backward(loss)))
    }

    /// Sets the running statistics of each normalization layer, in order,
    /// to the per-channel mean and variance of its input over `epochs`.
    pub fn calibrate(&mut self, epochs: &[Vec<f64>]) -> Result<()> {
        if epochs.is_empty() {
            return Err(Error::Invalid("calibration needs at least one epoch".into()));
        }
        for e in epochs {
            self.check_epoch(e)?;
        }
        let layers = [self.layout.bn1, self.layout.bn2, self.layout.bn3];
        for (k, layer) in layers.iter().enumerate() {
            let c = layer.channels;
            let (mut sum, mut sq, mut count) = (vec![0.0; c], vec![0.0; c], 0usize);
            for e in epochs {
                let mut tape = Tape::new(&self.params);
                let mut taps = Vec::new();
                self.forward(&mut tape, e, None, &mut taps);
                let v = tape.value(taps[k]);
                let per = v.len() / c;
                for ch in 0..c {
                    for x in &v[ch * per..(ch + 1) * per] {
                        sum[ch] += x;
                        sq[ch] += x * x;
                    }
                }
                count += per;
            }
            let n = count as f64;
            let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
            let var: Vec<f64> = sq
                .iter()
                .zip(&mean)
                .map(|(q, m)| (q / n - m * m).max(1e-6))
                .collect();
            self.params.get_mut(layer.mean).data = mean;
            self.params.get_mut(layer.var).data = var;
        }
        Ok(())
    }

    pub fn save(&self, bin: &Path, json: &Path) -> Result<()> {
        tensorfile::write(bin, &self.params)?;
        let text = serde_json::to_string_pretty(&self.spec)?;
        std::fs::write(json, text).map_err(|e| Error::io(json, e))
    }

    pub fn load(bin: &Path, json: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(json).map_err(|e| Error::io(json, e))?;
        let spec: EncoderSpec = serde_json::from_str(&text)?;
        let mut enc = Self::init(spec, 0)?;
        enc.params.load_from(&tensorfile::read(bin)?)?;
        if !enc.params.is_finite() {
            return Err(Error::NonFinite(format!("encoder weights in {}", bin.display())));
        }
        Ok(enc)
    }
}

fn bn(tape: &mut Tape, x: Var, layer: BatchNorm, eps: f64) -> Var {
    tape.channel_affine(x, layer.channels, layer.gamma, layer.beta, layer.mean, layer.var, eps)
}

// Inverted dropout: kept units are scaled by 1 / (1 - p).
fn drop(tape: &mut Tape, x: Var, p: f64, rng: Option<&mut ChaCha8Rng>) -> Var {
    match rng {
        Some(rng) if p > 0.0 => {
            let keep = 1.0 / (1.0 - p);
            let n = tape.value(x).len();
            let mask = (0..n).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
            let m = tape.input(mask);
            tape.mul(x, m)
        }
        _ => x,
    }
}
