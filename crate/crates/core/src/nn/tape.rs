//! Tape-based reverse-mode differentiation over flat `f64` vectors.
//!
//! Nodes are appended in evaluation order, so a reverse sweep over the
//! node list is a valid topological order. Parameters are read in place
//! from the borrowed [`ParamSet`]; their gradients land in [`Grads`].

use super::params::{Grads, ParamId, ParamSet};
use super::sigmoid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Grouped 2-D convolution without height padding and explicit width
/// padding. Input `[in_ch, h, w]`, weight `[out_ch, in_ch / groups, kh, kw]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conv2dSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub groups: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl Conv2dSpec {
    pub fn out_h(&self) -> usize {
        self.h - self.kh + 1
    }

    pub fn out_w(&self) -> usize {
        self.w + self.pad_left + self.pad_right - self.kw + 1
    }

    pub fn out_len(&self) -> usize {
        self.out_ch * self.out_h() * self.out_w()
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_ch, self.in_ch / self.groups, self.kh, self.kw]
    }

    /// `same` width padding for kernel width `kw`.
    pub fn same(kw: usize) -> (usize, usize) {
        let left = (kw - 1) / 2;
        (left, kw - 1 - left)
    }
}

enum Op {
    Input,
    Row { param: ParamId, row: usize },
    Linear { w: ParamId, b: Option<ParamId>, x: Var },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Sum(Vec<Var>),
    Mean(Var),
    SoftmaxXent { logits: Var, target: usize, probs: Vec<f64> },
    BceLogits { logits: Var, targets: Vec<f64> },
    SquaredError { x: Var, targets: Vec<f64> },
    Conv2d { x: Var, w: ParamId, b: Option<ParamId>, spec: Conv2dSpec },
    ChannelAffine { x: Var, scale: Vec<f64>, gamma: ParamId, beta: ParamId, mean: ParamId, per_channel: usize },
    AvgPoolW { x: Var, channels: usize, w: usize, k: usize },
    OneHotConv1d { chars: Vec<Option<usize>>, w: ParamId, b: ParamId, filters: usize, alphabet: usize, k: usize },
    MaxOverTime { x: Var, argmax: Vec<usize> },
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Input)
    }

    /// Row `row` of a `[rows, cols]` parameter (embedding lookup).
    pub fn row(&mut self, param: ParamId, row: usize) -> Var {
        let t = self.params.get(param);
        let cols = t.shape[1];
        let value = t.data[row * cols..(row + 1) * cols].to_vec();
        self.push(value, Op::Row { param, row })
    }

    /// `W x + b` with `W` of shape `[out, in]`.
    pub fn linear(&mut self, w: ParamId, b: Option<ParamId>, x: Var) -> Var {
        let wt = self.params.get(w);
        let (out, inp) = (wt.shape[0], wt.shape[1]);
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.len(), inp, "linear {}: input width", wt.name);
        let mut y = match b {
            Some(b) => self.params.data(b).to_vec(),
            None => vec![0.0; out],
        };
        for (o, yo) in y.iter_mut().enumerate() {
            *yo += dot(&wt.data[o * inp..(o + 1) * inp], xv);
        }
        self.push(y, Op::Linear { w, b, x })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = zip_map(self.value(a), self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = zip_map(self.value(a), self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a).iter().map(|x| x * k).collect();
        self.push(v, Op::Scale(a, k))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|x| x.max(0.0)).collect();
        self.push(v, Op::Relu(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut v = Vec::new();
        for p in parts {
            v.extend_from_slice(self.value(*p));
        }
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let v = self.value(x)[start..start + len].to_vec();
        self.push(v, Op::Slice { x, start })
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let total = parts.iter().map(|p| self.scalar(*p)).sum();
        self.push(vec![total], Op::Sum(parts.to_vec()))
    }

    /// Mean over the elements of `x`, as a scalar.
    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        self.push(vec![m], Op::Mean(x))
    }

    /// `-ln softmax(logits)[target]`.
    pub fn softmax_xent(&mut self, logits: Var, target: usize) -> Var {
        let z = self.value(logits);
        let probs = softmax(z);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - z[target];
        self.push(vec![loss], Op::SoftmaxXent { logits, target, probs })
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against `targets`.
    pub fn bce_logits(&mut self, logits: Var, targets: &[f64]) -> Var {
        let z = self.value(logits);
        assert_eq!(z.len(), targets.len());
        let loss = z
            .iter()
            .zip(targets)
            .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .sum::<f64>()
            / z.len() as f64;
        self.push(vec![loss], Op::BceLogits { logits, targets: targets.to_vec() })
    }

    /// `0.5 · Σ (x - y)²`.
    pub fn squared_error(&mut self, x: Var, targets: &[f64]) -> Var {
        let loss = 0.5
            * self
                .value(x)
                .iter()
                .zip(targets)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        self.push(vec![loss], Op::SquaredError { x, targets: targets.to_vec() })
    }

    pub fn conv2d(&mut self, x: Var, w: ParamId, b: Option<ParamId>, spec: Conv2dSpec) -> Var {
        assert_eq!(self.value(x).len(), spec.in_ch * spec.h * spec.w, "conv2d input");
        assert_eq!(self.params.get(w).shape, spec.weight_shape(), "conv2d weight");
        let mut y = vec![0.0; spec.out_len()];
        conv2d_forward(self.value(x), self.params.data(w), &spec, &mut y);
        if let Some(b) = b {
            let plane = spec.out_h() * spec.out_w();
            for (o, bias) in self.params.data(b).iter().enumerate() {
                for v in &mut y[o * plane..(o + 1) * plane] {
                    *v += bias;
                }
            }
        }
        self.push(y, Op::Conv2d { x, w, b, spec })
    }

    /// Batch normalization in inference form: per-channel
    /// `gamma · (x - mean) / sqrt(var + eps) + beta` with stored statistics.
    #[allow(clippy::too_many_arguments)]
    pub fn channel_affine(
        &mut self,
        x: Var,
        channels: usize,
        gamma: ParamId,
        beta: ParamId,
        mean: ParamId,
        var: ParamId,
        eps: f64,
    ) -> Var {
        let xv = self.value(x);
        let per_channel = xv.len() / channels;
        let (g, bt) = (self.params.data(gamma), self.params.data(beta));
        let (mu, vr) = (self.params.data(mean), self.params.data(var));
        let scale: Vec<f64> = vr.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut y = vec![0.0; xv.len()];
        for c in 0..channels {
            for i in c * per_channel..(c + 1) * per_channel {
                y[i] = g[c] * (xv[i] - mu[c]) * scale[c] + bt[c];
            }
        }
        self.push(y, Op::ChannelAffine { x, scale, gamma, beta, mean, per_channel })
    }

    /// Average pooling along the last axis of `[channels, w]` with window
    /// and stride `k`; a trailing partial window is dropped.
    pub fn avg_pool_w(&mut self, x: Var, channels: usize, k: usize) -> Var {
        let xv = self.value(x);
        let w = xv.len() / channels;
        let ow = w / k;
        let mut y = vec![0.0; channels * ow];
        for c in 0..channels {
            for o in 0..ow {
                let s: f64 = xv[c * w + o * k..c * w + o * k + k].iter().sum();
                y[c * ow + o] = s / k as f64;
            }
        }
        self.push(y, Op::AvgPoolW { x, channels, w, k })
    }

    /// 1-D convolution over a one-hot character sequence; `None` encodes
    /// an all-zero column. Weight `[filters, alphabet, k]`, output
    /// `[filters, len - k + 1]`.
    pub fn one_hot_conv1d(&mut self, chars: &[Option<usize>], w: ParamId, b: ParamId) -> Var {
        let wt = self.params.get(w);
        let (filters, alphabet, k) = (wt.shape[0], wt.shape[1], wt.shape[2]);
        assert!(chars.len() >= k, "sequence shorter than kernel");
        let out_w = chars.len() - k + 1;
        let bias = self.params.data(b);
        let mut y = vec![0.0; filters * out_w];
        for f in 0..filters {
            let wf = &wt.data[f * alphabet * k..(f + 1) * alphabet * k];
            for p in 0..out_w {
                let mut s = bias[f];
                for j in 0..k {
                    if let Some(c) = chars[p + j] {
                        s += wf[c * k + j];
                    }
                }
                y[f * out_w + p] = s;
            }
        }
        self.push(
            y,
            Op::OneHotConv1d { chars: chars.to_vec(), w, b, filters, alphabet, k },
        )
    }

    /// Max over the last axis of `[channels, t]`; ties pick the first.
    pub fn max_over_time(&mut self, x: Var, channels: usize) -> Var {
        let xv = self.value(x);
        let t = xv.len() / channels;
        let mut argmax = Vec::with_capacity(channels);
        let mut y = Vec::with_capacity(channels);
        for c in 0..channels {
            let row = &xv[c * t..(c + 1) * t];
            let (mut best, mut bi) = (row[0], 0);
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > best {
                    best = v;
                    bi = i;
                }
            }
            argmax.push(c * t + bi);
            y.push(best);
        }
        self.push(y, Op::MaxOverTime { x, argmax })
    }

    /// Back-propagates from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Grads {
        let mut pgrads = self.params.zero_grads();
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
                let len = self.nodes[v.0].value.len();
                let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
                f(slot);
            };
            match &node.op {
                Op::Input => {}
                Op::Row { param, row } => {
                    let cols = g.len();
                    let dst = &mut pgrads.slot(*param)[row * cols..(row + 1) * cols];
                    add_into(dst, &g);
                }
                Op::Linear { w, b, x } => {
                    let wt = self.params.get(*w);
                    let inp = wt.shape[1];
                    let xv = &self.nodes[x.0].value;
                    let dw = pgrads.slot(*w);
                    for (o, go) in g.iter().enumerate() {
                        if *go != 0.0 {
                            axpy(&mut dw[o * inp..(o + 1) * inp], *go, xv);
                        }
                    }
                    if let Some(b) = b {
                        add_into(pgrads.slot(*b), &g);
                    }
                    acc(*x, &mut |dx| {
                        for (o, go) in g.iter().enumerate() {
                            if *go != 0.0 {
                                axpy(dx, *go, &wt.data[o * inp..(o + 1) * inp]);
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    acc(*a, &mut |d| add_into(d, &g));
                    acc(*b, &mut |d| add_into(d, &g));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    acc(*a, &mut |d| {
                        for i in 0..d.len() {
                            d[i] += g[i] * bv[i];
                        }
                    });
                    acc(*b, &mut |d| {
                        for i in 0..d.len() {
                            d[i] += g[i] * av[i];
                        }
                    });
                }
                Op::Scale(a, k) => acc(*a, &mut |d| axpy(d, *k, &g)),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    acc(*a, &mut |d| {
                        for i in 0..d.len() {
                            d[i] += g[i] * y[i] * (1.0 - y[i]);
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    acc(*a, &mut |d| {
                        for i in 0..d.len() {
                            d[i] += g[i] * (1.0 - y[i] * y[i]);
                        }
                    });
                }
                Op::Relu(a) => {
                    let xv = &self.nodes[a.0].value;
                    acc(*a, &mut |d| {
                        for i in 0..d.len() {
                            if xv[i] > 0.0 {
                                d[i] += g[i];
                            }
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        acc(*p, &mut |d| add_into(d, &g[off..off + len]));
                        off += len;
                    }
                }
                Op::Slice { x, start } => {
                    let start = *start;
                    acc(*x, &mut |d| add_into(&mut d[start..start + g.len()], &g));
                }
                Op::Sum(parts) => {
                    for p in parts {
                        acc(*p, &mut |d| d[0] += g[0]);
                    }
                }
                Op::Mean(x) => {
                    let len = self.nodes[x.0].value.len();
                    let k = g[0] / len as f64;
                    acc(*x, &mut |d| d.iter_mut().for_each(|v| *v += k));
                }
                Op::SoftmaxXent { logits, target, probs } => {
                    acc(*logits, &mut |d| {
                        for i in 0..d.len() {
                            let y = if i == *target { 1.0 } else { 0.0 };
                            d[i] += g[0] * (probs[i] - y);
                        }
                    });
                }
                Op::BceLogits { logits, targets } => {
                    let z = &self.nodes[logits.0].value;
                    let n = z.len() as f64;
                    acc(*logits, &mut |d| {
                        for i in 0..d.len() {
                            d[i] += g[0] * (sigmoid(z[i]) - targets[i]) / n;
                        }
                    });
                }
                Op::SquaredError { x, targets } => {
                    let xv = &self.nodes[x.0].value;
                    acc(*x, &mut |d| {
                        for i in 0..d.len() {
                            d[i] += g[0] * (xv[i] - targets[i]);
                        }
                    });
                }
                Op::Conv2d { x, w, b, spec } => {
                    let xv = &self.nodes[x.0].value;
                    let wv = self.params.data(*w);
                    conv2d_backward_weight(xv, &g, spec, pgrads.slot(*w));
                    if let Some(b) = b {
                        let plane = spec.out_h() * spec.out_w();
                        let db = pgrads.slot(*b);
                        for (o, d) in db.iter_mut().enumerate() {
                            *d += g[o * plane..(o + 1) * plane].iter().sum::<f64>();
                        }
                    }
                    acc(*x, &mut |dx| conv2d_backward_input(wv, &g, spec, dx));
                }
                Op::ChannelAffine { x, scale, gamma, beta, mean, per_channel } => {
                    let xv = &self.nodes[x.0].value;
                    let gm = self.params.data(*gamma);
                    let mu = self.params.data(*mean);
                    let n = *per_channel;
                    {
                        let dg = pgrads.slot(*gamma);
                        for c in 0..scale.len() {
                            let s: f64 = (c * n..(c + 1) * n)
                                .map(|i| g[i] * (xv[i] - mu[c]) * scale[c])
                                .sum();
                            dg[c] += s;
                        }
                    }
                    {
                        let db = pgrads.slot(*beta);
                        for c in 0..scale.len() {
                            db[c] += g[c * n..(c + 1) * n].iter().sum::<f64>();
                        }
                    }
                    acc(*x, &mut |d| {
                        for c in 0..scale.len() {
                            let k = gm[c] * scale[c];
                            for i in c * n..(c + 1) * n {
                                d[i] += g[i] * k;
                            }
                        }
                    });
                }
                Op::AvgPoolW { x, channels, w, k } => {
                    let ow = w / k;
                    acc(*x, &mut |d| {
                        for c in 0..*channels {
                            for o in 0..ow {
                                let v = g[c * ow + o] / *k as f64;
                                for i in 0..*k {
                                    d[c * w + o * k + i] += v;
                                }
                            }
                        }
                    });
                }
                Op::OneHotConv1d { chars, w, b, filters, alphabet, k } => {
                    let out_w = chars.len() - k + 1;
                    {
                        let dw = pgrads.slot(*w);
                        for f in 0..*filters {
                            for p in 0..out_w {
                                let gv = g[f * out_w + p];
                                if gv == 0.0 {
                                    continue;
                                }
                                for j in 0..*k {
                                    if let Some(c) = chars[p + j] {
                                        dw[f * alphabet * k + c * k + j] += gv;
                                    }
                                }
                            }
                        }
                    }
                    let db = pgrads.slot(*b);
                    for f in 0..*filters {
                        db[f] += g[f * out_w..(f + 1) * out_w].iter().sum::<f64>();
                    }
                }
                Op::MaxOverTime { x, argmax } => {
                    acc(*x, &mut |d| {
                        for (c, &i) in argmax.iter().enumerate() {
                            d[i] += g[c];
                        }
                    });
                }
            }
        }
        pgrads
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            s[l] += a[4 * i + l] * b[4 * i + l];
        }
    }
    let mut total = (s[0] + s[1]) + (s[2] + s[3]);
    for i in chunks * 4..a.len() {
        total += a[i] * b[i];
    }
    total
}

fn axpy(dst: &mut [f64], k: f64, x: &[f64]) {
    for (d, v) in dst.iter_mut().zip(x) {
        *d += k * v;
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "elementwise op on mismatched lengths");
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Valid input column range `[lo, hi)` of kernel tap `j` over all output
/// columns, expressed as output-column bounds.
fn tap_range(spec: &Conv2dSpec, j: usize) -> (usize, usize) {
    // input column = ow + j - pad_left must lie in [0, w)
    let lo = spec.pad_left.saturating_sub(j);
    let hi = (spec.w + spec.pad_left).saturating_sub(j).min(spec.out_w());
    (lo, hi.max(lo))
}

fn conv2d_forward(x: &[f64], w: &[f64], spec: &Conv2dSpec, y: &mut [f64]) {
    let (oh, ow) = (spec.out_h(), spec.out_w());
    let cin_g = spec.in_ch / spec.groups;
    let cout_g = spec.out_ch / spec.groups;
    for o in 0..spec.out_ch {
        let group = o / cout_g;
        for ci in 0..cin_g {
            let c = group * cin_g + ci;
            for r in 0..oh {
                let out_row = &mut y[(o * oh + r) * ow..(o * oh + r + 1) * ow];
                for a in 0..spec.kh {
                    let in_row = &x[(c * spec.h + r + a) * spec.w..(c * spec.h + r + a + 1) * spec.w];
                    let wbase = ((o * cin_g + ci) * spec.kh + a) * spec.kw;
                    for j in 0..spec.kw {
                        let wv = w[wbase + j];
                        let (lo, hi) = tap_range(spec, j);
                        let shift = j as isize - spec.pad_left as isize;
                        let src = &in_row[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                        axpy(&mut out_row[lo..hi], wv, src);
                    }
                }
            }
        }
    }
}

fn conv2d_backward_weight(x: &[f64], g: &[f64], spec: &Conv2dSpec, dw: &mut [f64]) {
    let (oh, ow) = (spec.out_h(), spec.out_w());
    let cin_g = spec.in_ch / spec.groups;
    let cout_g = spec.out_ch / spec.groups;
    for o in 0..spec.out_ch {
        let group = o / cout_g;
        for ci in 0..cin_g {
            let c = group * cin_g + ci;
            for r in 0..oh {
                let g_row = &g[(o * oh + r) * ow..(o * oh + r + 1) * ow];
                for a in 0..spec.kh {
                    let in_row = &x[(c * spec.h + r + a) * spec.w..(c * spec.h + r + a + 1) * spec.w];
                    let wbase = ((o * cin_g + ci) * spec.kh + a) * spec.kw;
                    for j in 0..spec.kw {
                        let (lo, hi) = tap_range(spec, j);
                        let shift = j as isize - spec.pad_left as isize;
                        let src = &in_row[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                        dw[wbase + j] += dot(&g_row[lo..hi], src);
                    }
                }
            }
        }
    }
}

fn conv2d_backward_input(w: &[f64], g: &[f64], spec: &Conv2dSpec, dx: &mut [f64]) {
    let (oh, ow) = (spec.out_h(), spec.out_w());
    let cin_g = spec.in_ch / spec.groups;
    let cout_g = spec.out_ch / spec.groups;
    for o in 0..spec.out_ch {
        let group = o / cout_g;
        for ci in 0..cin_g {
            let c = group * cin_g + ci;
            for r in 0..oh {
                let g_row = &g[(o * oh + r) * ow..(o * oh + r + 1) * ow];
                for a in 0..spec.kh {
                    let base = (c * spec.h + r + a) * spec.w;
                    let wbase = ((o * cin_g + ci) * spec.kh + a) * spec.kw;
                    for j in 0..spec.kw {
                        let wv = w[wbase + j];
                        let (lo, hi) = tap_range(spec, j);
                        let shift = j as isize - spec.pad_left as isize;
                        let dst = &mut dx[base + (lo as isize + shift) as usize..base + (hi as isize + shift) as usize];
                        axpy(dst, wv, &g_row[lo..hi]);
                    }
                }
            }
        }
    }
}
