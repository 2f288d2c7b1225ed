//! Multichannel 1-D convolutional text classifier with hand-written
//! forward and backward passes.
//!
//! Each channel owns an embedding table and a bank of convolution filters
//! whose width equals the channel's kernel size:
//!
//! ```text
//! ids -> embed (L x E) -> conv width k, F filters, ReLU ((L-k+1) x F)
//!     -> max pool 2/2 (floor((L-k+1)/2) x F) -> flatten
//! concat(channels) -> dense H, ReLU -> 1 unit, logistic
//! ```
//!
//! Everything runs in `f64`; the loss is mean binary cross-entropy with Fake
//! as the positive class, optimized by Adam.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::preprocess::PreprocessedDoc;

pub const DEFAULT_WORD_MAX_LEN: usize = 2000;
pub const DEFAULT_CHAR_MAX_LEN: usize = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceUnit {
    Word,
    Char,
}

impl std::str::FromStr for SequenceUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(SequenceUnit::Word),
            "char" => Ok(SequenceUnit::Char),
            other => Err(Error::Config(format!("unknown sequence unit `{other}` (word|char)"))),
        }
    }
}

fn units(doc: &PreprocessedDoc, unit: SequenceUnit) -> Vec<String> {
    match unit {
        SequenceUnit::Word => doc.tokens.clone(),
        SequenceUnit::Char => doc.char_stream.chars().map(String::from).collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EncoderRepr {
    unit: SequenceUnit,
    vocab: Vec<String>,
    max_len: usize,
}

/// Maps words or characters to ids `1..=|vocab|`; 0 is padding and unknown.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "EncoderRepr", from = "EncoderRepr")]
pub struct SequenceEncoder {
    unit: SequenceUnit,
    vocab: Vec<String>,
    max_len: usize,
    index: HashMap<String, u32>,
}

impl PartialEq for SequenceEncoder {
    fn eq(&self, other: &Self) -> bool {
        self.unit == other.unit && self.vocab == other.vocab && self.max_len == other.max_len
    }
}

impl From<SequenceEncoder> for EncoderRepr {
    fn from(e: SequenceEncoder) -> Self {
        EncoderRepr {
            unit: e.unit,
            vocab: e.vocab,
            max_len: e.max_len,
        }
    }
}

impl From<EncoderRepr> for SequenceEncoder {
    fn from(r: EncoderRepr) -> Self {
        let index = r
            .vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + 1))
            .collect();
        SequenceEncoder {
            unit: r.unit,
            vocab: r.vocab,
            max_len: r.max_len,
            index,
        }
    }
}

impl SequenceEncoder {
    /// Fits on training documents only. Ids follow lexicographic order.
    /// Without an explicit `max_len` the longest training document is used,
    /// capped at 2000 words or 8000 characters.
    pub fn fit(docs: &[PreprocessedDoc], unit: SequenceUnit, max_len: Option<usize>) -> Self {
        let mut vocab = BTreeSet::new();
        let mut longest = 0;
        for d in docs {
            let u = units(d, unit);
            longest = longest.max(u.len());
            vocab.extend(u);
        }
        let cap = match unit {
            SequenceUnit::Word => DEFAULT_WORD_MAX_LEN,
            SequenceUnit::Char => DEFAULT_CHAR_MAX_LEN,
        };
        let max_len = max_len.unwrap_or_else(|| longest.min(cap)).max(1);
        EncoderRepr {
            unit,
            vocab: vocab.into_iter().collect(),
            max_len,
        }
        .into()
    }

    pub fn unit(&self) -> SequenceUnit {
        self.unit
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Number of ids including the padding id.
    pub fn id_space(&self) -> usize {
        self.vocab.len() + 1
    }

    pub fn encode_doc(&self, doc: &PreprocessedDoc) -> Vec<u32> {
        let mut ids: Vec<u32> = units(doc, self.unit)
            .iter()
            .take(self.max_len)
            .map(|u| self.index.get(u).copied().unwrap_or(0))
            .collect();
        ids.resize(self.max_len, 0);
        ids
    }

    pub fn encode(&self, docs: &[PreprocessedDoc]) -> IdMatrix {
        let rows: Vec<Vec<u32>> = docs.par_iter().map(|d| self.encode_doc(d)).collect();
        IdMatrix {
            width: self.max_len,
            ids: rows.concat(),
        }
    }
}

/// Row-major `n x width` matrix of token ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMatrix {
    pub width: usize,
    pub ids: Vec<u32>,
}

impl IdMatrix {
    pub fn from_rows(width: usize, rows: &[Vec<u32>]) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: r.len(),
            });
        }
        Ok(IdMatrix {
            width,
            ids: rows.concat(),
        })
    }

    pub fn n_rows(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.ids.len() / self.width
        }
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.ids[i * self.width..(i + 1) * self.width]
    }

    pub fn select(&self, rows: &[usize]) -> IdMatrix {
        IdMatrix {
            width: self.width,
            ids: rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArch {
    /// Embedding rows, padding id included.
    pub vocab_size: usize,
    pub max_len: usize,
    pub kernel_sizes: Vec<usize>,
    pub embed_dim: usize,
    pub filters: usize,
    pub hidden: usize,
    pub pool: usize,
}

impl CnnArch {
    /// 100-d embeddings, 32 filters per channel, pool 2, 10 hidden units.
    pub fn new(vocab_size: usize, max_len: usize, kernel_sizes: impl IntoIterator<Item = usize>) -> Self {
        CnnArch {
            vocab_size,
            max_len,
            kernel_sizes: kernel_sizes.into_iter().collect(),
            embed_dim: 100,
            filters: 32,
            hidden: 10,
            pool: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_sizes.is_empty() {
            return Err(Error::Config("CNN needs at least one channel".into()));
        }
        if self.kernel_sizes.contains(&0) {
            return Err(Error::Config("kernel sizes must be positive".into()));
        }
        let widest = *self.kernel_sizes.iter().max().expect("non-empty");
        if self.max_len < widest {
            return Err(Error::Config(format!(
                "sequence length {} is shorter than the widest kernel ({widest})",
                self.max_len
            )));
        }
        if self.vocab_size == 0 || self.embed_dim == 0 || self.filters == 0 || self.hidden == 0 || self.pool == 0 {
            return Err(Error::Config("CNN dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn conv_len(&self, k: usize) -> usize {
        self.max_len + 1 - k
    }

    pub fn pooled_len(&self, k: usize) -> usize {
        self.conv_len(k) / self.pool
    }

    /// Length of the concatenated flattened channel outputs.
    pub fn flat_len(&self) -> usize {
        self.kernel_sizes.iter().map(|&k| self.filters * self.pooled_len(k)).sum()
    }
}

/// Named flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub data: Vec<f64>,
}

impl Tensor {
    fn zeros(name: String, len: usize) -> Self {
        Tensor {
            name,
            data: vec![0.0; len],
        }
    }

    fn uniform(name: String, len: usize, limit: f64, rng: &mut ChaCha8Rng) -> Self {
        Tensor {
            name,
            data: (0..len).map(|_| rng.gen_range(-limit..limit)).collect(),
        }
    }
}

/// Parameters are stored as a flat list of tensors: per channel
/// `[embedding, conv_w, conv_b]`, then `dense_w, dense_b, out_w, out_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub arch: CnnArch,
    pub params: Vec<Tensor>,
}

fn emb_ix(c: usize) -> usize {
    3 * c
}
fn conv_w_ix(c: usize) -> usize {
    3 * c + 1
}
fn conv_b_ix(c: usize) -> usize {
    3 * c + 2
}

pub fn init_cnn(arch: CnnArch, seed: u64) -> Result<CnnModel> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (e, f, h) = (arch.embed_dim, arch.filters, arch.hidden);
    let mut params = Vec::new();
    for &k in &arch.kernel_sizes {
        params.push(Tensor::uniform(format!("ch{k}.embedding"), arch.vocab_size * e, 0.05, &mut rng));
        let limit = (6.0 / (k * e + k * f) as f64).sqrt();
        params.push(Tensor::uniform(format!("ch{k}.conv_w"), f * k * e, limit, &mut rng));
        params.push(Tensor::zeros(format!("ch{k}.conv_b"), f));
    }
    let d = arch.flat_len();
    let limit = (6.0 / (d + h) as f64).sqrt();
    params.push(Tensor::uniform("dense_w".into(), h * d, limit, &mut rng));
    params.push(Tensor::zeros("dense_b".into(), h));
    let limit = (6.0 / (h + 1) as f64).sqrt();
    params.push(Tensor::uniform("out_w".into(), h, limit, &mut rng));
    params.push(Tensor::zeros("out_b".into(), 1));
    Ok(CnnModel { arch, params })
}

struct ChannelTrace {
    /// Embedded (and possibly dropped-out) input, L x E.
    x: Vec<f64>,
    /// Dropout scale per element of `x`, if dropout was applied.
    mask: Option<Vec<f64>>,
    /// Conv pre-activations, T x F.
    z: Vec<f64>,
    /// Winning conv position per pooled cell, P x F.
    argmax: Vec<u32>,
}

struct Trace {
    channels: Vec<ChannelTrace>,
    flat: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    logit: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy computed from the logit.
fn bce_with_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

fn target_of(label: Label) -> f64 {
    match label {
        Label::Fake => 1.0,
        Label::Real => 0.0,
    }
}

impl CnnModel {
    pub fn n_params(&self) -> usize {
        self.params.iter().map(|t| t.data.len()).sum()
    }

    fn dense_w_ix(&self) -> usize {
        3 * self.arch.kernel_sizes.len()
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        if ids.len() != self.arch.max_len {
            return Err(Error::DimensionMismatch {
                expected: self.arch.max_len,
                actual: ids.len(),
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= self.arch.vocab_size) {
            return Err(Error::InvalidInput(format!(
                "token id {bad} outside embedding table of {} rows",
                self.arch.vocab_size
            )));
        }
        Ok(())
    }

    fn forward_one(&self, ids: &[u32], dropout: Option<(&mut ChaCha8Rng, f64)>) -> Trace {
        let a = &self.arch;
        let (e, f) = (a.embed_dim, a.filters);
        let mut flat = Vec::with_capacity(a.flat_len());
        let mut channels = Vec::with_capacity(a.kernel_sizes.len());
        let mut dropout = dropout;
        for (c, &k) in a.kernel_sizes.iter().enumerate() {
            let emb = &self.params[emb_ix(c)].data;
            let w = &self.params[conv_w_ix(c)].data;
            let b = &self.params[conv_b_ix(c)].data;
            let mut x = Vec::with_capacity(a.max_len * e);
            for &id in ids {
                let r = id as usize * e;
                x.extend_from_slice(&emb[r..r + e]);
            }
            let mask = match dropout.as_mut() {
                Some((rng, rate)) if *rate > 0.0 => {
                    let keep = 1.0 / (1.0 - *rate);
                    let m: Vec<f64> = (0..x.len())
                        .map(|_| if rng.gen::<f64>() < *rate { 0.0 } else { keep })
                        .collect();
                    for (xi, mi) in x.iter_mut().zip(&m) {
                        *xi *= mi;
                    }
                    Some(m)
                }
                _ => None,
            };
            let t_len = a.conv_len(k);
            let span = k * e;
            let mut z = vec![0.0; t_len * f];
            for t in 0..t_len {
                let window = &x[t * e..t * e + span];
                for fi in 0..f {
                    let wf = &w[fi * span..(fi + 1) * span];
                    z[t * f + fi] = b[fi] + wf.iter().zip(window).map(|(p, q)| p * q).sum::<f64>();
                }
            }
            let p_len = a.pooled_len(k);
            let mut argmax = vec![0u32; p_len * f];
            for p in 0..p_len {
                for fi in 0..f {
                    let mut best_t = p * a.pool;
                    let mut best = z[best_t * f + fi].max(0.0);
                    for t in p * a.pool + 1..(p + 1) * a.pool {
                        let v = z[t * f + fi].max(0.0);
                        if v > best {
                            best = v;
                            best_t = t;
                        }
                    }
                    argmax[p * f + fi] = best_t as u32;
                    flat.push(best);
                }
            }
            channels.push(ChannelTrace { x, mask, z, argmax });
        }

        let d = flat.len();
        let h = a.hidden;
        let dw = &self.params[self.dense_w_ix()].data;
        let db = &self.params[self.dense_w_ix() + 1].data;
        let ow = &self.params[self.dense_w_ix() + 2].data;
        let ob = self.params[self.dense_w_ix() + 3].data[0];
        let hidden_pre: Vec<f64> = (0..h)
            .map(|j| db[j] + dw[j * d..(j + 1) * d].iter().zip(&flat).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        let hidden: Vec<f64> = hidden_pre.iter().map(|&v| v.max(0.0)).collect();
        let logit = ob + ow.iter().zip(&hidden).map(|(p, q)| p * q).sum::<f64>();
        Trace {
            channels,
            flat,
            hidden_pre,
            hidden,
            logit,
        }
    }

    /// Accumulates `dlogit * d(logit)/d(theta)` into `grads`.
    fn backward_one(&self, ids: &[u32], tr: &Trace, dlogit: f64, grads: &mut [Tensor]) {
        let a = &self.arch;
        let (e, f, h) = (a.embed_dim, a.filters, a.hidden);
        let d = tr.flat.len();
        let base = self.dense_w_ix();
        let ow = &self.params[base + 2].data;
        let dw = &self.params[base].data;

        grads[base + 3].data[0] += dlogit;
        let mut dhidden = vec![0.0; h];
        for j in 0..h {
            grads[base + 2].data[j] += dlogit * tr.hidden[j];
            dhidden[j] = if tr.hidden_pre[j] > 0.0 { dlogit * ow[j] } else { 0.0 };
        }
        let mut dflat = vec![0.0; d];
        for j in 0..h {
            let g = dhidden[j];
            if g == 0.0 {
                continue;
            }
            grads[base + 1].data[j] += g;
            let gw = &mut grads[base].data[j * d..(j + 1) * d];
            for (gi, xi) in gw.iter_mut().zip(&tr.flat) {
                *gi += g * xi;
            }
            for (df, wi) in dflat.iter_mut().zip(&dw[j * d..(j + 1) * d]) {
                *df += g * wi;
            }
        }

        let mut offset = 0;
        for (c, &k) in a.kernel_sizes.iter().enumerate() {
            let ct = &tr.channels[c];
            let span = k * e;
            let t_len = a.conv_len(k);
            let p_len = a.pooled_len(k);
            let mut dz = vec![0.0; t_len * f];
            for p in 0..p_len {
                for fi in 0..f {
                    let t = ct.argmax[p * f + fi] as usize;
                    if ct.z[t * f + fi] > 0.0 {
                        dz[t * f + fi] += dflat[offset + p * f + fi];
                    }
                }
            }
            offset += p_len * f;

            let w = &self.params[conv_w_ix(c)].data;
            let mut dx = vec![0.0; a.max_len * e];
            {
                let (head, tail) = grads.split_at_mut(conv_w_ix(c) + 1);
                let gw = &mut head[conv_w_ix(c)].data;
                let gb = &mut tail[0].data;
                for t in 0..t_len {
                    let window = &ct.x[t * e..t * e + span];
                    for fi in 0..f {
                        let g = dz[t * f + fi];
                        if g == 0.0 {
                            continue;
                        }
                        gb[fi] += g;
                        let wf = &w[fi * span..(fi + 1) * span];
                        for (gwi, xi) in gw[fi * span..(fi + 1) * span].iter_mut().zip(window) {
                            *gwi += g * xi;
                        }
                        for (dxi, wi) in dx[t * e..t * e + span].iter_mut().zip(wf) {
                            *dxi += g * wi;
                        }
                    }
                }
            }
            if let Some(mask) = &ct.mask {
                for (dxi, mi) in dx.iter_mut().zip(mask) {
                    *dxi *= mi;
                }
            }
            let ge = &mut grads[emb_ix(c)].data;
            for (pos, &id) in ids.iter().enumerate() {
                let r = id as usize * e;
                for (gi, dxi) in ge[r..r + e].iter_mut().zip(&dx[pos * e..(pos + 1) * e]) {
                    *gi += dxi;
                }
            }
        }
    }

    fn zero_grads(&self) -> Vec<Tensor> {
        self.params
            .iter()
            .map(|t| Tensor::zeros(t.name.clone(), t.data.len()))
            .collect()
    }

    /// Mean loss and its analytic gradient over a batch.
    pub fn loss_and_grad(&self, x: &IdMatrix, y: &[Label]) -> Result<(f64, Vec<Tensor>)> {
        self.check_batch(x, y)?;
        let n = y.len();
        let mut grads = self.zero_grads();
        let mut loss = 0.0;
        for i in 0..n {
            let tr = self.forward_one(x.row(i), None);
            let target = target_of(y[i]);
            loss += bce_with_logit(tr.logit, target);
            self.backward_one(x.row(i), &tr, (sigmoid(tr.logit) - target) / n as f64, &mut grads);
        }
        Ok((loss / n as f64, grads))
    }

    pub fn loss(&self, x: &IdMatrix, y: &[Label]) -> Result<f64> {
        self.check_batch(x, y)?;
        let total: f64 = (0..y.len())
            .map(|i| bce_with_logit(self.forward_one(x.row(i), None).logit, target_of(y[i])))
            .sum();
        Ok(total / y.len() as f64)
    }

    fn check_batch(&self, x: &IdMatrix, y: &[Label]) -> Result<()> {
        if x.width != self.arch.max_len {
            return Err(Error::DimensionMismatch {
                expected: self.arch.max_len,
                actual: x.width,
            });
        }
        if x.n_rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.n_rows(),
                actual: y.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        for i in 0..x.n_rows() {
            self.check_ids(x.row(i))?;
        }
        Ok(())
    }
}

/// Probability of Fake for every row.
pub fn forward(model: &CnnModel, batch: &IdMatrix) -> Result<Vec<f64>> {
    if batch.width != model.arch.max_len {
        return Err(Error::DimensionMismatch {
            expected: model.arch.max_len,
            actual: batch.width,
        });
    }
    for i in 0..batch.n_rows() {
        model.check_ids(batch.row(i))?;
    }
    Ok((0..batch.n_rows())
        .into_par_iter()
        .map(|i| sigmoid(model.forward_one(batch.row(i), None).logit))
        .collect())
}

pub fn predict_cnn(model: &CnnModel, batch: &IdMatrix, threshold: f64) -> Result<Vec<Label>> {
    Ok(forward(model, batch)?
        .into_iter()
        .map(|p| label_for(p, threshold))
        .collect())
}

/// Probability at or above the threshold is Fake.
pub fn label_for(probability: f64, threshold: f64) -> Label {
    if probability >= threshold {
        Label::Fake
    } else {
        Label::Real
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Dropout rate on embedded inputs during training; 0 disables it.
    pub embedding_dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 7,
            batch_size: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            embedding_dropout: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.embedding_dropout) {
            return Err(Error::Config("embedding_dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// `epoch<TAB>loss<TAB>accuracy` with a header line.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch\tloss\taccuracy")?;
        for e in &self.epochs {
            writeln!(out, "{}\t{:.6}\t{:.4}", e.epoch, e.loss, e.accuracy)?;
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    fn new(model: &CnnModel) -> Self {
        Adam {
            m: model.params.iter().map(|t| vec![0.0; t.data.len()]).collect(),
            v: model.params.iter().map(|t| vec![0.0; t.data.len()]).collect(),
            step: 0,
        }
    }

    fn update(&mut self, model: &mut CnnModel, grads: &[Tensor], cfg: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step);
        let bc2 = 1.0 - cfg.beta2.powi(self.step);
        for (ti, t) in model.params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[ti], &mut self.v[ti], &grads[ti].data);
            for i in 0..t.data.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                t.data[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Mini-batch Adam on mean binary cross-entropy. Shuffling (and dropout, if
/// enabled) draw from `cfg.seed`, so equal inputs give equal histories.
pub fn train_cnn(model: &mut CnnModel, x: &IdMatrix, y: &[Label], cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    model.check_batch(x, y)?;
    let n = y.len();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut adam = Adam::new(model);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let dropout = (cfg.embedding_dropout > 0.0).then_some((&mut dropout_rng, cfg.embedding_dropout));
                let tr = model.forward_one(x.row(i), dropout);
                let target = target_of(y[i]);
                let loss = bce_with_logit(tr.logit, target);
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite loss at epoch {epoch} on sample {i} (logit {})",
                        tr.logit
                    )));
                }
                loss_sum += loss;
                let p = sigmoid(tr.logit);
                if label_for(p, 0.5) == y[i] {
                    correct += 1;
                }
                model.backward_one(x.row(i), &tr, (p - target) * scale, &mut grads);
            }
            adam.update(model, &grads, cfg);
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
        };
        log::info!("epoch {epoch}: loss {:.5} acc {:.4}", stats.loss, stats.accuracy);
        history.epochs.push(stats);
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.groups.iter().all(|g| g.checked == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Parameters sampled per tensor; 0 checks nothing.
    pub per_group: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            per_group: 40,
            step: 1e-5,
            seed: 0,
        }
    }
}

/// Relative error `|analytic - numeric| / max(|numeric|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1e-8)
}

/// Compares analytic gradients with central differences on a sampled
/// subset of every parameter tensor.
pub fn grad_check(model: &CnnModel, x: &IdMatrix, y: &[Label], opts: &GradCheckOptions) -> Result<GradCheckReport> {
    grad_check_with(model, x, y, opts, |_| {})
}

/// As [`grad_check`], with a hook that may alter the analytic gradients
/// before comparison (used to confirm the checker catches faults).
pub fn grad_check_with(
    model: &CnnModel,
    x: &IdMatrix,
    y: &[Label],
    opts: &GradCheckOptions,
    tamper: impl Fn(&mut [Tensor]),
) -> Result<GradCheckReport> {
    let (_, mut grads) = model.loss_and_grad(x, y)?;
    tamper(&mut grads);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = model.clone();
    let e = model.arch.embed_dim;
    let used_rows: BTreeSet<usize> = x.ids.iter().map(|&i| i as usize).collect();
    let mut report = GradCheckReport::default();

    for ti in 0..model.params.len() {
        let len = model.params[ti].data.len();
        // embedding rows absent from the batch have zero gradient both ways
        let mut candidates: Vec<usize> = if ti < 3 * model.arch.kernel_sizes.len() && ti % 3 == 0 {
            used_rows.iter().flat_map(|&r| r * e..(r + 1) * e).collect()
        } else {
            (0..len).collect()
        };
        candidates.shuffle(&mut rng);
        candidates.truncate(opts.per_group);
        candidates.sort_unstable();

        let mut worst = 0.0f64;
        for &pi in &candidates {
            let orig = probe.params[ti].data[pi];
            probe.params[ti].data[pi] = orig + opts.step;
            let plus = probe.loss(x, y)?;
            probe.params[ti].data[pi] = orig - opts.step;
            let minus = probe.loss(x, y)?;
            probe.params[ti].data[pi] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            worst = worst.max(relative_error(grads[ti].data[pi], numeric));
        }
        report.groups.push(GroupCheck {
            name: model.params[ti].name.clone(),
            checked: candidates.len(),
            max_rel_error: worst,
        });
    }
    Ok(report)
}
