//! Desk-scale one-stream pre-norm transformer over the joint sequence, with
//! elimination steps fired after the scheduled layers.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::budget::{PruneEvent, PruningSchedule, SegmentCounts};
use crate::ctem::{apply_bonus, fuse_text, prune, restore_and_pad, score_segment, score_text, PruneDecision};
use crate::error::{Error, Result};
use crate::layout::{ForegroundBonus, ModelPreset, Segment, SegmentLayout, TokenBatch};
use crate::numerics::{matmul, matmul_transposed, softmax, Matrix};

pub const LAYER_NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    #[serde(default = "default_mlp_ratio")]
    pub mlp_ratio: f64,
    #[serde(default)]
    pub weight_seed: u64,
}

fn default_mlp_ratio() -> f64 {
    4.0
}

impl EncoderConfig {
    pub fn preset(preset: ModelPreset) -> Self {
        let (num_layers, embed_dim, num_heads) = match preset {
            ModelPreset::Ostrack256 | ModelPreset::Ostrack384 => (12, 768, 12),
            ModelPreset::Sutrack224 | ModelPreset::Sutrack384 => (24, 512, 8),
        };
        Self { num_layers, embed_dim, num_heads, mlp_ratio: 4.0, weight_seed: 0 }
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn hidden_dim(&self) -> usize {
        (self.mlp_ratio * self.embed_dim as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::InvalidConfig("encoder needs at least one layer".into()));
        }
        if self.num_heads == 0 || self.embed_dim == 0 || !self.embed_dim.is_multiple_of(self.num_heads) {
            return Err(Error::InvalidConfig(format!(
                "embed_dim {} must be a positive multiple of num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if !(self.mlp_ratio.is_finite() && self.mlp_ratio > 0.0) || self.hidden_dim() == 0 {
            return Err(Error::InvalidConfig(format!("bad mlp_ratio {}", self.mlp_ratio)));
        }
        Ok(())
    }
}

/// Parameters of one pre-norm block. Linear maps are stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub ln1_gamma: Vec<f64>,
    pub ln1_beta: Vec<f64>,
    pub w_qkv: Matrix,
    pub b_qkv: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
    pub ln2_gamma: Vec<f64>,
    pub ln2_beta: Vec<f64>,
    pub w_fc1: Matrix,
    pub b_fc1: Vec<f64>,
    pub w_fc2: Matrix,
    pub b_fc2: Vec<f64>,
}

impl LayerWeights {
    /// Uniform zero-mean weights scaled by `1/sqrt(fan_in)`; small biases.
    /// Each layer draws from its own ChaCha stream, so layers can be generated
    /// independently and in any order.
    pub fn seeded(config: &EncoderConfig, layer_index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.weight_seed);
        rng.set_stream(layer_index as u64);
        let d = config.embed_dim;
        let h = config.hidden_dim();
        let mut linear = |rows: usize, cols: usize| {
            let bound = 1.0 / (rows as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
            Matrix::new(rows, cols, data).expect("sized by construction")
        };
        let w_qkv = linear(d, 3 * d);
        let w_out = linear(d, d);
        let w_fc1 = linear(d, h);
        let w_fc2 = linear(h, d);
        let mut bias = |n: usize| (0..n).map(|_| rng.gen_range(-0.02..0.02)).collect::<Vec<f64>>();
        Self {
            ln1_gamma: vec![1.0; d],
            ln1_beta: vec![0.0; d],
            b_qkv: bias(3 * d),
            w_qkv,
            b_out: bias(d),
            w_out,
            ln2_gamma: vec![1.0; d],
            ln2_beta: vec![0.0; d],
            b_fc1: bias(h),
            w_fc1,
            b_fc2: bias(d),
            w_fc2,
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.w_out.rows()
    }
}

/// Somewhere to fetch layer parameters from, by 0-based layer index.
pub trait LayerSource {
    fn layer(&self, index: usize) -> Cow<'_, LayerWeights>;
}

/// All layers held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    pub layers: Vec<LayerWeights>,
}

impl EncoderWeights {
    pub fn seeded(config: &EncoderConfig) -> Self {
        Self { layers: (0..config.num_layers).map(|i| LayerWeights::seeded(config, i)).collect() }
    }
}

impl LayerSource for EncoderWeights {
    fn layer(&self, index: usize) -> Cow<'_, LayerWeights> {
        Cow::Borrowed(&self.layers[index])
    }
}

/// Generates each layer on demand; keeps memory flat for full-width presets.
#[derive(Debug, Clone)]
pub struct SeededWeights(pub EncoderConfig);

impl LayerSource for SeededWeights {
    fn layer(&self, index: usize) -> Cow<'_, LayerWeights> {
        Cow::Owned(LayerWeights::seeded(&self.0, index))
    }
}

pub fn layer_norm(x: &Matrix, gamma: &[f64], beta: &[f64]) -> Matrix {
    let d = x.cols() as f64;
    let mut out = x.clone();
    for r in 0..x.rows() {
        let row = out.row_mut(r);
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        for ((v, g), b) in row.iter_mut().zip(gamma).zip(beta) {
            *v = (*v - mean) * inv * g + b;
        }
    }
    out
}

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

/// Query, key, and value projections of `normed`, split per head.
pub struct HeadProjections {
    pub q: Vec<Matrix>,
    pub k: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

pub fn project_heads(normed: &Matrix, layer: &LayerWeights, num_heads: usize) -> Result<HeadProjections> {
    let d = layer.embed_dim();
    if normed.cols() != d {
        return Err(Error::ShapeMismatch { op: "project_heads", left: normed.shape(), right: layer.w_qkv.shape() });
    }
    let qkv = matmul(normed, &layer.w_qkv)?.add_row_vector(&layer.b_qkv)?;
    let hd = d / num_heads;
    let split =
        |offset: usize| -> Vec<Matrix> { (0..num_heads).map(|h| qkv.column_block(offset + h * hd, hd)).collect() };
    Ok(HeadProjections { q: split(0), k: split(d), v: split(2 * d) })
}

/// Multi-head attention output before the output projection.
#[derive(Debug, Clone)]
pub struct AttentionResult {
    /// Concatenated per-head context, `tokens x embed_dim`.
    pub context: Matrix,
    /// One `tokens x tokens` weight matrix per head; every row sums to one.
    pub weights: Vec<Matrix>,
}

/// `softmax(Q K^T / sqrt(head_dim)) V` for every head over the full sequence.
pub fn joint_attention(normed: &Matrix, layer: &LayerWeights, num_heads: usize) -> Result<AttentionResult> {
    if normed.rows() == 0 {
        return Err(Error::InvalidArgument("attention over an empty batch".into()));
    }
    let proj = project_heads(normed, layer, num_heads)?;
    let n = normed.rows();
    let hd = layer.embed_dim() / num_heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut context = Matrix::zeros(n, layer.embed_dim());
    let mut weights = Vec::with_capacity(num_heads);
    for h in 0..num_heads {
        let logits = matmul_transposed(&proj.q[h], &proj.k[h])?.scale(scale);
        let mut attn = logits;
        for r in 0..n {
            let row = softmax(attn.row(r));
            attn.row_mut(r).copy_from_slice(&row);
        }
        let ctx = matmul(&attn, &proj.v[h])?;
        for r in 0..n {
            context.row_mut(r)[h * hd..(h + 1) * hd].copy_from_slice(ctx.row(r));
        }
        weights.push(attn);
    }
    Ok(AttentionResult { context, weights })
}

/// One full block: `x + Attn(LN(x))`, then `x + MLP(LN(x))`.
pub fn encoder_layer(x: &Matrix, layer: &LayerWeights, num_heads: usize) -> Result<(Matrix, Vec<Matrix>)> {
    let normed = layer_norm(x, &layer.ln1_gamma, &layer.ln1_beta);
    let attn = joint_attention(&normed, layer, num_heads)?;
    let projected = matmul(&attn.context, &layer.w_out)?.add_row_vector(&layer.b_out)?;
    let x = x.add(&projected)?;
    let normed = layer_norm(&x, &layer.ln2_gamma, &layer.ln2_beta);
    let hidden = matmul(&normed, &layer.w_fc1)?.add_row_vector(&layer.b_fc1)?.map(gelu);
    let mlp = matmul(&hidden, &layer.w_fc2)?.add_row_vector(&layer.b_fc2)?;
    Ok((x.add(&mlp)?, attn.weights))
}

/// Which segments get the text-token attention summed into their scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TextTargets {
    #[serde(default)]
    pub sr: bool,
    #[serde(default)]
    pub dt: bool,
    #[serde(default)]
    pub st: bool,
}

impl TextTargets {
    pub const NONE: TextTargets = TextTargets { sr: false, dt: false, st: false };
    pub const DT_ONLY: TextTargets = TextTargets { sr: false, dt: true, st: false };

    pub fn contains(&self, segment: Segment) -> bool {
        match segment {
            Segment::Sr => self.sr,
            Segment::Dt => self.dt,
            Segment::St => self.st,
            Segment::Text => false,
        }
    }

    pub fn any(&self) -> bool {
        self.sr || self.dt || self.st
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PruneOptions {
    pub bonus: Option<ForegroundBonus>,
    pub text_targets: TextTargets,
}

/// What happened at one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    /// 1-based.
    pub layer_index: usize,
    pub tokens_processed: usize,
    pub counts: SegmentCounts,
    pub prune_events: Vec<PruneDecision>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `n_sr x embed_dim`, zero rows where tokens were pruned.
    pub restored_sr: Matrix,
    pub traces: Vec<LayerTrace>,
    pub final_batch: TokenBatch,
}

fn batch_counts(batch: &TokenBatch) -> SegmentCounts {
    SegmentCounts {
        sr: batch.count(Segment::Sr),
        st: batch.count(Segment::St),
        dt: batch.count(Segment::Dt),
        text: batch.count(Segment::Text),
    }
}

/// Runs every layer, pruning after each layer that has scheduled events.
pub fn forward(
    config: &EncoderConfig,
    weights: &dyn LayerSource,
    layout: &SegmentLayout,
    batch: &TokenBatch,
    schedule: &PruningSchedule,
    options: &PruneOptions,
) -> Result<ForwardOutput> {
    schedule.validate(config.num_layers)?;
    forward_events(config, weights, layout, batch, &schedule.events(), options)
}

/// Like [`forward`] but with an explicit event list (already in firing order).
pub fn forward_events(
    config: &EncoderConfig,
    weights: &dyn LayerSource,
    layout: &SegmentLayout,
    batch: &TokenBatch,
    events: &[PruneEvent],
    options: &PruneOptions,
) -> Result<ForwardOutput> {
    config.validate()?;
    batch.validate()?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("forward over an empty batch".into()));
    }
    if batch.features.cols() != config.embed_dim {
        return Err(Error::ShapeMismatch {
            op: "forward",
            left: (batch.len(), config.embed_dim),
            right: batch.features.shape(),
        });
    }
    for ev in events {
        if ev.segment == Segment::Text {
            return Err(Error::TextNotPrunable);
        }
        if ev.layer == 0 || ev.layer > config.num_layers {
            return Err(Error::InvalidSchedule(format!(
                "event layer {} is outside [1, {}]",
                ev.layer, config.num_layers
            )));
        }
    }
    if options.text_targets.any() && batch.count(Segment::Text) == 0 {
        return Err(Error::TextTokenMissing);
    }

    let mut current = batch.clone();
    let mut traces = Vec::with_capacity(config.num_layers);
    for layer_index in 1..=config.num_layers {
        let weights = weights.layer(layer_index - 1);
        let counts = batch_counts(&current);
        let (out, attn) = encoder_layer(&current.features, &weights, config.num_heads)?;
        current = current.with_features(out)?;

        // Score every event of this layer against the pre-prune batch; pruning
        // one segment leaves the order of the others untouched.
        let mut planned = Vec::new();
        for ev in events.iter().filter(|e| e.layer == layer_index) {
            let mut scores = score_segment(&attn, &current, layout, ev.segment)?;
            if options.text_targets.contains(ev.segment) {
                let text = score_text(&attn, &current, ev.segment)?;
                scores = fuse_text(&scores, &text.scores)?;
            }
            if let Some(bonus) = options.bonus.as_ref().filter(|b| b.is_active()) {
                if ev.segment == Segment::St {
                    scores = apply_bonus(&scores, bonus, current.original_indices(Segment::St))?;
                }
            }
            planned.push((scores, ev.keep_ratio));
        }
        let mut decisions = Vec::with_capacity(planned.len());
        for (scores, ratio) in planned {
            let (next, decision) = prune(&current, &scores, ratio, layout)?;
            current = next;
            decisions.push(decision);
        }
        traces.push(LayerTrace { layer_index, tokens_processed: counts.total(), counts, prune_events: decisions });
    }

    Ok(ForwardOutput { restored_sr: restore_and_pad(&current, layout)?, traces, final_batch: current })
}
