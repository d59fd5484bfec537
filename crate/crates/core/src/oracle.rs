//! Reference forward pass that never removes a token.
//!
//! Pruned tokens stay in the sequence but their keys get a `-inf` logit, so no
//! surviving token can attend to them. Softmax over the reduced key set is
//! algebraically the same thing, which makes this an independent check of the
//! physical-removal path in [`crate::encoder`]. Scoring and selection are
//! re-derived here from the definitions rather than calling into `ctem`.

use crate::budget::PruningSchedule;
use crate::encoder::{gelu, layer_norm, EncoderConfig, LayerSource, PruneOptions};
use crate::error::{Error, Result};
use crate::layout::{Segment, SegmentLayout, TokenBatch};
use crate::numerics::{matmul, Matrix};

pub struct MaskedOutput {
    /// Features of every token of the input batch, dead ones included.
    pub features: Matrix,
    pub alive: Vec<bool>,
    /// Alive vision + text tokens entering each layer.
    pub tokens_processed: Vec<usize>,
}

impl MaskedOutput {
    /// Rows of surviving tokens of `segment`, ascending original index.
    pub fn surviving(&self, batch: &TokenBatch, segment: Segment) -> Vec<(usize, Vec<f64>)> {
        batch
            .segment_range(segment)
            .filter(|&r| self.alive[r])
            .map(|r| (batch.original_index[r], self.features.row(r).to_vec()))
            .collect()
    }
}

fn masked_layer(
    x: &Matrix,
    alive: &[bool],
    w: &crate::encoder::LayerWeights,
    heads: usize,
) -> Result<(Matrix, Vec<Matrix>)> {
    let n = x.rows();
    let d = x.cols();
    let hd = d / heads;
    let normed = layer_norm(x, &w.ln1_gamma, &w.ln1_beta);
    let qkv = matmul(&normed, &w.w_qkv)?;
    let at = |r: usize, c: usize| qkv.get(r, c) + w.b_qkv[c];
    let scale = 1.0 / (hd as f64).sqrt();

    let mut context = Matrix::zeros(n, d);
    let mut maps = Vec::with_capacity(heads);
    for h in 0..heads {
        let mut map = Matrix::zeros(n, n);
        for i in 0..n {
            let mut logits = vec![f64::NEG_INFINITY; n];
            for (j, logit) in logits.iter_mut().enumerate() {
                if alive[j] {
                    let mut dot = 0.0;
                    for c in 0..hd {
                        dot += at(i, h * hd + c) * at(j, d + h * hd + c);
                    }
                    *logit = dot * scale;
                }
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> =
                logits.iter().map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { (l - max).exp() }).collect();
            let total: f64 = exps.iter().sum();
            for (j, e) in exps.iter().enumerate() {
                map.set(i, j, e / total);
            }
            for c in 0..hd {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += map.get(i, j) * at(j, 2 * d + h * hd + c);
                }
                context.set(i, h * hd + c, acc);
            }
        }
        maps.push(map);
    }

    let attn_out = matmul(&context, &w.w_out)?;
    let mut x1 = x.clone();
    for r in 0..n {
        for c in 0..d {
            x1.set(r, c, x.get(r, c) + attn_out.get(r, c) + w.b_out[c]);
        }
    }
    let normed = layer_norm(&x1, &w.ln2_gamma, &w.ln2_beta);
    let mut hidden = matmul(&normed, &w.w_fc1)?;
    for r in 0..n {
        for (c, v) in hidden.row_mut(r).iter_mut().enumerate() {
            *v = gelu(*v + w.b_fc1[c]);
        }
    }
    let mlp = matmul(&hidden, &w.w_fc2)?;
    let mut out = x1.clone();
    for r in 0..n {
        for c in 0..d {
            out.set(r, c, x1.get(r, c) + mlp.get(r, c) + w.b_fc2[c]);
        }
    }
    Ok((out, maps))
}

/// Head-mean of the renormalized attention of `query` over alive `cols`.
fn row_importance(maps: &[Matrix], query: usize, cols: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0; cols.len()];
    for m in maps {
        let total: f64 = cols.iter().map(|&c| m.get(query, c)).sum();
        for (a, &c) in acc.iter_mut().zip(cols) {
            *a += m.get(query, c) / total;
        }
    }
    acc.iter().map(|a| a / maps.len() as f64).collect()
}

/// Masked-retention forward for a batch fresh from `assemble_batch`.
pub fn masked_forward(
    config: &EncoderConfig,
    weights: &dyn LayerSource,
    layout: &SegmentLayout,
    batch: &TokenBatch,
    schedule: &PruningSchedule,
    options: &PruneOptions,
) -> Result<MaskedOutput> {
    schedule.validate(config.num_layers)?;
    let n = batch.len();
    let mut alive = vec![true; n];
    let mut x = batch.features.clone();
    let mut tokens_processed = Vec::new();
    let center = layout.center_index();
    let center_row = batch.position_of(Segment::St, center).ok_or(Error::CenterTokenMissing(center))?;
    let text_row = batch.segment_range(Segment::Text).next();

    for layer in 1..=config.num_layers {
        tokens_processed.push(alive.iter().filter(|&&a| a).count());
        let (out, maps) = masked_layer(&x, &alive, &weights.layer(layer - 1), config.num_heads)?;
        x = out;

        let mut kills = Vec::new();
        for ev in schedule.events().into_iter().filter(|e| e.layer == layer) {
            let cols: Vec<usize> = batch.segment_range(ev.segment).filter(|&r| alive[r]).collect();
            let mut score = row_importance(&maps, center_row, &cols);
            if options.text_targets.contains(ev.segment) {
                let t = text_row.ok_or(Error::TextTokenMissing)?;
                for (s, v) in score.iter_mut().zip(row_importance(&maps, t, &cols)) {
                    *s += v;
                }
            }
            if let (Segment::St, Some(bonus)) = (ev.segment, options.bonus.as_ref()) {
                if bonus.is_active() {
                    for (s, &r) in score.iter_mut().zip(&cols) {
                        *s += bonus.weight * bonus.values[batch.original_index[r]];
                    }
                }
            }
            let keep = ((ev.keep_ratio * cols.len() as f64) - 1e-9).ceil() as usize;
            let mut order: Vec<usize> = (0..cols.len()).collect();
            order.sort_by(|&a, &b| {
                score[b]
                    .partial_cmp(&score[a])
                    .unwrap()
                    .then(batch.original_index[cols[a]].cmp(&batch.original_index[cols[b]]))
            });
            let mut kept: Vec<usize> = Vec::with_capacity(keep);
            if ev.segment == Segment::St {
                kept.push(center_row);
            }
            for &i in &order {
                if kept.len() == keep {
                    break;
                }
                if cols[i] != center_row || ev.segment != Segment::St {
                    kept.push(cols[i]);
                }
            }
            kills.extend(cols.into_iter().filter(|c| !kept.contains(c)));
        }
        for r in kills {
            alive[r] = false;
        }
    }
    Ok(MaskedOutput { features: x, alive, tokens_processed })
}
