//! Candidate / template elimination: attention-guided importance scoring,
//! text and foreground-bonus fusion, top-k pruning, and restore-with-zero-pad.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{ForegroundBonus, Segment, SegmentLayout, TokenBatch};
use crate::numerics::{rank_order, topk_indices, Matrix};

/// Per-token importance of one segment, aligned to the current batch order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScores {
    pub segment: Segment,
    pub scores: Vec<f64>,
    pub head_count: usize,
}

/// Outcome of one elimination step, in original-index space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneDecision {
    pub segment: Segment,
    pub kept_original_indices: Vec<usize>,
    pub dropped_original_indices: Vec<usize>,
}

/// How a fractional keep count is turned into an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    Floor,
    Round,
    Ceil,
}

impl Rounding {
    pub const ALL: [Rounding; 3] = [Rounding::Floor, Rounding::Round, Rounding::Ceil];

    // Products like 0.6 * 30 must land on 18, not 18.000000000000004.
    const EPS: f64 = 1e-9;

    pub fn apply(self, ratio: f64, count: usize) -> usize {
        let x = ratio * count as f64;
        let v = match self {
            Rounding::Floor => (x + Self::EPS).floor(),
            Rounding::Round => (x + 0.5 + Self::EPS).floor(),
            Rounding::Ceil => (x - Self::EPS).ceil(),
        };
        (v.max(0.0) as usize).min(count)
    }
}

/// Tokens kept out of `count` at `ratio`: `ceil(ratio * count)`.
pub fn keep_count(ratio: f64, count: usize) -> usize {
    Rounding::Ceil.apply(ratio, count)
}

pub fn validate_keep_ratio(ratio: f64) -> Result<()> {
    if ratio.is_finite() && ratio > 0.0 && ratio <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("keep ratio must lie in (0, 1], got {ratio}")))
    }
}

/// Head-averaged attention of query row `query` over the columns of `target`,
/// each head's slice renormalized to sum to one.
pub fn query_scores(attn: &[Matrix], batch: &TokenBatch, query: usize, target: Segment) -> Result<ImportanceScores> {
    if attn.is_empty() {
        return Err(Error::InvalidArgument("attention stack has no heads".into()));
    }
    let n = batch.len();
    if let Some(bad) = attn.iter().find(|a| a.shape() != (n, n)) {
        return Err(Error::ShapeMismatch { op: "query_scores", left: (n, n), right: bad.shape() });
    }
    let cols = batch.segment_range(target);
    let mut scores = vec![0.0; cols.len()];
    for head in attn {
        let slice = &head.row(query)[cols.clone()];
        let total: f64 = slice.iter().sum();
        for (s, &a) in scores.iter_mut().zip(slice) {
            *s += a / total;
        }
    }
    let heads = attn.len() as f64;
    for s in &mut scores {
        *s /= heads;
    }
    Ok(ImportanceScores { segment: target, scores, head_count: attn.len() })
}

/// Importance of `target` tokens as seen by the static-template center token.
pub fn score_segment(
    attn: &[Matrix],
    batch: &TokenBatch,
    layout: &SegmentLayout,
    target: Segment,
) -> Result<ImportanceScores> {
    if target == Segment::Text {
        return Err(Error::TextNotPrunable);
    }
    let center = layout.center_index();
    let query = batch.position_of(Segment::St, center).ok_or(Error::CenterTokenMissing(center))?;
    query_scores(attn, batch, query, target)
}

/// Importance of `target` tokens as seen by the text token.
pub fn score_text(attn: &[Matrix], batch: &TokenBatch, target: Segment) -> Result<ImportanceScores> {
    if target == Segment::Text {
        return Err(Error::TextNotPrunable);
    }
    let query = batch.segment_range(Segment::Text).next().ok_or(Error::TextTokenMissing)?;
    query_scores(attn, batch, query, target)
}

/// Sums the text-token attention row into the center-token scores.
pub fn fuse_text(base: &ImportanceScores, text_row: &[f64]) -> Result<ImportanceScores> {
    if base.scores.len() != text_row.len() {
        return Err(Error::ShapeMismatch { op: "fuse_text", left: (1, base.scores.len()), right: (1, text_row.len()) });
    }
    Ok(ImportanceScores { scores: base.scores.iter().zip(text_row).map(|(a, b)| a + b).collect(), ..base.clone() })
}

/// Adds `weight * bonus[original_index]` to each static-template score.
pub fn apply_bonus(
    base: &ImportanceScores,
    bonus: &ForegroundBonus,
    original_indices: &[usize],
) -> Result<ImportanceScores> {
    if !bonus.is_active() {
        return Ok(base.clone());
    }
    if base.segment != Segment::St {
        return Err(Error::BonusOnWrongSegment(base.segment));
    }
    if original_indices.len() != base.scores.len() {
        return Err(Error::ShapeMismatch {
            op: "apply_bonus",
            left: (1, base.scores.len()),
            right: (1, original_indices.len()),
        });
    }
    let mut scores = base.scores.clone();
    for (s, &orig) in scores.iter_mut().zip(original_indices) {
        let b = bonus
            .values
            .get(orig)
            .ok_or_else(|| Error::InvalidArgument(format!("no bonus value for template patch {orig}")))?;
        *s += bonus.weight * b;
    }
    Ok(ImportanceScores { scores, ..base.clone() })
}

/// Keeps the `ceil(keep_ratio * n)` highest-scoring tokens of the scored
/// segment. For the static template the center token is always kept and the
/// remaining slots go to the best of the rest.
pub fn prune(
    batch: &TokenBatch,
    scores: &ImportanceScores,
    keep_ratio: f64,
    layout: &SegmentLayout,
) -> Result<(TokenBatch, PruneDecision)> {
    validate_keep_ratio(keep_ratio)?;
    let segment = scores.segment;
    if segment == Segment::Text {
        return Err(Error::TextNotPrunable);
    }
    let range = batch.segment_range(segment);
    let n = range.len();
    if scores.scores.len() != n {
        return Err(Error::ShapeMismatch { op: "prune", left: (1, n), right: (1, scores.scores.len()) });
    }
    let k = keep_count(keep_ratio, n);
    let originals = &batch.original_index[range.clone()];

    let kept_local: Vec<usize> = if segment == Segment::St {
        let center = layout.center_index();
        let c = originals.iter().position(|&o| o == center).ok_or(Error::CenterTokenMissing(center))?;
        let mut rest: Vec<usize> = (0..n).filter(|&i| i != c).collect();
        rest.sort_by(|&a, &b| rank_order(&scores.scores, a, b));
        rest.truncate(k.saturating_sub(1));
        rest.push(c);
        rest.sort_unstable();
        rest
    } else {
        topk_indices(&scores.scores, k)?
    };

    let mut keep_row = vec![true; batch.len()];
    keep_row[range.clone()].fill(false);
    for &i in &kept_local {
        keep_row[range.start + i] = true;
    }
    let rows: Vec<usize> = (0..batch.len()).filter(|&r| keep_row[r]).collect();

    let mut kept: Vec<usize> = kept_local.iter().map(|&i| originals[i]).collect();
    let mut dropped: Vec<usize> =
        (0..n).filter(|i| kept_local.binary_search(i).is_err()).map(|i| originals[i]).collect();
    kept.sort_unstable();
    dropped.sort_unstable();

    Ok((
        batch.retain_rows(&rows),
        PruneDecision { segment, kept_original_indices: kept, dropped_original_indices: dropped },
    ))
}

/// Scatters surviving search-region tokens back onto the full grid, with zero
/// rows where tokens were pruned. Template and text tokens are dropped.
pub fn restore_and_pad(batch: &TokenBatch, layout: &SegmentLayout) -> Result<Matrix> {
    let d = batch.features.cols();
    let mut out = Matrix::zeros(layout.n_sr, d);
    let mut filled = vec![false; layout.n_sr];
    for r in batch.segment_range(Segment::Sr) {
        let j = batch.original_index[r];
        if j >= layout.n_sr {
            return Err(Error::InvalidArgument(format!(
                "search-region index {j} outside a {}-token grid",
                layout.n_sr
            )));
        }
        if filled[j] {
            return Err(Error::DuplicateIndex { segment: Segment::Sr, index: j });
        }
        filled[j] = true;
        out.row_mut(j).copy_from_slice(batch.features.row(r));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{assemble_batch, BBox, BonusMode, Grid, ModelPreset};
    use crate::numerics::{softmax, softmax_rows};
    use proptest::prelude::*;

    /// 4 SR, 4 ST (2x2 grid, center original index 3), 4 DT, optional text.
    fn tiny_layout(text: bool) -> SegmentLayout {
        SegmentLayout {
            n_sr: 4,
            n_st: 4,
            n_dt: 4,
            n_text: usize::from(text),
            sr_grid: Grid::new(2, 2),
            tmpl_grid: Grid::new(2, 2),
            patch_size: 4,
            embed_dim: 2,
            input_channels: 3,
        }
    }

    fn tiny_batch(layout: &SegmentLayout) -> TokenBatch {
        let seg = |base: f64, n: usize| Matrix::new(n, 2, (0..2 * n).map(|i| base + i as f64).collect()).unwrap();
        let text = vec![100.0, 101.0];
        assemble_batch(
            layout,
            &seg(0.0, 4),
            &seg(10.0, 4),
            &seg(20.0, 4),
            (layout.n_text == 1).then_some(text.as_slice()),
        )
        .unwrap()
    }

    fn scores(segment: Segment, v: &[f64]) -> ImportanceScores {
        ImportanceScores { segment, scores: v.to_vec(), head_count: 1 }
    }

    #[test]
    fn rounding_modes() {
        assert_eq!(keep_count(0.7, 256), 180);
        assert_eq!(keep_count(0.7, 180), 126);
        assert_eq!(keep_count(0.7, 126), 89);
        assert_eq!(keep_count(0.6, 49), 30);
        assert_eq!(keep_count(0.6, 30), 18);
        assert_eq!(keep_count(0.6, 18), 11);
        assert_eq!(keep_count(1.0, 7), 7);
        assert_eq!(Rounding::Floor.apply(0.7, 256), 179);
        assert_eq!(Rounding::Round.apply(0.5, 5), 3);
        assert_eq!(Rounding::Round.apply(0.7, 256), 179);
    }

    #[test]
    fn score_segment_uniform_for_equal_keys() {
        let layout = tiny_layout(false);
        let batch = tiny_batch(&layout);
        let attn = Matrix::new(12, 12, vec![1.0 / 12.0; 144]).unwrap();
        let s = score_segment(&[attn], &batch, &layout, Segment::Sr).unwrap();
        for v in s.scores {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn score_segment_hand_softmax() {
        // d_k = 1, center query 1.0, SR keys [0, 1, 2] plus other keys at 0.
        let layout = SegmentLayout {
            n_sr: 3,
            sr_grid: Grid::new(1, 3),
            n_st: 1,
            n_dt: 1,
            tmpl_grid: Grid::new(1, 1),
            ..tiny_layout(false)
        };
        let batch =
            assemble_batch(&layout, &Matrix::zeros(3, 2), &Matrix::zeros(1, 2), &Matrix::zeros(1, 2), None).unwrap();
        let keys = [0.0, 1.0, 2.0, 0.0, 0.0];
        let logits: Vec<Vec<f64>> = (0..5).map(|_| keys.iter().map(|k| 1.0 * k).collect()).collect();
        let attn = softmax_rows(&Matrix::from_rows(&logits).unwrap());
        let s = score_segment(&[attn], &batch, &layout, Segment::Sr).unwrap();
        for (v, e) in s.scores.iter().zip([0.09003057, 0.24472847, 0.66524096]) {
            assert!((v - e).abs() < 1e-8);
        }
    }

    #[test]
    fn score_segment_averages_heads() {
        let layout = tiny_layout(false);
        let batch = tiny_batch(&layout);
        let center_row = batch.position_of(Segment::St, 3).unwrap();
        let head = |a: f64, b: f64| {
            let mut m = Matrix::zeros(12, 12);
            // restricted DT row [a, b, 0, 0] plus weight elsewhere
            m.set(center_row, 8, a);
            m.set(center_row, 9, b);
            m.set(center_row, 0, 0.5);
            m
        };
        let s = score_segment(&[head(1.0, 0.0), head(0.0, 1.0)], &batch, &layout, Segment::Dt).unwrap();
        assert_eq!(s.scores, vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(s.head_count, 2);
    }

    #[test]
    fn score_segment_requires_center() {
        let layout = tiny_layout(false);
        let batch = tiny_batch(&layout);
        let rows: Vec<usize> = (0..12).filter(|&r| r != 7).collect();
        let pruned = batch.retain_rows(&rows);
        let attn = Matrix::new(11, 11, vec![1.0; 121]).unwrap();
        assert_eq!(score_segment(&[attn], &pruned, &layout, Segment::Sr), Err(Error::CenterTokenMissing(3)));
    }

    #[test]
    fn fuse_text_examples() {
        let u = scores(Segment::Dt, &[0.25; 4]);
        let fused = fuse_text(&u, &[0.25; 4]).unwrap();
        assert_eq!(fused.scores, vec![0.5; 4]);

        let base = scores(Segment::Dt, &[0.6, 0.4]);
        let fused = fuse_text(&base, &[0.1, 0.9]).unwrap();
        assert!((fused.scores[0] - 0.7).abs() < 1e-15 && (fused.scores[1] - 1.3).abs() < 1e-15);
        assert_eq!(topk_indices(&base.scores, 1).unwrap(), vec![0]);
        assert_eq!(topk_indices(&fused.scores, 1).unwrap(), vec![1]);

        assert_eq!(fuse_text(&base, &[0.0, 0.0]).unwrap(), base);
        assert!(fuse_text(&base, &[0.0]).is_err());
    }

    #[test]
    fn apply_bonus_examples() {
        let base = scores(Segment::St, &[0.01, 0.9]);
        let bonus = ForegroundBonus { mode: BonusMode::Soft, values: vec![1.0, 0.0], weight: 0.0 };
        assert_eq!(apply_bonus(&base, &bonus, &[0, 1]).unwrap().scores, base.scores);

        let bonus = ForegroundBonus { weight: 1.0, ..bonus };
        let out = apply_bonus(&base, &bonus, &[0, 1]).unwrap();
        assert!((out.scores[0] - 1.01).abs() < 1e-15);
        assert!(out.scores[0] > out.scores[1]);

        let flat = ForegroundBonus { mode: BonusMode::All, values: vec![1.0; 3], weight: 1.0 };
        let base3 = scores(Segment::St, &[0.2, 0.5, 0.3]);
        let out = apply_bonus(&base3, &flat, &[0, 1, 2]).unwrap();
        assert_eq!(topk_indices(&out.scores, 2).unwrap(), topk_indices(&base3.scores, 2).unwrap());

        assert_eq!(
            apply_bonus(&scores(Segment::Sr, &[0.1]), &flat, &[0]),
            Err(Error::BonusOnWrongSegment(Segment::Sr))
        );
        let off = ForegroundBonus::off(4);
        assert!(apply_bonus(&scores(Segment::Sr, &[0.1]), &off, &[0]).is_ok());
    }

    #[test]
    fn bonus_uses_original_indices() {
        let base = scores(Segment::St, &[0.0, 0.0]);
        let bonus = ForegroundBonus { mode: BonusMode::Soft, values: vec![0.1, 0.2, 0.3, 0.4], weight: 1.0 };
        assert_eq!(apply_bonus(&base, &bonus, &[1, 3]).unwrap().scores, vec![0.2, 0.4]);
    }

    #[test]
    fn prune_identity_at_ratio_one() {
        let layout = tiny_layout(false);
        let batch = tiny_batch(&layout);
        let (out, dec) = prune(&batch, &scores(Segment::Sr, &[0.1, 0.2, 0.3, 0.4]), 1.0, &layout).unwrap();
        assert_eq!(out, batch);
        assert!(dec.dropped_original_indices.is_empty());
        assert_eq!(dec.kept_original_indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn prune_sr_preset_count() {
        let layout = ModelPreset::Ostrack256.layout();
        let d = 4;
        let l = SegmentLayout { embed_dim: d, ..layout };
        let batch =
            assemble_batch(&l, &Matrix::zeros(256, d), &Matrix::zeros(64, d), &Matrix::zeros(64, d), None).unwrap();
        let s: Vec<f64> = (0..256).map(|i| ((i * 37) % 101) as f64).collect();
        let (out, dec) = prune(&batch, &scores(Segment::Sr, &s), 0.7, &l).unwrap();
        assert_eq!(out.count(Segment::Sr), 180);
        assert_eq!(dec.kept_original_indices.len(), 180);
        assert_eq!(out.count(Segment::St), 64);
        assert_eq!(out.count(Segment::Dt), 64);
    }

    #[test]
    fn prune_st_forces_center() {
        let layout = SegmentLayout { n_st: 4, n_dt: 4, tmpl_grid: Grid::new(1, 4), ..tiny_layout(false) };
        assert_eq!(layout.center_index(), 2);
        let batch = tiny_batch(&layout);
        let (out, dec) = prune(&batch, &scores(Segment::St, &[0.3, 0.5, 0.0, 0.2]), 0.5, &layout).unwrap();
        assert_eq!(dec.kept_original_indices, vec![1, 2]);
        assert_eq!(dec.dropped_original_indices, vec![0, 3]);
        assert_eq!(out.original_indices(Segment::St), &[1, 2]);
        // kept rows carry their features
        assert_eq!(out.segment_features(Segment::St).row(0), batch.segment_features(Segment::St).row(1));
    }

    #[test]
    fn prune_rejects_bad_ratio_and_text() {
        let layout = tiny_layout(true);
        let batch = tiny_batch(&layout);
        let s = scores(Segment::Sr, &[0.1; 4]);
        for r in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(prune(&batch, &s, r, &layout).is_err());
        }
        assert_eq!(
            prune(&batch, &scores(Segment::Text, &[1.0]), 0.5, &layout).map(|_| ()),
            Err(Error::TextNotPrunable)
        );
    }

    #[test]
    fn restore_examples() {
        let layout = tiny_layout(false);
        let batch = tiny_batch(&layout);
        let full = restore_and_pad(&batch, &layout).unwrap();
        assert_eq!(full, batch.segment_features(Segment::Sr));

        let (pruned, _) = prune(&batch, &scores(Segment::Sr, &[0.9, 0.1, 0.2, 0.8]), 0.5, &layout).unwrap();
        let r = restore_and_pad(&pruned, &layout).unwrap();
        let f = batch.segment_features(Segment::Sr);
        assert_eq!(r.row(0), f.row(0));
        assert_eq!(r.row(1), &[0.0, 0.0]);
        assert_eq!(r.row(2), &[0.0, 0.0]);
        assert_eq!(r.row(3), f.row(3));

        let mut dup = pruned.clone();
        dup.original_index[1] = 0;
        assert!(matches!(restore_and_pad(&dup, &layout), Err(Error::DuplicateIndex { .. })));
    }

    #[test]
    fn restore_single_survivor() {
        let layout = SegmentLayout { n_sr: 9, sr_grid: Grid::new(3, 3), ..tiny_layout(false) };
        let sr = Matrix::new(9, 2, (1..=18).map(f64::from).collect()).unwrap();
        let batch = assemble_batch(&layout, &sr, &Matrix::zeros(4, 2), &Matrix::zeros(4, 2), None).unwrap();
        let mut s = vec![0.0; 9];
        s[5] = 1.0;
        let (pruned, _) = prune(&batch, &scores(Segment::Sr, &s), 0.1, &layout).unwrap();
        let r = restore_and_pad(&pruned, &layout).unwrap();
        let nonzero: Vec<usize> = (0..9).filter(|&i| r.row(i).iter().any(|&v| v != 0.0)).collect();
        assert_eq!(nonzero, vec![5]);
    }

    #[test]
    fn text_scores_use_text_row() {
        let layout = tiny_layout(true);
        let batch = tiny_batch(&layout);
        let logits: Vec<Vec<f64>> = (0..13).map(|r| (0..13).map(|c| ((r * 3 + c * 7) % 5) as f64).collect()).collect();
        let attn = softmax_rows(&Matrix::from_rows(&logits).unwrap());
        let t = score_text(std::slice::from_ref(&attn), &batch, Segment::Dt).unwrap();
        let expected = softmax(&logits[12][8..12]);
        for (a, b) in t.scores.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(
            score_text(&[attn], &tiny_batch(&tiny_layout(false)), Segment::Dt).err(),
            Some(Error::TextTokenMissing)
        );
    }

    proptest! {
        #[test]
        fn st_prune_keeps_center(raw in prop::collection::vec(0.0f64..1.0, 49), ratio in 0.01f64..=1.0) {
            let layout = ModelPreset::Sutrack224.layout();
            let l = SegmentLayout { embed_dim: 1, ..layout };
            let text = [0.0];
            let batch = assemble_batch(&l, &Matrix::zeros(196, 1), &Matrix::zeros(49, 1), &Matrix::zeros(49, 1), Some(&text)).unwrap();
            let (out, dec) = prune(&batch, &scores(Segment::St, &raw), ratio, &l).unwrap();
            prop_assert!(dec.kept_original_indices.contains(&l.center_index()));
            prop_assert_eq!(dec.kept_original_indices.len(), keep_count(ratio, 49));
            prop_assert_eq!(dec.kept_original_indices.len() + dec.dropped_original_indices.len(), 49);
            prop_assert_eq!(out.count(Segment::Text), 1);
        }

        #[test]
        fn kept_set_invariant_under_monotone_transform(raw in prop::collection::vec(-3.0f64..3.0, 4), ratio in 0.1f64..=1.0) {
            let layout = tiny_layout(false);
            let batch = tiny_batch(&layout);
            let (_, a) = prune(&batch, &scores(Segment::Dt, &raw), ratio, &layout).unwrap();
            let t: Vec<f64> = raw.iter().map(|v| v.powi(3) + 10.0).collect();
            let (_, b) = prune(&batch, &scores(Segment::Dt, &t), ratio, &layout).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn restore_then_gather_round_trips(raw in prop::collection::vec(0.0f64..1.0, 4), ratio in 0.1f64..=1.0) {
            let layout = tiny_layout(false);
            let batch = tiny_batch(&layout);
            let (pruned, dec) = prune(&batch, &scores(Segment::Sr, &raw), ratio, &layout).unwrap();
            let restored = restore_and_pad(&pruned, &layout).unwrap();
            let gathered = restored.select_rows(&dec.kept_original_indices);
            prop_assert_eq!(gathered, pruned.segment_features(Segment::Sr));
        }

        #[test]
        fn full_foreground_tokens_survive(
            x in 0usize..4, y in 0usize..4, w in 1usize..=4, h in 1usize..=4,
            base in prop::collection::vec(0.0f64..0.999, 16),
            ratio in 0.05f64..=1.0,
        ) {
            // 4x4 template of 4-px patches; bbox in patch units scaled to pixels.
            let w = w.min(4 - x);
            let h = h.min(4 - y);
            let layout = SegmentLayout {
                n_st: 16, n_dt: 16, tmpl_grid: Grid::new(4, 4), patch_size: 4, embed_dim: 1,
                ..tiny_layout(false)
            };
            let bbox = BBox::new(x * 4 + 1, y * 4, w * 4 - 1, h * 4);
            let bonus = ForegroundBonus::from_bbox(&layout, &bbox, BonusMode::Soft, 1.0).unwrap();
            let batch = assemble_batch(&layout, &Matrix::zeros(4, 1), &Matrix::zeros(16, 1), &Matrix::zeros(16, 1), None).unwrap();
            let fused = apply_bonus(&scores(Segment::St, &base), &bonus, batch.original_indices(Segment::St)).unwrap();
            let (_, dec) = prune(&batch, &fused, ratio, &layout).unwrap();
            let full: Vec<usize> = (0..16).filter(|&i| bonus.values[i] == 1.0).collect();
            let zero_kept = dec.kept_original_indices.iter().any(|&i| bonus.values[i] == 0.0 && i != layout.center_index());
            if dec.kept_original_indices.len() > full.len() && zero_kept {
                for i in &full {
                    prop_assert!(dec.kept_original_indices.contains(i));
                }
            }
        }
    }
}
