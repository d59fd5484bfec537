//! Closed-form token schedule and MAC accounting.
//!
//! Segment counts shrink by `ceil(ratio * current)` at each scheduled layer,
//! and a prune at layer `L` only affects layers after `L`.

use serde::{Deserialize, Serialize};

use crate::ctem::{validate_keep_ratio, Rounding};
use crate::error::{Error, Result};
use crate::layout::{Segment, SegmentLayout};

/// Which segment is pruned at which 1-based layer, and how hard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningSchedule {
    #[serde(default)]
    pub ce_layers: Vec<usize>,
    #[serde(default)]
    pub dte_layers: Vec<usize>,
    #[serde(default)]
    pub ste_layers: Vec<usize>,
    pub keep_ratio_sr: f64,
    pub keep_ratio_dt: f64,
    pub keep_ratio_st: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneEvent {
    pub layer: usize,
    pub segment: Segment,
    pub keep_ratio: f64,
}

impl Default for PruningSchedule {
    fn default() -> Self {
        Self::empty()
    }
}

impl PruningSchedule {
    pub fn empty() -> Self {
        Self {
            ce_layers: Vec::new(),
            dte_layers: Vec::new(),
            ste_layers: Vec::new(),
            keep_ratio_sr: 1.0,
            keep_ratio_dt: 1.0,
            keep_ratio_st: 1.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ce_layers.is_empty() && self.dte_layers.is_empty() && self.ste_layers.is_empty()
    }

    pub fn validate(&self, num_layers: usize) -> Result<()> {
        for (name, layers) in [("ce", &self.ce_layers), ("dte", &self.dte_layers), ("ste", &self.ste_layers)] {
            if let Some(&bad) = layers.iter().find(|&&l| l == 0 || l > num_layers) {
                return Err(Error::InvalidSchedule(format!("{name} layer {bad} is outside [1, {num_layers}]")));
            }
            let mut sorted = layers.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidSchedule(format!("{name} layers contain duplicates: {layers:?}")));
            }
        }
        for r in [self.keep_ratio_sr, self.keep_ratio_dt, self.keep_ratio_st] {
            validate_keep_ratio(r).map_err(|e| Error::InvalidSchedule(e.to_string()))?;
        }
        Ok(())
    }

    /// All events ordered by layer, and within a layer CE, then DTE, then STE.
    pub fn events(&self) -> Vec<PruneEvent> {
        let mut events = Vec::new();
        for (layers, segment, keep_ratio) in [
            (&self.ce_layers, Segment::Sr, self.keep_ratio_sr),
            (&self.dte_layers, Segment::Dt, self.keep_ratio_dt),
            (&self.ste_layers, Segment::St, self.keep_ratio_st),
        ] {
            events.extend(layers.iter().map(|&layer| PruneEvent { layer, segment, keep_ratio }));
        }
        events.sort_by_key(|e| (e.layer, event_rank(e.segment)));
        events
    }
}

fn event_rank(segment: Segment) -> u8 {
    match segment {
        Segment::Sr => 0,
        Segment::Dt => 1,
        Segment::St => 2,
        Segment::Text => 3,
    }
}

/// Tokens of each segment processed at one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentCounts {
    pub sr: usize,
    pub st: usize,
    pub dt: usize,
    pub text: usize,
}

impl SegmentCounts {
    pub fn full(layout: &SegmentLayout) -> Self {
        Self { sr: layout.n_sr, st: layout.n_st, dt: layout.n_dt, text: layout.n_text }
    }

    pub fn vision(&self) -> usize {
        self.sr + self.st + self.dt
    }

    pub fn total(&self) -> usize {
        self.vision() + self.text
    }

    pub fn get_mut(&mut self, segment: Segment) -> &mut usize {
        match segment {
            Segment::Sr => &mut self.sr,
            Segment::St => &mut self.st,
            Segment::Dt => &mut self.dt,
            Segment::Text => &mut self.text,
        }
    }
}

/// Per-layer segment counts for `schedule` over `num_layers` layers.
pub fn token_schedule(
    layout: &SegmentLayout,
    num_layers: usize,
    schedule: &PruningSchedule,
) -> Result<Vec<SegmentCounts>> {
    schedule.validate(num_layers)?;
    let events = schedule.events();
    let mut counts = SegmentCounts::full(layout);
    let mut out = Vec::with_capacity(num_layers);
    for layer in 1..=num_layers {
        out.push(counts);
        for ev in events.iter().filter(|e| e.layer == layer) {
            let c = counts.get_mut(ev.segment);
            *c = Rounding::Ceil.apply(ev.keep_ratio, *c);
        }
    }
    Ok(out)
}

/// Mean over layers and final-layer value.
pub fn avg_and_cmp(per_layer: &[usize]) -> Result<(f64, usize)> {
    let last = *per_layer.last().ok_or_else(|| Error::InvalidArgument("no layers to average".into()))?;
    let sum: usize = per_layer.iter().sum();
    Ok((sum as f64 / per_layer.len() as f64, last))
}

/// Rounds half away from zero to `decimals` places, the way result tables
/// are usually printed.
pub fn round_to(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    // 1e-9 absorbs representation error in values like 267.75
    ((value * scale) + 1e-9_f64.copysign(value)).round() / scale
}

/// MACs of a stack of transformer layers: per layer
/// `(4 + 2 * mlp_ratio) * N * d^2` for the projections and MLP plus
/// `2 * N^2 * d` for the score and value products.
pub fn estimate_macs(per_layer_tokens: &[usize], embed_dim: usize, mlp_ratio: f64) -> f64 {
    let d = embed_dim as f64;
    let linear = (4.0 + 2.0 * mlp_ratio) * d * d;
    per_layer_tokens
        .iter()
        .map(|&n| {
            let n = n as f64;
            linear * n + 2.0 * n * n * d
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub per_layer: Vec<SegmentCounts>,
    /// Vision tokens (text excluded) per layer.
    pub per_layer_tokens: Vec<usize>,
    pub avg_vis_tok: f64,
    pub cmp_vis_tok: usize,
    pub macs_total: f64,
    pub macs_baseline: f64,
    pub reduction_pct: f64,
}

/// Token and MAC accounting for one configuration. MACs count every token the
/// layer processes, including the text token.
pub fn budget_report(
    layout: &SegmentLayout,
    num_layers: usize,
    embed_dim: usize,
    mlp_ratio: f64,
    schedule: &PruningSchedule,
) -> Result<BudgetReport> {
    let per_layer = token_schedule(layout, num_layers, schedule)?;
    let per_layer_tokens: Vec<usize> = per_layer.iter().map(SegmentCounts::vision).collect();
    let totals: Vec<usize> = per_layer.iter().map(SegmentCounts::total).collect();
    let (avg_vis_tok, cmp_vis_tok) = avg_and_cmp(&per_layer_tokens)?;
    let macs_total = estimate_macs(&totals, embed_dim, mlp_ratio);
    let macs_baseline = estimate_macs(&vec![layout.total_tokens(); num_layers], embed_dim, mlp_ratio);
    Ok(BudgetReport {
        per_layer,
        per_layer_tokens,
        avg_vis_tok,
        cmp_vis_tok,
        macs_total,
        macs_baseline,
        reduction_pct: 100.0 * (1.0 - macs_total / macs_baseline),
    })
}

/// One grid point that reproduces a target final count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub keep_ratio: f64,
    pub rounding: Rounding,
    pub final_count: usize,
}

/// Keep ratios searched by [`calibrate_keep_ratios`]: 0.50 to 0.90 in steps of
/// 0.05, plus 1.0.
pub fn calibration_grid() -> Vec<f64> {
    (0..=8).map(|i| f64::from(50 + 5 * i) / 100.0).chain([1.0]).collect()
}

/// Every (ratio, rounding) pair on the grid whose repeated application at
/// `event_layers` takes `segment` from its full count to exactly `target`.
pub fn calibrate_keep_ratios(
    layout: &SegmentLayout,
    num_layers: usize,
    segment: Segment,
    event_layers: &[usize],
    target: usize,
) -> Result<Vec<Calibration>> {
    if segment == Segment::Text {
        return Err(Error::TextNotPrunable);
    }
    if let Some(&bad) = event_layers.iter().find(|&&l| l == 0 || l > num_layers) {
        return Err(Error::InvalidSchedule(format!("layer {bad} is outside [1, {num_layers}]")));
    }
    let start = layout.count(segment);
    let mut found = Vec::new();
    for ratio in calibration_grid() {
        for rounding in Rounding::ALL {
            let final_count = event_layers.iter().fold(start, |n, _| rounding.apply(ratio, n));
            if final_count == target {
                found.push(Calibration { keep_ratio: ratio, rounding, final_count });
            }
        }
    }
    Ok(found)
}
