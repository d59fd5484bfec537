//! Acceptance checks run by `tokprune verify` and `GET /v1/verify`.
//!
//! Each check compares observed values against pinned expectations and records
//! whether it passed. Randomized checks draw from fixed seeds, so the report is
//! identical across runs.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::budget::{
    avg_and_cmp, budget_report, calibrate_keep_ratios, estimate_macs, round_to, token_schedule, PruningSchedule,
    SegmentCounts,
};
use crate::config::{default_schedule, RunConfig, Stage};
use crate::ctem::{apply_bonus, fuse_text, keep_count, prune, score_segment, score_text, ImportanceScores, Rounding};
use crate::encoder::{encoder_layer, forward, EncoderConfig, EncoderWeights, LayerSource, PruneOptions, TextTargets};
use crate::error::Result;
use crate::layout::{
    assemble_batch, build_mask, patch_bonus, BBox, BonusMode, ForegroundBonus, Grid, ModelPreset, Segment,
    SegmentLayout, TokenBatch,
};
use crate::numerics::{softmax_rows, topk_indices, Matrix};
use crate::oracle::masked_forward;
use crate::policy::DtUpdateState;
use crate::report::forward_artifacts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Replaces the SR keep ratio in the token-table checks (negative control).
    pub keep_ratio_sr: Option<f64>,
    /// Random instances for the encoder property checks.
    pub instances: usize,
    /// Random draws for the CTEM unit-property checks.
    pub samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { keep_ratio_sr: None, instances: 100, samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub elapsed_ms: u64,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub criteria: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.criteria.iter().flat_map(|c| c.checks.iter().filter(|k| !k.passed)).collect()
    }

    /// Fixed-width table, one line per check and a PASS/FAIL line per criterion.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            out.push_str(&format!(
                "[{}] {:>2}. {} ({} ms)\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.title,
                c.elapsed_ms
            ));
            for k in &c.checks {
                out.push_str(&format!(
                    "       {} {:<58} expected {:<30} observed {}\n",
                    if k.passed { "ok  " } else { "FAIL" },
                    k.name,
                    k.expected,
                    k.observed
                ));
            }
        }
        let failed = self.criteria.iter().filter(|c| !c.passed).count();
        out.push_str(&format!("{} of {} criteria passed\n", self.criteria.len() - failed, self.criteria.len()));
        out
    }
}

struct Checks(Vec<CheckResult>);

impl Checks {
    fn new() -> Self {
        Checks(Vec::new())
    }

    fn push(&mut self, name: impl Into<String>, expected: impl ToString, observed: impl ToString, passed: bool) {
        self.0.push(CheckResult {
            name: name.into(),
            expected: expected.to_string(),
            observed: observed.to_string(),
            passed,
        });
    }

    fn eq<T: PartialEq + ToString>(&mut self, name: impl Into<String>, expected: T, observed: T) {
        let ok = expected == observed;
        self.push(name, expected, observed, ok);
    }
}

fn criterion(
    id: u32,
    title: &str,
    budget: Option<Duration>,
    run: impl FnOnce(&mut Checks) -> Result<()>,
) -> CriterionResult {
    let start = Instant::now();
    let mut checks = Checks::new();
    if let Err(e) = run(&mut checks) {
        checks.push("runs without error", "Ok", e, false);
    }
    let elapsed = start.elapsed();
    if let Some(limit) = budget {
        checks.push(
            "runtime",
            format!("< {} ms", limit.as_millis()),
            format!("{} ms", elapsed.as_millis()),
            elapsed < limit,
        );
    }
    CriterionResult {
        id,
        title: title.to_string(),
        passed: checks.0.iter().all(|c| c.passed),
        elapsed_ms: elapsed.as_millis() as u64,
        checks: checks.0,
    }
}

fn with_sr(mut s: PruningSchedule, sr: Option<f64>) -> PruningSchedule {
    if let Some(r) = sr {
        s.keep_ratio_sr = r;
    }
    s
}

fn vision_avg_cmp(preset: ModelPreset, num_layers: usize, schedule: &PruningSchedule) -> Result<(f64, usize)> {
    let counts = token_schedule(&preset.layout(), num_layers, schedule)?;
    let vis: Vec<usize> = counts.iter().map(SegmentCounts::vision).collect();
    avg_and_cmp(&vis)
}

fn fmt_pair(avg: f64, cmp: usize, decimals: u32) -> String {
    format!("({:.*}, {cmp})", decimals as usize, round_to(avg, decimals))
}

fn location_schedule(ce: &[usize], dte: &[usize], sr: f64, tmpl: f64) -> PruningSchedule {
    PruningSchedule {
        ce_layers: ce.to_vec(),
        dte_layers: dte.to_vec(),
        ste_layers: Vec::new(),
        keep_ratio_sr: sr,
        keep_ratio_dt: tmpl,
        keep_ratio_st: tmpl,
    }
}

fn token_tables_rgb(c: &mut Checks, sr: Option<f64>) -> Result<()> {
    let p = ModelPreset::Ostrack256;
    let rows = [
        ("rgb +ce", Stage::Ce, (291.0, 217)),
        ("rgb +ce +dte", Stage::CeDte, (271.0, 176)),
        ("rgb +ce +dte +ste", Stage::CeDteSte, (252.0, 135)),
        ("rgb full (utp)", Stage::Full, (252.0, 135)),
    ];
    for (name, stage, (avg, cmp)) in rows {
        let (a, k) = vision_avg_cmp(p, 12, &with_sr(default_schedule(p, stage), sr))?;
        c.eq(name, fmt_pair(avg, cmp, 0), fmt_pair(a, k, 0));
    }
    let (a, _) = vision_avg_cmp(p, 12, &with_sr(default_schedule(p, Stage::CeDte), sr))?;
    c.eq("rgb +ce +dte avg at one decimal", "271.2".to_string(), format!("{:.1}", round_to(a, 1)));

    let locations = [
        ([3, 6, 9], [3, 6, 9], 267.8),
        ([3, 6, 9], [4, 7, 10], 271.2),
        ([3, 6, 9], [2, 5, 8], 264.3),
        ([2, 5, 8], [3, 6, 9], 253.8),
        ([4, 7, 10], [3, 6, 9], 281.7),
    ];
    for (ce, dte, avg) in locations.iter() {
        let (a, k) = vision_avg_cmp(p, 12, &location_schedule(ce, dte, sr.unwrap_or(0.7), 0.7))?;
        c.eq(format!("rgb location CE{ce:?} DTE{dte:?}"), fmt_pair(*avg, 176, 1), fmt_pair(a, k, 1));
    }
    Ok(())
}

fn token_tables_unified(c: &mut Checks, sr: Option<f64>) -> Result<()> {
    let p = ModelPreset::Sutrack224;
    let rows = [
        ("unified +ce", Stage::Ce, (223.0, 166)),
        ("unified +ce +dte", Stage::CeDte, (206.0, 128)),
        ("unified +ce +dte +ste", Stage::CeDteSte, (188.0, 90)),
        ("unified full (utp)", Stage::Full, (188.0, 90)),
    ];
    for (name, stage, (avg, cmp)) in rows {
        let (a, k) = vision_avg_cmp(p, 24, &with_sr(default_schedule(p, stage), sr))?;
        c.eq(name, fmt_pair(avg, cmp, 0), fmt_pair(a, k, 0));
    }
    let locations = [
        ([6, 12, 18], [6, 12, 18], 201.0),
        ([6, 12, 18], [9, 15, 21], 206.0),
        ([6, 12, 18], [3, 9, 15], 196.0),
        ([3, 9, 15], [6, 12, 18], 185.0),
        ([9, 15, 21], [6, 12, 18], 217.0),
    ];
    for (ce, dte, avg) in locations.iter() {
        let (a, k) = vision_avg_cmp(p, 24, &location_schedule(ce, dte, sr.unwrap_or(0.7), 0.6))?;
        c.eq(format!("unified location CE{ce:?} DTE{dte:?}"), fmt_pair(*avg, 128, 0), fmt_pair(a, k, 0));
    }
    Ok(())
}

fn calibration(c: &mut Checks) -> Result<()> {
    let l = ModelPreset::Ostrack256.layout();
    let sols = calibrate_keep_ratios(&l, 12, Segment::Sr, &[3, 6, 9], 89)?;
    let shown: Vec<String> = sols.iter().map(|s| format!("({}, {:?})", s.keep_ratio, s.rounding)).collect();
    c.eq("ostrack256 SR target 89 unique solution", "[(0.7, Ceil)]".to_string(), format!("[{}]", shown.join(", ")));
    let u = ModelPreset::Sutrack224.layout();
    let sols = calibrate_keep_ratios(&u, 24, Segment::Dt, &[9, 15, 21], 11)?;
    let has = sols.iter().any(|s| s.keep_ratio == 0.6 && s.rounding == Rounding::Ceil);
    let shown: Vec<String> = sols.iter().map(|s| format!("({}, {:?})", s.keep_ratio, s.rounding)).collect();
    c.push(
        "sutrack224 DT target 11 includes (0.6, Ceil)",
        "contains (0.6, Ceil)",
        format!("[{}]", shown.join(", ")),
        has,
    );
    Ok(())
}

/// Published reduction for the full RGB schedule: 34.5G -> 23.8G.
pub const REPORTED_REDUCTION_PCT: f64 = 100.0 * (1.0 - 23.8 / 34.5);
pub const REDUCTION_TOLERANCE_PP: f64 = 5.0;

fn mac_trend(c: &mut Checks, sr: Option<f64>) -> Result<()> {
    let base = estimate_macs(&[384; 12], 768, 4.0);
    let rel = (base / 35.33e9 - 1.0).abs();
    c.push(
        "baseline MACs N=384 d=768 L=12",
        "35.33e9 ± 0.1%",
        format!("{:.4}e9 ({:+.3}%)", base / 1e9, 100.0 * (base / 35.33e9 - 1.0)),
        rel <= 1e-3,
    );

    let cfg = RunConfig::preset("ostrack256-utp")?;
    let schedule = with_sr(cfg.schedule.clone(), sr);
    let r = budget_report(&cfg.layout, 12, 768, 4.0, &schedule)?;
    let diff = r.reduction_pct - REPORTED_REDUCTION_PCT;
    c.push(
        "ostrack256-utp relative MAC reduction",
        format!("{REPORTED_REDUCTION_PCT:.1}% ± {REDUCTION_TOLERANCE_PP} pp"),
        format!("{:.2}% ({diff:+.2} pp)", r.reduction_pct),
        diff.abs() <= REDUCTION_TOLERANCE_PP,
    );
    // Absolute numbers differ from the reported 34.5G / 23.8G by a constant
    // offset the closed form does not model; shown, not gated.
    c.push(
        "absolute MACs (informational)",
        "34.5G -> 23.8G reported",
        format!("{:.2}G -> {:.2}G", r.macs_baseline / 1e9, r.macs_total / 1e9),
        true,
    );
    Ok(())
}

/// A random small instance for the encoder property checks.
pub struct Instance {
    pub config: EncoderConfig,
    pub layout: SegmentLayout,
    pub batch: TokenBatch,
    pub schedule: PruningSchedule,
    pub options: PruneOptions,
}

/// 6-24 tokens, 1-4 heads, 2-4 layers, random schedule, bonus, and text use.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = *[1usize, 2].choose(&mut rng).unwrap();
    let tmpl_grid = Grid::new(side, side);
    let n_tmpl = tmpl_grid.len();
    let n_text = rng.gen_range(0..=1);
    let total = rng.gen_range(6..=24usize);
    let n_sr = total.saturating_sub(2 * n_tmpl + n_text).max(1);
    let heads = rng.gen_range(1..=4usize);
    let embed_dim = heads * rng.gen_range(2..=4usize);
    let num_layers = rng.gen_range(2..=4usize);
    let layout = SegmentLayout {
        n_sr,
        n_st: n_tmpl,
        n_dt: n_tmpl,
        n_text,
        sr_grid: Grid::new(1, n_sr),
        tmpl_grid,
        patch_size: 4,
        embed_dim,
        input_channels: 3,
    };
    let config = EncoderConfig { num_layers, embed_dim, num_heads: heads, mlp_ratio: 2.0, weight_seed: rng.gen() };
    let pick = |rng: &mut ChaCha8Rng| -> Vec<usize> { (1..=num_layers).filter(|_| rng.gen_bool(0.4)).collect() };
    let schedule = PruningSchedule {
        ce_layers: pick(&mut rng),
        dte_layers: pick(&mut rng),
        ste_layers: pick(&mut rng),
        keep_ratio_sr: rng.gen_range(0.3..=1.0),
        keep_ratio_dt: rng.gen_range(0.3..=1.0),
        keep_ratio_st: rng.gen_range(0.3..=1.0),
    };
    let mut gen = |rows: usize| {
        Matrix::new(rows, embed_dim, (0..rows * embed_dim).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap()
    };
    let (sr, st, dt, text) = (gen(n_sr), gen(n_tmpl), gen(n_tmpl), gen(1));
    let batch = assemble_batch(&layout, &sr, &st, &dt, (n_text == 1).then(|| text.row(0))).unwrap();
    let options = PruneOptions {
        bonus: seed.is_multiple_of(2).then(|| {
            ForegroundBonus::from_bbox(
                &layout,
                &BBox::new(0, 0, layout.template_side(), 2.min(layout.template_side())),
                BonusMode::Soft,
                1.0,
            )
            .unwrap()
        }),
        text_targets: if n_text == 1 {
            TextTargets { sr: seed.is_multiple_of(3), dt: true, st: seed.is_multiple_of(5) }
        } else {
            TextTargets::NONE
        },
    };
    Instance { config, layout, batch, schedule, options }
}

fn prune_mask_equivalence(c: &mut Checks, instances: usize) -> Result<()> {
    let mut worst = 0.0f64;
    let mut mismatched = 0usize;
    for seed in 0..instances as u64 {
        let inst = random_instance(seed);
        let weights = EncoderWeights::seeded(&inst.config);
        let phys = forward(&inst.config, &weights, &inst.layout, &inst.batch, &inst.schedule, &inst.options)?;
        let masked = masked_forward(&inst.config, &weights, &inst.layout, &inst.batch, &inst.schedule, &inst.options)?;
        for seg in Segment::ALL {
            let expected = masked.surviving(&inst.batch, seg);
            let got_idx = phys.final_batch.original_indices(seg);
            if expected.len() != got_idx.len() || expected.iter().zip(got_idx).any(|((i, _), j)| i != j) {
                mismatched += 1;
                continue;
            }
            let feats = phys.final_batch.segment_features(seg);
            for (r, (_, row)) in expected.iter().enumerate() {
                for (a, b) in feats.row(r).iter().zip(row) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        let counts: Vec<usize> = phys.traces.iter().map(|t| t.tokens_processed).collect();
        if counts != masked.tokens_processed {
            mismatched += 1;
        }
    }
    c.eq(format!("surviving token sets agree ({instances} instances)"), 0, mismatched);
    c.push("max |physical - masked| on survivors", "<= 1e-9", format!("{worst:.3e}"), worst <= 1e-9);
    Ok(())
}

fn random_preset_schedule(rng: &mut ChaCha8Rng, num_layers: usize) -> PruningSchedule {
    let mut pick = || -> Vec<usize> { (1..=num_layers).filter(|_| rng.gen_bool(0.25)).collect() };
    let (ce, dte, ste) = (pick(), pick(), pick());
    PruningSchedule {
        ce_layers: ce,
        dte_layers: dte,
        ste_layers: ste,
        keep_ratio_sr: rng.gen_range(0.3..=1.0),
        keep_ratio_dt: rng.gen_range(0.3..=1.0),
        keep_ratio_st: rng.gen_range(0.3..=1.0),
    }
}

fn trace_budget_agreement(c: &mut Checks, instances: usize) -> Result<()> {
    for (preset, name) in [(ModelPreset::Ostrack256, "ostrack256-utp"), (ModelPreset::Sutrack224, "sutrack224-utp")] {
        // Preset token geometry and depth; narrow width keeps 100 runs cheap.
        let base = RunConfig::preset(name)?.with_width(4, 1);
        let batch = base.build_batch()?;
        let options = base.prune_options()?;
        let weights = EncoderWeights::seeded(&base.encoder);
        let mut rng = ChaCha8Rng::seed_from_u64(0x7ace + preset as u64);
        let mut mismatches = 0usize;
        for _ in 0..instances {
            let schedule = random_preset_schedule(&mut rng, base.encoder.num_layers);
            let out = forward(&base.encoder, &weights, &base.layout, &batch, &schedule, &options)?;
            let traced: Vec<SegmentCounts> = out.traces.iter().map(|t| t.counts).collect();
            if traced != token_schedule(&base.layout, base.encoder.num_layers, &schedule)? {
                mismatches += 1;
            }
        }
        c.eq(format!("{} trace != token_schedule ({instances} schedules)", preset.name()), 0, mismatches);
    }
    Ok(())
}

fn ctem_properties(c: &mut Checks, samples: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc7e3);

    let mut worst = 0.0f64;
    for _ in 0..samples {
        let cols = rng.gen_range(1..64);
        let m = Matrix::new(1, cols, (0..cols).map(|_| rng.gen_range(-80.0..80.0)).collect())?;
        let s: f64 = softmax_rows(&m).row(0).iter().sum();
        worst = worst.max((s - 1.0).abs());
    }
    c.push(format!("softmax row sums ({samples} rows)"), "|sum - 1| <= 1e-12", format!("{worst:.2e}"), worst <= 1e-12);

    let mut tie_fail = 0;
    let mut mono_fail = 0;
    for _ in 0..samples {
        let n = rng.gen_range(1..48);
        // coarse values force plenty of ties
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..6u8)) * 0.25).collect();
        let k = rng.gen_range(0..=n);
        let got = topk_indices(&scores, k)?;
        // brute force: a token is kept iff fewer than k tokens beat it under (score desc, index asc)
        let brute: Vec<usize> = (0..n)
            .filter(|&i| (0..n).filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i)).count() < k)
            .collect();
        if got != brute {
            tie_fail += 1;
        }
        let t: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        if topk_indices(&t, k)? != got {
            mono_fail += 1;
        }
    }
    c.eq(format!("top-k matches brute force with ties ({samples})"), 0, tie_fail);
    c.eq(format!("top-k invariant under exp transform ({samples})"), 0, mono_fail);

    let layout = ModelPreset::Sutrack224.layout();
    let l = SegmentLayout { embed_dim: 1, ..layout };
    let text = [0.0];
    let batch = assemble_batch(&l, &Matrix::zeros(196, 1), &Matrix::zeros(49, 1), &Matrix::zeros(49, 1), Some(&text))?;
    let mut center_missing = 0;
    for _ in 0..samples {
        let mut scores: Vec<f64> = (0..49).map(|_| rng.gen_range(0.0..1.0)).collect();
        scores[l.center_index()] = -rng.gen_range(0.0..1.0);
        let ratio = rng.gen_range(0.01..=1.0);
        let (_, d) = prune(&batch, &ImportanceScores { segment: Segment::St, scores, head_count: 1 }, ratio, &l)?;
        if !d.kept_original_indices.contains(&l.center_index())
            || d.kept_original_indices.len() != keep_count(ratio, 49)
        {
            center_missing += 1;
        }
    }
    c.eq(format!("ST center retained ({samples} prunes)"), 0, center_missing);

    let side = 128;
    let mut order_fail = 0;
    let mut mass_fail = 0;
    for _ in 0..samples {
        let x = rng.gen_range(0..side);
        let y = rng.gen_range(0..side);
        let bbox = BBox::new(x, y, rng.gen_range(1..=side - x), rng.gen_range(1..=side - y));
        let mask = build_mask(&bbox, side)?;
        let full = patch_bonus(&mask, 16, BonusMode::Full)?;
        let soft = patch_bonus(&mask, 16, BonusMode::Soft)?;
        let all = patch_bonus(&mask, 16, BonusMode::All)?;
        if (0..soft.len()).any(|i| !(full[i] <= soft[i] && soft[i] <= all[i])) {
            order_fail += 1;
        }
        let mass: f64 = soft.iter().map(|v| v * 256.0).sum();
        if mass != bbox.area() as f64 {
            mass_fail += 1;
        }
    }
    c.eq(format!("full <= soft <= all ({samples} bboxes)"), 0, order_fail);
    c.eq(format!("soft-bonus mass == bbox area, exact ({samples})"), 0, mass_fail);
    Ok(())
}

/// Runs one layer at a time on the text-guided path; at every SR/ST event also
/// scores with text guidance off from the same encoder state and compares.
fn lockstep_text_guidance(inst: &Instance) -> Result<(usize, usize)> {
    let weights = EncoderWeights::seeded(&inst.config);
    let mut current = inst.batch.clone();
    let mut compared = 0;
    let mut differing = 0;
    let on = &inst.options;
    for layer in 1..=inst.config.num_layers {
        let (out, attn) = encoder_layer(&current.features, &weights.layer(layer - 1), inst.config.num_heads)?;
        current = current.with_features(out)?;
        let mut planned = Vec::new();
        for ev in inst.schedule.events().into_iter().filter(|e| e.layer == layer) {
            let score_with = |targets: TextTargets| -> Result<ImportanceScores> {
                let mut s = score_segment(&attn, &current, &inst.layout, ev.segment)?;
                if targets.contains(ev.segment) {
                    s = fuse_text(&s, &score_text(&attn, &current, ev.segment)?.scores)?;
                }
                if let Some(b) = on.bonus.as_ref().filter(|_| ev.segment == Segment::St) {
                    s = apply_bonus(&s, b, current.original_indices(Segment::St))?;
                }
                Ok(s)
            };
            let guided = score_with(on.text_targets)?;
            if ev.segment != Segment::Dt {
                let plain = score_with(TextTargets::NONE)?;
                let (_, a) = prune(&current, &guided, ev.keep_ratio, &inst.layout)?;
                let (_, b) = prune(&current, &plain, ev.keep_ratio, &inst.layout)?;
                let bits = |s: &ImportanceScores| s.scores.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                compared += 1;
                if a != b || bits(&guided) != bits(&plain) {
                    differing += 1;
                }
            }
            planned.push((guided, ev.keep_ratio));
        }
        for (s, r) in planned {
            current = prune(&current, &s, r, &inst.layout)?.0;
        }
    }
    Ok((compared, differing))
}

fn text_guidance(c: &mut Checks, instances: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e47);
    let mut not_identity = 0;
    for _ in 0..instances {
        let n = rng.gen_range(1..64);
        let base = ImportanceScores {
            segment: Segment::Dt,
            scores: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
            head_count: 1,
        };
        let fused = fuse_text(&base, &vec![0.0; n])?;
        if fused.scores.iter().zip(&base.scores).any(|(a, b)| a.to_bits() != b.to_bits()) {
            not_identity += 1;
        }
    }
    c.eq(format!("fuse_text with zero row is identity ({instances})"), 0, not_identity);

    let mut compared = 0;
    let mut differing = 0;
    for seed in 0..instances as u64 {
        let mut inst = random_instance(seed);
        if inst.layout.n_text == 0 {
            continue;
        }
        inst.options.text_targets = TextTargets::DT_ONLY;
        let (n, d) = lockstep_text_guidance(&inst)?;
        compared += n;
        differing += d;
    }
    let cfg = RunConfig::preset("sutrack224-utp")?.with_width(8, 2);
    let inst = Instance {
        batch: cfg.build_batch()?,
        options: cfg.prune_options()?,
        config: cfg.encoder.clone(),
        layout: cfg.layout,
        schedule: cfg.schedule.clone(),
    };
    let (n, d) = lockstep_text_guidance(&inst)?;
    compared += n;
    differing += d;
    c.push(
        "DT-only guidance leaves SR/ST decisions bitwise unchanged",
        "0 differing",
        format!("{differing} differing of {compared} SR/ST events"),
        differing == 0 && compared > 0,
    );
    Ok(())
}

fn determinism(c: &mut Checks) -> Result<()> {
    for name in ["ostrack256-utp", "sutrack224-utp"] {
        let cfg = RunConfig::preset(name)?.with_width(16, 2);
        let (_, a) = forward_artifacts(name, &cfg)?;
        let (_, b) = forward_artifacts(name, &cfg)?;
        let same = a == b;
        c.push(
            format!("{name} forward artifacts byte-identical"),
            format!("{} files equal", a.len()),
            if same { format!("{} files equal", b.len()) } else { "differ".into() },
            same,
        );
    }
    Ok(())
}

fn inference_policy(c: &mut Checks) -> Result<()> {
    let mut mismatches = 0;
    let mut fired = 0;
    for conf in [0.69, 0.70, 0.71] {
        let mut state = DtUpdateState::default();
        for frame in 1..=1000u64 {
            let got = state.decide(frame, conf);
            let want = frame % 25 == 0 && conf > 0.7;
            fired += usize::from(got);
            mismatches += usize::from(got != want);
        }
    }
    c.eq("sweep 1..=1000 x {0.69, 0.70, 0.71} mismatches", 0, mismatches);
    c.eq("updates fired (40 multiples x conf 0.71 only)", 40, fired);
    Ok(())
}

/// Runs every acceptance criterion.
pub fn run(options: &VerifyOptions) -> VerifyReport {
    let sr = options.keep_ratio_sr;
    let second = Some(Duration::from_secs(1));
    VerifyReport {
        criteria: vec![
            criterion(1, "token tables, RGB tracker", second, |c| token_tables_rgb(c, sr)),
            criterion(2, "token tables, unified tracker", second, |c| token_tables_unified(c, sr)),
            criterion(3, "calibration oracle", second, calibration),
            criterion(4, "MAC trend", second, |c| mac_trend(c, sr)),
            criterion(5, "prune-mask equivalence", None, |c| prune_mask_equivalence(c, options.instances)),
            criterion(6, "trace-budget agreement", None, |c| trace_budget_agreement(c, options.instances)),
            criterion(7, "CTEM unit properties", None, |c| ctem_properties(c, options.samples)),
            criterion(8, "text-guidance behavior", None, |c| text_guidance(c, options.instances)),
            criterion(9, "forward determinism", None, determinism),
            criterion(10, "DT update policy", None, inference_policy),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_respect_bounds() {
        for seed in 0..200 {
            let inst = random_instance(seed);
            let n = inst.batch.len();
            assert!((6..=24).contains(&n), "seed {seed}: {n} tokens");
            assert!((1..=4).contains(&inst.config.num_heads));
            assert!((2..=4).contains(&inst.config.num_layers));
            inst.schedule.validate(inst.config.num_layers).unwrap();
        }
    }

    #[test]
    fn negative_control_fails_token_tables() {
        let mut c = Checks::new();
        token_tables_rgb(&mut c, Some(0.8)).unwrap();
        assert!(c.0.iter().any(|k| !k.passed));
        let mut c = Checks::new();
        token_tables_rgb(&mut c, None).unwrap();
        assert!(c.0.iter().all(|k| k.passed), "{:?}", c.0);
    }
}
