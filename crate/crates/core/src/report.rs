//! Output files of the `schedule`, `forward`, and `prune-viz` commands, built
//! in memory so the CLI and the HTTP service emit byte-identical artifacts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::budget::{budget_report, round_to, BudgetReport};
use crate::config::RunConfig;
use crate::ctem::PruneDecision;
use crate::encoder::{forward, LayerTrace, SeededWeights};
use crate::error::Result;
use crate::fixture;
use crate::layout::{Grid, Segment, SegmentLayout};

/// One output file, path relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    #[serde(with = "base64_bytes")]
    pub bytes: Vec<u8>,
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

impl Artifact {
    fn text(path: impl Into<String>, body: String) -> Self {
        Self { path: path.into(), bytes: body.into_bytes() }
    }
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    for a in artifacts {
        let path = dir.join(&a.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, &a.bytes)?;
    }
    Ok(())
}

/// Per-layer CSV and the one-row summary CSV.
pub fn schedule_artifacts(label: &str, config: &RunConfig) -> Result<(BudgetReport, Vec<Artifact>)> {
    config.validate()?;
    let enc = &config.encoder;
    let report = budget_report(&config.layout, enc.num_layers, enc.embed_dim, enc.mlp_ratio, &config.schedule)?;

    let mut layers = String::from("layer,sr,st,dt,text,vision_tokens,total_tokens\n");
    for (i, c) in report.per_layer.iter().enumerate() {
        writeln!(layers, "{},{},{},{},{},{},{}", i + 1, c.sr, c.st, c.dt, c.text, c.vision(), c.total()).unwrap();
    }
    let mut summary =
        String::from("config,avg_vis_tok,avg_vis_tok_1dp,cmp_vis_tok,macs_g,baseline_macs_g,reduction_pct\n");
    writeln!(
        summary,
        "{label},{:.0},{:.1},{},{:.3},{:.3},{:.2}",
        round_to(report.avg_vis_tok, 0),
        round_to(report.avg_vis_tok, 1),
        report.cmp_vis_tok,
        report.macs_total / 1e9,
        report.macs_baseline / 1e9,
        report.reduction_pct
    )
    .unwrap();
    let json = serde_json::to_string_pretty(&report)?;
    Ok((
        report,
        vec![
            Artifact::text("schedule_layers.csv", layers),
            Artifact::text("schedule_summary.csv", summary),
            Artifact::text("budget.json", json + "\n"),
        ],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub label: String,
    pub config: RunConfig,
    pub layers: Vec<LayerTrace>,
    pub final_sr_tokens: usize,
}

/// Tokens still alive after one prune stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageMask {
    pub stage: usize,
    pub layer: usize,
    pub sr: BTreeSet<usize>,
    pub st: BTreeSet<usize>,
    pub dt: BTreeSet<usize>,
}

/// Replays the decisions to get the surviving tokens after each stage. A stage
/// is a layer with at least one prune event. With no events a single stage 0
/// holds the untouched sequence.
pub fn stage_masks(layout: &SegmentLayout, traces: &[LayerTrace]) -> Vec<StageMask> {
    let mut current = StageMask {
        stage: 0,
        layer: 0,
        sr: (0..layout.n_sr).collect(),
        st: (0..layout.n_st).collect(),
        dt: (0..layout.n_dt).collect(),
    };
    let mut stages = Vec::new();
    for t in traces.iter().filter(|t| !t.prune_events.is_empty()) {
        for d in &t.prune_events {
            let set = match d.segment {
                Segment::Sr => &mut current.sr,
                Segment::St => &mut current.st,
                Segment::Dt => &mut current.dt,
                Segment::Text => continue,
            };
            *set = d.kept_original_indices.iter().copied().collect();
        }
        current.stage += 1;
        current.layer = t.layer_index;
        stages.push(current.clone());
    }
    if stages.is_empty() {
        stages.push(current);
    }
    stages
}

pub const MASK_CELL: usize = 8;
const KEPT: u8 = 255;
const PRUNED: u8 = 0;
const BACKGROUND: u8 = 128;

/// Binary PGM: search region on top, static template bottom-left, dynamic
/// template bottom-right. One `MASK_CELL`-pixel square per token.
pub fn render_mask(layout: &SegmentLayout, mask: &StageMask) -> Vec<u8> {
    let (sr, tg) = (layout.sr_grid, layout.tmpl_grid);
    let width = sr.cols.max(2 * tg.cols) * MASK_CELL;
    let height = (sr.rows + tg.rows) * MASK_CELL;
    let mut pixels = vec![BACKGROUND; width * height];
    let mut paint = |grid: Grid, alive: &BTreeSet<usize>, x0: usize, y0: usize| {
        for idx in 0..grid.len() {
            let (r, c) = (idx / grid.cols, idx % grid.cols);
            let v = if alive.contains(&idx) { KEPT } else { PRUNED };
            for y in 0..MASK_CELL {
                let row = y0 + r * MASK_CELL + y;
                let start = row * width + x0 + c * MASK_CELL;
                pixels[start..start + MASK_CELL].fill(v);
            }
        }
    };
    paint(sr, &mask.sr, 0, 0);
    paint(tg, &mask.st, 0, sr.rows * MASK_CELL);
    paint(tg, &mask.dt, tg.cols * MASK_CELL, sr.rows * MASK_CELL);

    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    out
}

fn mask_artifacts(layout: &SegmentLayout, traces: &[LayerTrace]) -> Vec<Artifact> {
    stage_masks(layout, traces)
        .iter()
        .map(|m| Artifact {
            path: format!("masks/stage{}_layer{}.pgm", m.stage, m.layer),
            bytes: render_mask(layout, m),
        })
        .collect()
}

fn kept_index_csv(traces: &[LayerTrace]) -> String {
    let mut csv = String::from("stage,layer,segment,original_index,kept\n");
    let mut stage = 0;
    for t in traces.iter().filter(|t| !t.prune_events.is_empty()) {
        stage += 1;
        for PruneDecision { segment, kept_original_indices, dropped_original_indices } in &t.prune_events {
            let mut rows: Vec<(usize, u8)> = kept_original_indices
                .iter()
                .map(|&i| (i, 1))
                .chain(dropped_original_indices.iter().map(|&i| (i, 0)))
                .collect();
            rows.sort_unstable();
            for (i, kept) in rows {
                writeln!(csv, "{stage},{},{segment},{i},{kept}", t.layer_index).unwrap();
            }
        }
    }
    csv
}

/// Runs the encoder and packages trace, kept-index map, restored features, and masks.
pub fn forward_artifacts(label: &str, config: &RunConfig) -> Result<(TraceDocument, Vec<Artifact>)> {
    config.validate()?;
    let batch = config.build_batch()?;
    let out = forward(
        &config.encoder,
        &SeededWeights(config.encoder.clone()),
        &config.layout,
        &batch,
        &config.schedule,
        &config.prune_options()?,
    )?;
    let doc = TraceDocument {
        label: label.to_string(),
        config: config.clone(),
        final_sr_tokens: out.final_batch.count(Segment::Sr),
        layers: out.traces,
    };
    let mut artifacts = vec![
        Artifact::text("trace.json", serde_json::to_string_pretty(&doc)? + "\n"),
        Artifact::text("kept_indices.csv", kept_index_csv(&doc.layers)),
        Artifact { path: "restored_sr.utpf".into(), bytes: fixture::encode(&out.restored_sr) },
    ];
    artifacts.extend(mask_artifacts(&config.layout, &doc.layers));
    Ok((doc, artifacts))
}

/// Only the keep masks of a forward run.
pub fn prune_viz_artifacts(label: &str, config: &RunConfig) -> Result<Vec<Artifact>> {
    let (_, artifacts) = forward_artifacts(label, config)?;
    Ok(artifacts.into_iter().filter(|a| a.path.starts_with("masks/")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk(name: &str) -> RunConfig {
        RunConfig::preset(name).unwrap().with_width(8, 2)
    }

    #[test]
    fn schedule_summary_rows() {
        let (r, arts) = schedule_artifacts("ostrack256-utp", &RunConfig::preset("ostrack256-utp").unwrap()).unwrap();
        assert_eq!((round_to(r.avg_vis_tok, 0), r.cmp_vis_tok), (252.0, 135));
        let summary = String::from_utf8(arts[1].bytes.clone()).unwrap();
        assert!(summary.lines().nth(1).unwrap().starts_with("ostrack256-utp,252,251.6,135,"), "{summary}");
        let layers = String::from_utf8(arts[0].bytes.clone()).unwrap();
        assert_eq!(layers.lines().count(), 13);
    }

    #[test]
    fn six_stage_masks_for_default_schedule() {
        let (_, arts) = forward_artifacts("x", &desk("ostrack256-utp")).unwrap();
        let masks: Vec<_> = arts.iter().filter(|a| a.path.starts_with("masks/")).collect();
        assert_eq!(masks.len(), 6);
        let header = b"P5\n128 192\n255\n";
        assert!(masks.iter().all(|m| m.bytes.starts_with(header)));
        assert_eq!(masks[0].bytes.len(), header.len() + 128 * 192);
    }

    #[test]
    fn no_prune_masks_are_white() {
        let (_, arts) = forward_artifacts("x", &desk("ostrack256-utp").without_pruning()).unwrap();
        let masks: Vec<_> = arts.iter().filter(|a| a.path.starts_with("masks/")).collect();
        assert_eq!(masks.len(), 1);
        let header_len = b"P5\n128 192\n255\n".len();
        assert!(masks[0].bytes[header_len..].iter().all(|&p| p == 255));
    }

    #[test]
    fn kept_index_map_covers_each_event() {
        let (doc, arts) = forward_artifacts("x", &desk("ostrack256-ce")).unwrap();
        let csv = String::from_utf8(arts[1].bytes.clone()).unwrap();
        // 256 + 180 + 126 rows for the three CE stages, plus header
        assert_eq!(csv.lines().count(), 1 + 256 + 180 + 126);
        assert_eq!(doc.final_sr_tokens, 89);
    }

    #[test]
    fn artifacts_serialize_as_base64() {
        let a = Artifact { path: "x.bin".into(), bytes: vec![0, 1, 2, 255] };
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, r#"{"path":"x.bin","bytes":"AAEC/w=="}"#);
        assert_eq!(serde_json::from_str::<Artifact>(&json).unwrap(), a);
    }
}
