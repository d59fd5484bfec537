//! Run configuration: one JSON document, presets expanded to explicit values.

use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::budget::PruningSchedule;
use crate::encoder::{EncoderConfig, PruneOptions, TextTargets};
use crate::error::{Error, Result};
use crate::fixture;
use crate::layout::{
    assemble_batch, BBox, BonusMode, ForegroundBonus, ModelPreset, Segment, SegmentLayout, TokenBatch,
};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonusConfig {
    pub mode: BonusMode,
    pub weight: f64,
    /// Defaults to the centered half-size box when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
}

impl Default for BonusConfig {
    fn default() -> Self {
        Self { mode: BonusMode::Off, weight: 1.0, bbox: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TextGuidance {
    #[serde(default)]
    pub targets: TextTargets,
    /// Use a seeded fixed vector in place of an encoded sentence.
    #[serde(default)]
    pub dummy_text: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FixturePaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sr: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub st: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IoConfig {
    #[serde(default)]
    pub fixtures: FixturePaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub layout: SegmentLayout,
    pub encoder: EncoderConfig,
    pub schedule: PruningSchedule,
    #[serde(default)]
    pub bonus: BonusConfig,
    #[serde(default)]
    pub text_guidance: TextGuidance,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub io: IoConfig,
}

/// How much of the elimination pipeline a preset switches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Baseline,
    Ce,
    CeDte,
    CeDteSte,
    /// Everything, plus the foreground bonus and (unified trackers) text guidance.
    Full,
}

impl Stage {
    fn suffix(self) -> &'static str {
        match self {
            Stage::Baseline => "",
            Stage::Ce => "-ce",
            Stage::CeDte => "-ce-dte",
            Stage::CeDteSte => "-ce-dte-ste",
            Stage::Full => "-utp",
        }
    }
}

/// Default schedule of a model family.
pub fn default_schedule(preset: ModelPreset, stage: Stage) -> PruningSchedule {
    let (ce, tmpl, tmpl_ratio) = if preset.is_unified() {
        (vec![6, 12, 18], vec![9, 15, 21], 0.6)
    } else {
        (vec![3, 6, 9], vec![4, 7, 10], 0.7)
    };
    let on = |enabled: bool, layers: &Vec<usize>| if enabled { layers.clone() } else { Vec::new() };
    PruningSchedule {
        ce_layers: on(stage != Stage::Baseline, &ce),
        dte_layers: on(matches!(stage, Stage::CeDte | Stage::CeDteSte | Stage::Full), &tmpl),
        ste_layers: on(matches!(stage, Stage::CeDteSte | Stage::Full), &tmpl),
        keep_ratio_sr: 0.7,
        keep_ratio_dt: tmpl_ratio,
        keep_ratio_st: tmpl_ratio,
    }
}

/// Names accepted by `--preset`: a model name with an optional stage suffix.
pub fn preset_names() -> Vec<String> {
    let stages = [Stage::Baseline, Stage::Ce, Stage::CeDte, Stage::CeDteSte, Stage::Full];
    ModelPreset::ALL.iter().flat_map(|m| stages.iter().map(move |s| format!("{}{}", m.name(), s.suffix()))).collect()
}

pub fn parse_preset(name: &str) -> Result<(ModelPreset, Stage)> {
    for stage in [Stage::Full, Stage::CeDteSte, Stage::CeDte, Stage::Ce] {
        if let Some(model) = name.strip_suffix(stage.suffix()) {
            if let Ok(m) = ModelPreset::from_str(model) {
                return Ok((m, stage));
            }
        }
    }
    ModelPreset::from_str(name)
        .map(|m| (m, Stage::Baseline))
        .map_err(|_| Error::InvalidConfig(format!("unknown preset {name:?}; known: {}", preset_names().join(", "))))
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let (model, stage) = parse_preset(name)?;
        let layout = model.layout();
        let full = stage == Stage::Full;
        let bonus = if full {
            BonusConfig { mode: BonusMode::Soft, weight: 1.0, bbox: Some(BBox::centered(layout.template_side())) }
        } else {
            BonusConfig::default()
        };
        let text_guidance = TextGuidance {
            targets: if full && model.is_unified() { TextTargets::DT_ONLY } else { TextTargets::NONE },
            dummy_text: model.is_unified(),
        };
        Ok(Self {
            layout,
            encoder: EncoderConfig::preset(model),
            schedule: default_schedule(model, stage),
            bonus,
            text_guidance,
            seed: 0,
            io: IoConfig::default(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Drops every prune event (and with it the bonus and text guidance).
    pub fn without_pruning(mut self) -> Self {
        self.schedule = PruningSchedule::empty();
        self.bonus.mode = BonusMode::Off;
        self.text_guidance.targets = TextTargets::NONE;
        self
    }

    /// Shrinks the encoder width so a forward pass is cheap; token geometry
    /// and the schedule are untouched.
    pub fn with_width(mut self, embed_dim: usize, num_heads: usize) -> Self {
        self.layout.embed_dim = embed_dim;
        self.encoder.embed_dim = embed_dim;
        self.encoder.num_heads = num_heads;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.encoder.validate()?;
        if self.layout.embed_dim != self.encoder.embed_dim {
            return Err(Error::InvalidConfig(format!(
                "layout embed_dim {} != encoder embed_dim {}",
                self.layout.embed_dim, self.encoder.embed_dim
            )));
        }
        self.schedule.validate(self.encoder.num_layers).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self.bonus.mode != BonusMode::Off {
            if !(self.bonus.weight.is_finite() && self.bonus.weight >= 0.0) {
                return Err(Error::InvalidConfig(format!("bonus weight {} must be >= 0", self.bonus.weight)));
            }
            self.bbox().validate(self.layout.template_side())?;
            if !self.layout.template_side().is_multiple_of(self.layout.patch_size) {
                return Err(Error::InvalidConfig("template side not divisible by patch size".into()));
            }
        }
        if self.text_guidance.targets.any() && self.layout.n_text == 0 {
            return Err(Error::InvalidConfig("text guidance needs a layout with a text token".into()));
        }
        if self.layout.n_text == 1 && !self.text_guidance.dummy_text && self.io.fixtures.text.is_none() {
            return Err(Error::InvalidConfig(
                "layout has a text token: set text_guidance.dummy_text or io.fixtures.text".into(),
            ));
        }
        Ok(())
    }

    pub fn bbox(&self) -> BBox {
        self.bonus.bbox.unwrap_or_else(|| BBox::centered(self.layout.template_side()))
    }

    pub fn prune_options(&self) -> Result<PruneOptions> {
        let bonus = match self.bonus.mode {
            BonusMode::Off => None,
            mode => Some(ForegroundBonus::from_bbox(&self.layout, &self.bbox(), mode, self.bonus.weight)?),
        };
        Ok(PruneOptions { bonus, text_targets: self.text_guidance.targets })
    }

    /// Token embeddings from fixtures where given, seeded noise elsewhere.
    pub fn build_batch(&self) -> Result<TokenBatch> {
        self.validate()?;
        let l = &self.layout;
        let load = |segment: Segment, path: &Option<PathBuf>, rows: usize| -> Result<Matrix> {
            match path {
                Some(p) => {
                    let m = fixture::read(p)?;
                    if m.shape() != (rows, l.embed_dim) {
                        return Err(Error::Fixture(format!(
                            "{}: {segment} fixture is {}x{}, expected {rows}x{}",
                            p.display(),
                            m.rows(),
                            m.cols(),
                            l.embed_dim
                        )));
                    }
                    Ok(m)
                }
                None => Ok(seeded_matrix(self.seed, segment, rows, l.embed_dim)),
            }
        };
        let f = &self.io.fixtures;
        let sr = load(Segment::Sr, &f.sr, l.n_sr)?;
        let st = load(Segment::St, &f.st, l.n_st)?;
        let dt = load(Segment::Dt, &f.dt, l.n_dt)?;
        let text = if l.n_text == 1 { Some(load(Segment::Text, &f.text, 1)?) } else { None };
        assemble_batch(l, &sr, &st, &dt, text.as_ref().map(|t| t.row(0)))
    }
}

/// Uniform `[-1, 1)` values, one ChaCha stream per segment.
pub fn seeded_matrix(seed: u64, segment: Segment, rows: usize, cols: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(segment as u64 + 1);
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::new(rows, cols, data).expect("sized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn every_preset_is_valid() {
        for name in preset_names() {
            let cfg = RunConfig::preset(&name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(RunConfig::preset("ostrack999").is_err());
        assert!(RunConfig::preset("ostrack256-foo").is_err());
    }

    #[test]
    fn utp_presets() {
        let cfg = RunConfig::preset("sutrack224-utp").unwrap();
        assert_eq!(cfg.text_guidance.targets, TextTargets::DT_ONLY);
        assert_eq!(cfg.bonus.mode, BonusMode::Soft);
        assert_eq!(cfg.schedule.ste_layers, vec![9, 15, 21]);
        assert_eq!(cfg.schedule.keep_ratio_dt, 0.6);
        let rgb = RunConfig::preset("ostrack256-utp").unwrap();
        assert_eq!(rgb.text_guidance.targets, TextTargets::NONE);
        assert_eq!(rgb.bbox(), BBox::new(32, 32, 64, 64));
        assert!(RunConfig::preset("ostrack256").unwrap().schedule.is_empty());
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut cfg = RunConfig::preset("ostrack256-utp").unwrap();
        cfg.encoder.embed_dim = 64;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::preset("ostrack256-utp").unwrap();
        cfg.schedule.ce_layers = vec![13];
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::preset("ostrack256").unwrap();
        cfg.text_guidance.targets = TextTargets::DT_ONLY;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::preset("sutrack224").unwrap();
        cfg.text_guidance.dummy_text = false;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::preset("ostrack256-utp").unwrap();
        cfg.bonus.bbox = Some(BBox::new(100, 0, 64, 64));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        for name in ["ostrack256-utp", "sutrack384-ce"] {
            let mut cfg = RunConfig::preset(name).unwrap();
            cfg.io.out_dir = Some("out".into());
            let parsed = RunConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(parsed, cfg);
            assert_eq!(parsed.to_json(), cfg.to_json());
        }
    }

    #[test]
    fn seeded_batch_is_deterministic() {
        let cfg = RunConfig::preset("sutrack224-utp").unwrap().with_width(8, 2);
        let a = cfg.build_batch().unwrap();
        assert_eq!(a, cfg.build_batch().unwrap());
        assert_eq!(a.len(), 295);
        let other = RunConfig { seed: 1, ..cfg.clone() }.build_batch().unwrap();
        assert_ne!(a.features, other.features);
    }

    #[test]
    fn fixture_shape_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sr.utpf");
        fixture::write(&p, &Matrix::zeros(3, 8)).unwrap();
        let mut cfg = RunConfig::preset("ostrack256").unwrap().with_width(8, 2);
        cfg.io.fixtures.sr = Some(p);
        assert!(matches!(cfg.build_batch(), Err(Error::Fixture(_))));
    }

    proptest! {
        #[test]
        fn arbitrary_schedule_round_trips(
            ce in prop::collection::btree_set(1usize..=12, 0..4),
            sr in 0.05f64..=1.0,
            seed in any::<u64>(),
        ) {
            let mut cfg = RunConfig::preset("ostrack256-ce").unwrap();
            cfg.schedule.ce_layers = ce.into_iter().collect();
            cfg.schedule.keep_ratio_sr = sr;
            cfg.seed = seed;
            let parsed = RunConfig::from_json(&cfg.to_json()).unwrap();
            prop_assert_eq!(parsed, cfg);
        }
    }
}
