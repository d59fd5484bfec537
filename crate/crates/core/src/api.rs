//! Request and response bodies shared by the HTTP service, its client, and the CLI.

use serde::{Deserialize, Serialize};

use crate::budget::{BudgetReport, Calibration};
use crate::config::{parse_preset, RunConfig};
use crate::error::{Error, Result};
use crate::layout::Segment;
use crate::numerics::Matrix;
use crate::policy::DtUpdateState;
use crate::report::{Artifact, TraceDocument};
use crate::verify::{VerifyOptions, VerifyReport};

/// Selects a configuration: a named preset, or a full config document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    #[serde(default)]
    pub no_prune: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Narrower encoder for quick runs; token geometry is unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_heads: Option<usize>,
    /// Overrides the label derived from the preset name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl RunRequest {
    pub fn preset(name: &str) -> Self {
        Self { preset: Some(name.to_string()), ..Self::default() }
    }

    /// Label used in summary rows and output directory names.
    pub fn label(&self) -> String {
        let base = match (&self.label, &self.preset) {
            (Some(l), _) => l.clone(),
            (None, Some(p)) => p.clone(),
            (None, None) => "custom".to_string(),
        };
        if self.no_prune {
            format!("{base}-noprune")
        } else {
            base
        }
    }

    /// Expands the request into a validated config.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.preset, &self.config) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig("give either a preset or a config, not both".into()))
            }
            (Some(name), None) => RunConfig::preset(name)?,
            (None, Some(cfg)) => cfg.clone(),
            (None, None) => return Err(Error::InvalidConfig("a preset or a config is required".into())),
        };
        if self.no_prune {
            cfg = cfg.without_pruning();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        match (self.embed_dim, self.num_heads) {
            (None, None) => {}
            (d, h) => {
                let d = d.unwrap_or(cfg.encoder.embed_dim);
                let h = h.unwrap_or(cfg.encoder.num_heads);
                cfg = cfg.with_width(d, h);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResponse {
    pub label: String,
    pub report: BudgetReport,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardResponse {
    pub label: String,
    pub trace: TraceDocument,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneVizResponse {
    pub label: String,
    pub artifacts: Vec<Artifact>,
}

/// Searches the keep-ratio grid for one segment. Event layers default to the
/// preset's schedule for that segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateRequest {
    pub preset: String,
    pub segment: Segment,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_layers: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateResponse {
    pub preset: String,
    pub segment: Segment,
    pub target: usize,
    pub event_layers: Vec<usize>,
    pub solutions: Vec<Calibration>,
}

impl CalibrateRequest {
    pub fn run(&self) -> Result<CalibrateResponse> {
        let cfg = RunConfig::preset(&self.preset)?;
        let layers = match &self.event_layers {
            Some(l) => l.clone(),
            None => {
                // Full-stage schedule of the same model when the preset itself prunes nothing.
                let (model, _) = parse_preset(&self.preset)?;
                let s = crate::config::default_schedule(model, crate::config::Stage::Full);
                let from = |own: &Vec<usize>, full: Vec<usize>| if own.is_empty() { full } else { own.clone() };
                match self.segment {
                    Segment::Sr => from(&cfg.schedule.ce_layers, s.ce_layers),
                    Segment::Dt => from(&cfg.schedule.dte_layers, s.dte_layers),
                    Segment::St => from(&cfg.schedule.ste_layers, s.ste_layers),
                    Segment::Text => return Err(Error::TextNotPrunable),
                }
            }
        };
        let solutions = crate::budget::calibrate_keep_ratios(
            &cfg.layout,
            cfg.encoder.num_layers,
            self.segment,
            &layers,
            self.target,
        )?;
        Ok(CalibrateResponse {
            preset: self.preset.clone(),
            segment: self.segment,
            target: self.target,
            event_layers: layers,
            solutions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerifyRequest {
    #[serde(default)]
    pub options: VerifyOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub passed: bool,
    pub report: VerifyReport,
}

/// Opens a tracking session holding its own dynamic-template update state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRequest {
    #[serde(default = "default_interval")]
    pub update_interval: u64,
    #[serde(default = "default_threshold")]
    pub confidence_threshold: f64,
}

fn default_interval() -> u64 {
    crate::policy::DEFAULT_UPDATE_INTERVAL
}

fn default_threshold() -> f64 {
    crate::policy::DEFAULT_CONFIDENCE_THRESHOLD
}

impl Default for SessionRequest {
    fn default() -> Self {
        Self { update_interval: default_interval(), confidence_threshold: default_threshold() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResponse {
    pub id: String,
    pub state: DtUpdateState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRequest {
    pub frame_index: u64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResponse {
    pub update: bool,
    pub state: DtUpdateState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRequest {
    pub score_map: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyResponse {
    pub score_map: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_rules() {
        assert!(RunRequest::default().resolve().is_err());
        let both =
            RunRequest { config: Some(RunConfig::preset("ostrack256").unwrap()), ..RunRequest::preset("ostrack256") };
        assert!(both.resolve().is_err());

        let r = RunRequest {
            no_prune: true,
            seed: Some(9),
            embed_dim: Some(8),
            num_heads: Some(2),
            ..RunRequest::preset("ostrack256-utp")
        };
        let cfg = r.resolve().unwrap();
        assert!(cfg.schedule.is_empty());
        assert_eq!((cfg.seed, cfg.encoder.embed_dim, cfg.layout.embed_dim), (9, 8, 8));
        assert_eq!(r.label(), "ostrack256-utp-noprune");
    }

    #[test]
    fn calibrate_defaults_to_preset_layers() {
        let req =
            CalibrateRequest { preset: "ostrack256".into(), segment: Segment::Sr, target: 89, event_layers: None };
        let resp = req.run().unwrap();
        assert_eq!(resp.event_layers, vec![3, 6, 9]);
        assert_eq!(resp.solutions.len(), 1);
        assert_eq!(resp.solutions[0].keep_ratio, 0.7);
    }

    #[test]
    fn run_request_json_is_compact() {
        let json = serde_json::to_string(&RunRequest::preset("sutrack224")).unwrap();
        assert_eq!(json, r#"{"preset":"sutrack224","no_prune":false}"#);
        let back: RunRequest = serde_json::from_str(r#"{"preset":"sutrack224"}"#).unwrap();
        assert_eq!(back, RunRequest::preset("sutrack224"));
    }
}
