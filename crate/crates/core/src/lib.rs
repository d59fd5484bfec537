//! Token elimination for one-stream transformer trackers: token layout,
//! attention-based importance scoring and pruning, a reference encoder, token
//! and MAC budgets, and the acceptance checks.

pub mod api;
pub mod budget;
pub mod config;
pub mod ctem;
pub mod encoder;
pub mod error;
pub mod fixture;
pub mod layout;
pub mod numerics;
pub mod oracle;
pub mod policy;
pub mod report;
pub mod verify;

pub use budget::{budget_report, calibrate_keep_ratios, estimate_macs, token_schedule, BudgetReport, PruningSchedule};
pub use config::RunConfig;
pub use ctem::{prune, restore_and_pad, ImportanceScores, PruneDecision};
pub use encoder::{forward, EncoderConfig, ForwardOutput, PruneOptions};
pub use error::{Error, Result};
pub use layout::{ModelPreset, Segment, SegmentLayout, TokenBatch};
pub use numerics::Matrix;
