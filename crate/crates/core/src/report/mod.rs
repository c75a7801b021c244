//! Command orchestration, the run manifest and static SVG plots.
//!
//! Each stage writes under `<out>/<stage>/` and records its outputs in
//! `<out>/manifest.json`.

pub mod commands;
pub mod manifest;
pub mod svg;

pub use commands::{cmd_explore, cmd_prepare, cmd_report, cmd_run, cmd_search, cmd_validate, RunOptions};
pub use manifest::{RunManifest, StageRecord};
