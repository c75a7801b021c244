use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Paths relative to the run directory, sorted.
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    /// Wall-clock seconds; omitted in reproducible mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

/// Everything needed to rerun a run directory: the configuration (with
/// `out` set to the manifest's own directory), the master seed, and the
/// list of files each stage produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub stages: BTreeMap<String, StageRecord>,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig) -> Self {
        let mut config = cfg.clone();
        config.out = PathBuf::from(".");
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config,
            stages: BTreeMap::new(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn path(out: &Path) -> PathBuf {
        out.join(MANIFEST_FILE)
    }

    pub fn load(out: &Path) -> Result<Option<Self>> {
        let path = Self::path(out);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    /// Replace one stage's record and refresh the artifact and warning
    /// lists. The config snapshot is updated to `cfg`.
    pub fn record(&mut self, cfg: &RunConfig, stage: &str, mut rec: StageRecord) {
        let fresh = RunManifest::new(cfg);
        self.seed = fresh.seed;
        self.config = fresh.config;
        self.version = fresh.version;
        rec.outputs.sort();
        rec.outputs.dedup();
        rec.warnings.sort();
        rec.warnings.dedup();
        self.stages.insert(stage.to_string(), rec);
        self.artifacts = self.stages.values().flat_map(|s| s.outputs.iter().cloned()).collect();
        self.artifacts.sort();
        self.artifacts.dedup();
        self.warnings = self.stages.values().flat_map(|s| s.warnings.iter().cloned()).collect();
        self.warnings.sort();
        self.warnings.dedup();
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let path = Self::path(out);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_is_a_valid_config() {
        let cfg = RunConfig::from_json(r#"{"data": "/tmp/x.csv", "out": "/tmp/run", "seed": 9}"#).unwrap();
        let mut m = RunManifest::new(&cfg);
        m.record(
            &cfg,
            "search",
            StageRecord { outputs: vec!["search/b.csv".into(), "search/a.csv".into()], warnings: vec![], seconds: None },
        );
        m.record(&cfg, "prepare", StageRecord { outputs: vec!["prepare/x.csv".into()], warnings: vec!["w".into()], seconds: None });
        assert_eq!(m.artifacts, vec!["prepare/x.csv", "search/a.csv", "search/b.csv"]);
        assert_eq!(m.warnings, vec!["w"]);
        let text = serde_json::to_string(&m).unwrap();
        assert!(!text.contains("seconds"));
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back.seed, 9);
        assert_eq!(back.out, PathBuf::from("."));
        assert_eq!(back.data, cfg.data);
    }
}
