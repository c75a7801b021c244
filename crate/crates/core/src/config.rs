//! Run configuration: a strict JSON document holding the pipeline grid,
//! clustering grid, resampling parameters and output location.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterMethod, ClustererSpec};
use crate::dataset::Schema;
use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::preprocess::{FeatureSet, ForestImputeOptions, ImputerKind, QualityFilter};

/// A feature set given either as a tier name or as an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureChoice {
    Tier(String),
    Custom { name: String, columns: Vec<String> },
}

impl FeatureChoice {
    pub fn resolve(&self) -> Result<FeatureSet> {
        match self {
            FeatureChoice::Tier(t) => FeatureSet::tier(t)
                .ok_or_else(|| Error::Config(format!("unknown feature tier `{t}` (expected small7, medium11 or large19)"))),
            FeatureChoice::Custom { name, columns } => {
                if columns.is_empty() {
                    return Err(Error::Config(format!("feature set `{name}` has no columns")));
                }
                Ok(FeatureSet::custom(name.clone(), columns.clone()))
            }
        }
    }
}

/// An optional embedder; `"none"` means cluster the standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EmbedderChoice(pub Option<Embedder>);

impl TryFrom<String> for EmbedderChoice {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        if s == "none" {
            Ok(EmbedderChoice(None))
        } else {
            Ok(EmbedderChoice(Some(s.parse()?)))
        }
    }
}

impl From<EmbedderChoice> for String {
    fn from(e: EmbedderChoice) -> String {
        e.0.map_or_else(|| "none".to_string(), |e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub fraction: f64,
    /// Released id lists; when both are set they replace the random split.
    pub train_ids: Option<PathBuf>,
    pub test_ids: Option<PathBuf>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            fraction: 0.8,
            train_ids: None,
            test_ids: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExploreConfig {
    pub pca: bool,
    pub perplexities: Vec<f64>,
    pub retention_ks: Vec<usize>,
    /// Externally computed embeddings (`id,x,y` CSV) to compare against.
    pub external: Vec<PathBuf>,
    /// Perplexity of the embedding drawn in the scatter plots.
    pub plot_perplexity: f64,
    pub plot_features: FeatureChoice,
    pub plot_imputer: ImputerKind,
    /// Replace the embedding grid by the identity embedding (retention 1).
    pub identity_self_test: bool,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            pca: true,
            perplexities: vec![10.0, 30.0, 60.0, 100.0, 300.0],
            retention_ks: vec![10, 30, 60, 100, 300, 1000],
            external: Vec::new(),
            plot_perplexity: 100.0,
            plot_features: FeatureChoice::Tier("medium11".into()),
            plot_imputer: ImputerKind::Mean,
            identity_self_test: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub snr_min: Vec<f64>,
    pub logg_max: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            snr_min: vec![30.0, 50.0, 70.0, 90.0, 110.0, 130.0, 150.0],
            logg_max: vec![3.0, 3.3, 3.6, 3.9, 4.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusConfig {
    /// Cluster a random fraction of rows per pipeline instead of all rows.
    pub subsample: Option<f64>,
    /// Repetitions per pipeline when subsampling.
    pub reps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: PathBuf,
    pub schema: Schema,
    pub filter: QualityFilter,
    pub features: Vec<FeatureChoice>,
    pub imputers: Vec<ImputerKind>,
    pub embedders: Vec<EmbedderChoice>,
    pub clusterers: Vec<ClusterMethod>,
    pub ks: Vec<usize>,
    #[serde(rename = "B")]
    pub b: usize,
    pub pi: f64,
    /// Re-run preprocessing on every subsample in the stability search
    /// instead of subsetting pipelines applied once to all rows.
    pub stability_refit: bool,
    pub seed: u64,
    pub out: PathBuf,
    pub split: SplitConfig,
    pub forest_imputer: ForestImputeOptions,
    /// Trees in the generalizability classifier.
    pub classifier_trees: usize,
    pub explore: ExploreConfig,
    pub sweep: SweepConfig,
    pub consensus: ConsensusConfig,
    /// Manual model choice that bypasses the stability argmax.
    pub selection: Option<ClustererSpec>,
    /// Maximum heatmap side before rows are downsampled.
    pub plot_cap: usize,
    /// Validate generalizability with the training set as its own test set
    /// and a memorizing classifier.
    pub self_check: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: PathBuf::new(),
            schema: Schema::default(),
            filter: QualityFilter::default(),
            features: ["small7", "medium11", "large19"].map(|t| FeatureChoice::Tier(t.into())).to_vec(),
            imputers: vec![ImputerKind::Mean, ImputerKind::Forest],
            embedders: vec![EmbedderChoice(None)],
            clusterers: ClusterMethod::default_grid(),
            ks: (2..=30).collect(),
            b: 100,
            pi: 0.8,
            stability_refit: false,
            seed: 0,
            out: PathBuf::from("out"),
            split: SplitConfig::default(),
            forest_imputer: ForestImputeOptions::default(),
            classifier_trees: 100,
            explore: ExploreConfig::default(),
            sweep: SweepConfig::default(),
            consensus: ConsensusConfig::default(),
            selection: None,
            plot_cap: 2000,
            self_check: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.data.as_os_str().is_empty() {
            return bad("`data` path is required".into());
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return bad(format!("pi = {} must lie in (0, 1)", self.pi));
        }
        if self.b == 0 {
            return bad("B must be at least 1".into());
        }
        if self.ks.is_empty() {
            return bad("`ks` is empty".into());
        }
        if let Some(k) = self.ks.iter().find(|&&k| k < 2) {
            return bad(format!("k = {k} is below 2"));
        }
        if !(self.split.fraction > 0.0 && self.split.fraction < 1.0) {
            return bad(format!("split fraction {} must lie in (0, 1)", self.split.fraction));
        }
        if self.split.train_ids.is_some() != self.split.test_ids.is_some() {
            return bad("split.train_ids and split.test_ids must be given together".into());
        }
        if self.features.is_empty() || self.imputers.is_empty() || self.embedders.is_empty() {
            return bad("feature, imputer and embedder lists must be nonempty".into());
        }
        if self.clusterers.is_empty() {
            return bad("`clusterers` is empty".into());
        }
        for f in &self.features {
            f.resolve()?;
        }
        if let Some(s) = self.consensus.subsample {
            if !(s > 0.0 && s <= 1.0) {
                return bad(format!("consensus.subsample = {s} must lie in (0, 1]"));
            }
        }
        if let Some(s) = &self.selection {
            if s.k < 2 {
                return bad(format!("selection k = {} is below 2", s.k));
            }
        }
        if self.classifier_trees == 0 || self.forest_imputer.trees == 0 {
            return bad("tree counts must be positive".into());
        }
        Ok(())
    }

    /// Make relative paths absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data);
        fix(&mut self.out);
        if let Some(p) = self.split.train_ids.as_mut() {
            fix(p);
        }
        if let Some(p) = self.split.test_ids.as_mut() {
            fix(p);
        }
        self.explore.external.iter_mut().for_each(fix);
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        // a run manifest embeds the configuration it was produced from
        let value = match value {
            serde_json::Value::Object(mut m) if m.contains_key("config") && m.contains_key("artifacts") => {
                m.remove("config").expect("checked")
            }
            v => v,
        };
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse, resolve paths relative to the file and validate.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = RunConfig::from_json(&text)?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let base = base
        .canonicalize()
        .or_else(|_| std::path::absolute(base))
        .map_err(|e| Error::io(base, e))?;
    cfg.resolve_paths(&base);
    Ok(cfg)
}
