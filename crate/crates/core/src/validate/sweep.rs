use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ari, consensus, consensus_labels, ConsensusMatrix, ConsensusOptions};
use crate::cluster::{ClusterAssignment, Clusterer};
use crate::config::SweepConfig;
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::preprocess::{self, PipelineSpec, QualityFilter};

/// Filter, materialize every pipeline, build the consensus matrix and
/// extract `k` consensus clusters.
pub fn consensus_partition(
    filtered: &Dataset,
    specs: &[PipelineSpec],
    method: &dyn Clusterer,
    k: usize,
    seed: u64,
    opts: &ConsensusOptions,
) -> Result<(ConsensusMatrix, ClusterAssignment)> {
    let views = preprocess::materialize_all(specs, filtered, seed)?;
    let c = consensus(&views, method, k, seed, opts)?;
    let labels = consensus_labels(&c, k)?;
    Ok((c, labels))
}

/// One alternative QC setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetting {
    pub parameter: String,
    pub value: f64,
    pub filter: QualityFilter,
}

/// The baseline filter with one threshold changed at a time.
pub fn sweep_settings(base: &QualityFilter, cfg: &SweepConfig) -> Vec<SweepSetting> {
    let mut out = Vec::new();
    for &v in &cfg.snr_min {
        out.push(SweepSetting {
            parameter: "snr_min".into(),
            value: v,
            filter: QualityFilter { snr_min: v, ..*base },
        });
    }
    for &v in &cfg.logg_max {
        out.push(SweepSetting {
            parameter: "logg_max".into(),
            value: v,
            filter: QualityFilter { logg_max: v, ..*base },
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub rows: usize,
    pub shared: usize,
    /// `None` when the setting could not be evaluated (see `error`).
    pub ari: Option<f64>,
    pub error: Option<String>,
}

/// ARI between the baseline partition and the partition obtained after
/// refiltering `raw` under each setting, on the rows both contain.
pub fn sensitivity_sweep(
    raw: &Dataset,
    settings: &[SweepSetting],
    reference: &ClusterAssignment,
    specs: &[PipelineSpec],
    method: &dyn Clusterer,
    k: usize,
    seed: u64,
) -> Vec<SweepRow> {
    let ref_lookup: HashMap<&str, usize> = reference.ids.iter().map(String::as_str).zip(reference.labels.iter().copied()).collect();
    settings
        .iter()
        .map(|s| {
            let run = || -> Result<(usize, usize, f64)> {
                let filtered = preprocess::apply_quality_filters(raw, &s.filter)?;
                let (_, labels) = consensus_partition(&filtered, specs, method, k, seed, &ConsensusOptions::default())?;
                let (mut a, mut b) = (Vec::new(), Vec::new());
                for (id, &l) in labels.ids.iter().zip(&labels.labels) {
                    if let Some(&r) = ref_lookup.get(id.as_str()) {
                        a.push(r);
                        b.push(l);
                    }
                }
                if a.len() < 2 {
                    return Err(Error::Data(format!("only {} rows shared with the baseline", a.len())));
                }
                Ok((filtered.len(), a.len(), ari(&a, &b)?))
            };
            match run() {
                Ok((rows, shared, v)) => SweepRow {
                    parameter: s.parameter.clone(),
                    value: s.value,
                    rows,
                    shared,
                    ari: Some(v),
                    error: None,
                },
                Err(e) => SweepRow {
                    parameter: s.parameter.clone(),
                    value: s.value,
                    rows: 0,
                    shared: 0,
                    ari: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// `parameter,value,rows,shared,ari`; failed settings have an empty ARI.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = crate::error::csv_writer(path)?;
    w.write_record(["parameter", "value", "rows", "shared", "ari"])?;
    for r in rows {
        w.write_record([
            r.parameter.clone(),
            r.value.to_string(),
            r.rows.to_string(),
            r.shared.to_string(),
            r.ari.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionEntry {
    pub cluster: usize,
    pub gc: String,
    pub count: usize,
    /// Share of the cluster's members carrying this tag.
    pub cluster_fraction: f64,
    /// Share of the tag's members that fall in this cluster.
    pub containment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub cluster_sizes: BTreeMap<usize, usize>,
    pub gc_sizes: BTreeMap<String, usize>,
    /// Sorted by cluster, then by decreasing count, then by tag.
    pub entries: Vec<CompositionEntry>,
}

impl Composition {
    pub fn entry(&self, cluster: usize, gc: &str) -> Option<&CompositionEntry> {
        self.entries.iter().find(|e| e.cluster == cluster && e.gc == gc)
    }

    /// The cluster holding most members of `gc`.
    pub fn main_cluster_of(&self, gc: &str) -> Option<&CompositionEntry> {
        self.entries
            .iter()
            .filter(|e| e.gc == gc)
            .max_by(|a, b| a.count.cmp(&b.count).then(b.cluster.cmp(&a.cluster)))
    }
}

/// Cross-tabulate cluster labels against tags. Untagged rows count toward
/// cluster sizes only.
pub fn gc_composition(labels: &[usize], tags: &[Option<String>]) -> Result<Composition> {
    if labels.len() != tags.len() {
        return Err(invalid("labels and tags differ in length"));
    }
    let mut cluster_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut gc_sizes: BTreeMap<String, usize> = BTreeMap::new();
    let mut joint: BTreeMap<(usize, String), usize> = BTreeMap::new();
    for (&l, t) in labels.iter().zip(tags) {
        *cluster_sizes.entry(l).or_default() += 1;
        if let Some(t) = t {
            *gc_sizes.entry(t.clone()).or_default() += 1;
            *joint.entry((l, t.clone())).or_default() += 1;
        }
    }
    let mut entries: Vec<CompositionEntry> = joint
        .into_iter()
        .map(|((cluster, gc), count)| CompositionEntry {
            cluster_fraction: count as f64 / cluster_sizes[&cluster] as f64,
            containment: count as f64 / gc_sizes[&gc] as f64,
            cluster,
            gc,
            count,
        })
        .collect();
    entries.sort_by(|a, b| a.cluster.cmp(&b.cluster).then(b.count.cmp(&a.count)).then(a.gc.cmp(&b.gc)));
    Ok(Composition {
        cluster_sizes,
        gc_sizes,
        entries,
    })
}

/// `cluster,gc,count,cluster_fraction,containment`.
pub fn write_composition_csv(c: &Composition, path: &Path) -> Result<()> {
    let mut w = crate::error::csv_writer(path)?;
    w.write_record(["cluster", "gc", "count", "cluster_fraction", "containment"])?;
    for e in &c.entries {
        w.write_record([
            e.cluster.to_string(),
            e.gc.clone(),
            e.count.to_string(),
            e.cluster_fraction.to_string(),
            e.containment.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
