use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ari, match_clusters_in};
use crate::cluster::Clusterer;
use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::forest::{self, ForestParams};
use crate::preprocess::{self, PipelineSpec};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPrecision {
    /// Cluster label on the test side.
    pub test_cluster: usize,
    /// Training cluster matched to it.
    pub predicted_cluster: Option<usize>,
    /// Share of rows predicted as `predicted_cluster` that belong to
    /// `test_cluster`.
    pub precision: f64,
    pub test_size: usize,
    pub predicted_size: usize,
    /// No test row was predicted into the matched cluster.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizabilityReport {
    pub pipeline: String,
    pub method: String,
    pub k: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// ARI between forest predictions and the test clustering.
    pub overall_ari: f64,
    pub clusters: Vec<ClusterPrecision>,
    pub test_ids: Vec<String>,
    pub test_labels: Vec<usize>,
    pub predicted: Vec<usize>,
}

impl GeneralizabilityReport {
    pub fn precision_of(&self, test_cluster: usize) -> Option<f64> {
        self.clusters.iter().find(|c| c.test_cluster == test_cluster).map(|c| c.precision)
    }
}

/// Forest settings that reproduce their own training labels: every tree
/// sees all rows and all features.
pub fn memorizing_forest(n_features: usize) -> ForestParams {
    ForestParams {
        n_trees: 1,
        min_node_size: 1,
        max_features: Some(n_features.max(1)),
        max_depth: None,
        bootstrap: false,
    }
}

/// Per-cluster precision of `predicted` against `test` after optimal
/// matching over the label universe `1..=k`.
pub fn cluster_precisions(predicted: &[usize], test: &[usize], k: usize) -> Result<Vec<ClusterPrecision>> {
    let universe: Vec<usize> = (1..=k).collect();
    let m = match_clusters_in(predicted, test, &universe, &universe)?;
    Ok(universe
        .iter()
        .map(|&c| {
            let p = m.predicted_for(c);
            let test_size = test.iter().filter(|&&t| t == c).count();
            let (predicted_size, hit) = match p {
                Some(p) => (
                    predicted.iter().filter(|&&x| x == p).count(),
                    predicted.iter().zip(test).filter(|(&x, &t)| x == p && t == c).count(),
                ),
                None => (0, 0),
            };
            ClusterPrecision {
                test_cluster: c,
                predicted_cluster: p,
                precision: if predicted_size == 0 { 0.0 } else { hit as f64 / predicted_size as f64 },
                test_size,
                predicted_size,
                flagged: predicted_size == 0,
            }
        })
        .collect())
}

/// Cluster train and test separately under the same pipeline and method,
/// train a forest on the training clusters (pre-embedding features), and
/// score its test predictions against the test clustering.
pub fn generalizability(
    train: &Dataset,
    test: &Dataset,
    spec: &PipelineSpec,
    method: &dyn Clusterer,
    k: usize,
    seed: u64,
    rf: &ForestParams,
) -> Result<GeneralizabilityReport> {
    if k > test.len() || k > train.len() {
        return Err(invalid(format!("k = {k} exceeds the train or test size")));
    }
    let train_ids: std::collections::HashSet<&str> = train.ids().iter().map(String::as_str).collect();
    let self_check = train.ids() == test.ids();
    if !self_check && test.ids().iter().any(|i| train_ids.contains(i.as_str())) {
        return Err(invalid("train and test share ids"));
    }
    // identical seeds on both sides: identical data clusters identically
    let ps = preprocess::pipeline_seed(seed, spec);
    let mtr = preprocess::materialize_stages(spec, train, ps)?;
    let mte = preprocess::materialize_stages(spec, test, ps)?;
    let cs = seed::derive(seed, "generalize", &[k as u64]);
    let rows_tr: Vec<usize> = (0..train.len()).collect();
    let rows_te: Vec<usize> = (0..test.len()).collect();
    let train_labels = method.cluster(&mtr.output.values, &rows_tr, k, cs)?;
    let test_labels = method.cluster(&mte.output.values, &rows_te, k, cs)?;
    let model = forest::fit_classifier(&mtr.features.values, &train_labels, rf, seed::derive(seed, "classifier", &[]))?;
    let predicted = model.predict_classes(&mte.features.values)?;
    Ok(GeneralizabilityReport {
        pipeline: spec.label.clone(),
        method: method.name(),
        k,
        n_train: train.len(),
        n_test: test.len(),
        overall_ari: ari(&predicted, &test_labels)?,
        clusters: cluster_precisions(&predicted, &test_labels, k)?,
        test_ids: test.ids().to_vec(),
        test_labels,
        predicted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceClusterScore {
    pub label: usize,
    /// Mean over pipelines of the precision of the test cluster that best
    /// overlaps this reference cluster.
    pub mean_precision: f64,
    pub min_precision: f64,
    pub pipelines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizabilitySummary {
    pub method: String,
    pub k: usize,
    pub mean_ari: f64,
    pub per_pipeline: Vec<GeneralizabilityReport>,
    /// Scores attached to the labels of a reference partition (such as the
    /// final consensus clusters), when one is supplied.
    pub per_reference_cluster: Vec<ReferenceClusterScore>,
}

/// Run [`generalizability`] for every pipeline. With `reference` (ids and
/// labels `1..=k` covering the test rows) each pipeline's test clusters
/// are matched to the reference clusters on the test rows so precisions
/// can be reported per reference cluster.
pub fn generalizability_grid(
    train: &Dataset,
    test: &Dataset,
    specs: &[PipelineSpec],
    method: &dyn Clusterer,
    k: usize,
    seed: u64,
    rf: &ForestParams,
    reference: Option<(&[String], &[usize])>,
) -> Result<GeneralizabilitySummary> {
    use rayon::prelude::*;
    let reports = specs
        .par_iter()
        .map(|s| generalizability(train, test, s, method, k, seed, rf))
        .collect::<Result<Vec<_>>>()?;
    let mean_ari = reports.iter().map(|r| r.overall_ari).sum::<f64>() / reports.len().max(1) as f64;
    let mut per_reference_cluster = Vec::new();
    if let Some((ids, labels)) = reference {
        let lookup: HashMap<&str, usize> = ids.iter().map(String::as_str).zip(labels.iter().copied()).collect();
        let ref_k = labels.iter().copied().max().unwrap_or(0);
        let mut acc: Vec<Vec<f64>> = vec![Vec::new(); ref_k + 1];
        for r in &reports {
            let (mut rows_test, mut rows_ref) = (Vec::new(), Vec::new());
            for (id, &t) in r.test_ids.iter().zip(&r.test_labels) {
                if let Some(&l) = lookup.get(id.as_str()) {
                    rows_test.push(t);
                    rows_ref.push(l);
                }
            }
            let tu: Vec<usize> = (1..=k).collect();
            let ru: Vec<usize> = (1..=ref_k).collect();
            let m = match_clusters_in(&rows_test, &rows_ref, &tu, &ru)?;
            for &(t, l) in &m.pairs {
                if let Some(p) = r.precision_of(t) {
                    acc[l].push(p);
                }
            }
        }
        per_reference_cluster = (1..=ref_k)
            .filter(|&l| !acc[l].is_empty())
            .map(|l| ReferenceClusterScore {
                label: l,
                mean_precision: acc[l].iter().sum::<f64>() / acc[l].len() as f64,
                min_precision: acc[l].iter().copied().fold(f64::INFINITY, f64::min),
                pipelines: acc[l].len(),
            })
            .collect();
    }
    Ok(GeneralizabilitySummary {
        method: method.name(),
        k,
        mean_ari,
        per_pipeline: reports,
        per_reference_cluster,
    })
}
