use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ari;
use crate::cluster::Clusterer;
use crate::dataset::Dataset;
use crate::diag;
use crate::error::{invalid, numeric, Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::{self, FeatureMatrix, PipelineSpec};
use crate::seed;

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub b: usize,
    pub pi: f64,
    pub seed: u64,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams { b: 100, pi: 0.8, seed: 0 }
    }
}

/// One resampling iterate of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityIterate {
    pub b: usize,
    pub pipeline_a: String,
    pub pipeline_b: String,
    pub overlap: usize,
    pub ari: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCell {
    pub method: String,
    pub k: usize,
    pub mean: f64,
    /// Sample standard deviation over iterates (0 when B = 1).
    pub sd: f64,
    pub b: usize,
    pub iterates: Vec<StabilityIterate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    /// Method labels in configuration order (used for tie-breaking).
    pub methods: Vec<String>,
    pub cells: Vec<StabilityCell>,
    pub params: StabilityParams,
}

impl StabilityTable {
    /// Cell indices by decreasing mean; ties go to smaller k, then to the
    /// earlier method.
    pub fn ranking(&self) -> Vec<usize> {
        let pos = |m: &str| self.methods.iter().position(|x| x == m).unwrap_or(usize::MAX);
        let mut idx: Vec<usize> = (0..self.cells.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ca, cb) = (&self.cells[a], &self.cells[b]);
            cb.mean
                .total_cmp(&ca.mean)
                .then(ca.k.cmp(&cb.k))
                .then(pos(&ca.method).cmp(&pos(&cb.method)))
        });
        idx
    }

    pub fn cell(&self, method: &str, k: usize) -> Option<&StabilityCell> {
        self.cells.iter().find(|c| c.method == method && c.k == k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub method: String,
    pub k: usize,
    pub mean: f64,
    /// True when chosen manually rather than by the argmax.
    pub overridden: bool,
    pub rank: usize,
}

/// Most stable cell, or the requested `(method, k)` if given.
pub fn select_model(t: &StabilityTable, manual: Option<(&str, usize)>) -> Result<Selection> {
    let ranking = t.ranking();
    if ranking.is_empty() {
        return Err(invalid("stability table is empty"));
    }
    let (idx, overridden) = match manual {
        None => (ranking[0], false),
        Some((m, k)) => {
            let i = t
                .cells
                .iter()
                .position(|c| c.method == m && c.k == k)
                .ok_or_else(|| Error::Config(format!("override {m}:{k} is not in the stability table")))?;
            (i, true)
        }
    };
    let c = &t.cells[idx];
    Ok(Selection {
        method: c.method.clone(),
        k: c.k,
        mean: c.mean,
        overridden,
        rank: ranking.iter().position(|&r| r == idx).expect("ranked") + 1,
    })
}

/// A pipeline as seen by the search: a label and a way to produce the
/// matrix for a sorted row subset.
pub trait PipelineView: Sync {
    fn label(&self) -> &str;
    fn rows(&self) -> usize;
    fn view(&self, rows: &[usize]) -> Result<Matrix>;
}

/// Pipeline applied once to all rows; subsamples select rows of it.
impl PipelineView for FeatureMatrix {
    fn label(&self) -> &str {
        &self.label
    }
    fn rows(&self) -> usize {
        self.values.rows()
    }
    fn view(&self, rows: &[usize]) -> Result<Matrix> {
        Ok(self.values.select_rows(rows))
    }
}

/// Pipeline re-applied to every subsample (standardization, imputation
/// and embedding all see only the subsample).
pub struct RefitPipeline<'a> {
    pub spec: &'a PipelineSpec,
    pub data: &'a Dataset,
    pub seed: u64,
}

impl PipelineView for RefitPipeline<'_> {
    fn label(&self) -> &str {
        &self.spec.label
    }
    fn rows(&self) -> usize {
        self.data.len()
    }
    fn view(&self, rows: &[usize]) -> Result<Matrix> {
        let sub = self.data.subset(rows);
        let parts: Vec<u64> = rows.iter().map(|&r| r as u64).collect();
        let s = seed::derive(self.seed, "refit", &parts);
        Ok(preprocess::materialize(self.spec, &sub, s)?.values)
    }
}

fn subsample(n: usize, size: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let mut v = rand::seq::index::sample(rng, n, size).into_vec();
    v.sort_unstable();
    v
}

/// Positions in `a` and `b` of their common elements (both sorted).
fn intersect(a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let (mut i, mut j) = (0, 0);
    let (mut pa, mut pb) = (Vec::new(), Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                pa.push(i);
                pb.push(j);
                i += 1;
                j += 1;
            }
        }
    }
    (pa, pb)
}

fn one_iterate(
    views: &[&dyn PipelineView],
    method: &dyn Clusterer,
    k: usize,
    b: usize,
    n: usize,
    size: usize,
    cell_seed: u64,
) -> Result<StabilityIterate> {
    let mut rng = seed::rng(seed::derive(cell_seed, "draw", &[b as u64]));
    for _ in 0..MAX_REDRAWS {
        let s1 = subsample(n, size, &mut rng);
        let s2 = subsample(n, size, &mut rng);
        let g1 = rng.gen_range(0..views.len());
        let g2 = rng.gen_range(0..views.len());
        let (p1, p2) = intersect(&s1, &s2);
        if p1.len() < 2 {
            continue;
        }
        let l1 = method.cluster(&views[g1].view(&s1)?, &s1, k, seed::derive(cell_seed, "fit", &[b as u64, 1]))?;
        let l2 = method.cluster(&views[g2].view(&s2)?, &s2, k, seed::derive(cell_seed, "fit", &[b as u64, 2]))?;
        let a: Vec<usize> = p1.iter().map(|&i| l1[i]).collect();
        let c: Vec<usize> = p2.iter().map(|&i| l2[i]).collect();
        return Ok(StabilityIterate {
            b,
            pipeline_a: views[g1].label().to_string(),
            pipeline_b: views[g2].label().to_string(),
            overlap: p1.len(),
            ari: ari(&a, &c)?,
        });
    }
    Err(numeric(format!("subsample overlap stayed below 2 rows after {MAX_REDRAWS} redraws")))
}

/// Resampling stability over every `(method, k)` cell.
///
/// For each iterate `b`, two `pi`-subsamples and two pipelines (uniformly,
/// with replacement) are drawn; each subsample is clustered under its
/// pipeline and the ARI is taken on the shared rows. Seeds depend on
/// `(k, method label, b)` only, so the result does not depend on the
/// order of the grids or on the thread count.
pub fn stability_search_views(
    views: &[&dyn PipelineView],
    methods: &[&dyn Clusterer],
    ks: &[usize],
    params: &StabilityParams,
) -> Result<StabilityTable> {
    if views.is_empty() || methods.is_empty() || ks.is_empty() {
        return Err(invalid("stability search needs pipelines, methods and ks"));
    }
    if !(params.pi > 0.0 && params.pi < 1.0) || params.b == 0 {
        return Err(invalid(format!("need 0 < pi < 1 and B >= 1 (got pi = {}, B = {})", params.pi, params.b)));
    }
    let n = views[0].rows();
    if views.iter().any(|v| v.rows() != n) {
        return Err(invalid("pipelines disagree on the number of rows"));
    }
    let mut sorted: Vec<&dyn PipelineView> = views.to_vec();
    sorted.sort_by(|a, b| a.label().cmp(b.label()));
    let size = ((params.pi * n as f64).round() as usize).clamp(2.min(n), n);
    if params.pi * params.pi * (n as f64) < 30.0 {
        diag::warn(format!(
            "expected subsample overlap pi^2 n = {:.1} is below 30 rows",
            params.pi * params.pi * n as f64
        ));
    }
    if let Some(&k) = ks.iter().find(|&&k| k > size) {
        return Err(invalid(format!("k = {k} exceeds the subsample size {size}")));
    }
    let tasks: Vec<(usize, usize, usize)> = (0..methods.len())
        .flat_map(|m| ks.iter().flat_map(move |&k| (0..params.b).map(move |b| (m, k, b))))
        .collect();
    let results: Vec<Result<StabilityIterate>> = tasks
        .par_iter()
        .map(|&(m, k, b)| {
            let cell_seed = seed::derive(seed::derive(params.seed, &methods[m].name(), &[]), "stability", &[k as u64]);
            one_iterate(&sorted, methods[m], k, b, n, size, cell_seed)
        })
        .collect();
    let mut cells = Vec::new();
    let mut it = results.into_iter();
    for m in methods {
        for &k in ks {
            let iterates = (0..params.b).map(|_| it.next().expect("task")).collect::<Result<Vec<_>>>()?;
            let scores: Vec<f64> = iterates.iter().map(|i| i.ari).collect();
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            let sd = if scores.len() > 1 {
                (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (scores.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            cells.push(StabilityCell {
                method: m.name(),
                k,
                mean,
                sd,
                b: params.b,
                iterates,
            });
        }
    }
    Ok(StabilityTable {
        methods: methods.iter().map(|m| m.name()).collect(),
        cells,
        params: *params,
    })
}

/// Stability search over feature matrices already materialized on all
/// rows.
pub fn stability_search_matrices(
    views: &[FeatureMatrix],
    methods: &[&dyn Clusterer],
    ks: &[usize],
    params: &StabilityParams,
) -> Result<StabilityTable> {
    let v: Vec<&dyn PipelineView> = views.iter().map(|v| v as &dyn PipelineView).collect();
    stability_search_views(&v, methods, ks, params)
}

/// Stability search on a filtered dataset. With `refit` every subsample
/// is preprocessed from scratch; otherwise each pipeline is applied once
/// to all rows and subsamples select rows of the result.
pub fn stability_search(
    ds: &Dataset,
    specs: &[PipelineSpec],
    methods: &[&dyn Clusterer],
    ks: &[usize],
    params: &StabilityParams,
    refit: bool,
) -> Result<StabilityTable> {
    if refit {
        let views: Vec<RefitPipeline> = specs
            .iter()
            .map(|spec| RefitPipeline {
                spec,
                data: ds,
                seed: preprocess::pipeline_seed(params.seed, spec),
            })
            .collect();
        let v: Vec<&dyn PipelineView> = views.iter().map(|v| v as &dyn PipelineView).collect();
        stability_search_views(&v, methods, ks, params)
    } else {
        let views = preprocess::materialize_all(specs, ds, params.seed)?;
        stability_search_matrices(&views, methods, ks, params)
    }
}

/// `method,k,mean,sd,B`, one row per cell in table order.
pub fn write_stability_csv(t: &StabilityTable, path: &Path) -> Result<()> {
    let mut w = crate::error::csv_writer(path)?;
    w.write_record(["method", "k", "mean", "sd", "B"])?;
    for c in &t.cells {
        w.write_record([c.method.clone(), c.k.to_string(), c.mean.to_string(), c.sd.to_string(), c.b.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Every iterate: `method,k,b,pipeline_a,pipeline_b,overlap,ari`.
pub fn write_iterates_csv(t: &StabilityTable, path: &Path) -> Result<()> {
    let mut w = crate::error::csv_writer(path)?;
    w.write_record(["method", "k", "b", "pipeline_a", "pipeline_b", "overlap", "ari"])?;
    for c in &t.cells {
        for i in &c.iterates {
            w.write_record([
                c.method.clone(),
                c.k.to_string(),
                i.b.to_string(),
                i.pipeline_a.clone(),
                i.pipeline_b.clone(),
                i.overlap.to_string(),
                i.ari.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
