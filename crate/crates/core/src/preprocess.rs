//! Quality-control filtering, feature selection, standardization,
//! imputation, and composition of complete preprocessing pipelines.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::diag;
use crate::embed::{self, Embedder, Embedding, TsneOptions};
use crate::error::{invalid, Error, Result};
use crate::forest::{self, ForestParams};
use crate::matrix::Matrix;
use crate::seed;

/// Star-selection thresholds. A row survives when `snr >= snr_min`,
/// `|teff - median(teff)| <= teff_width / 2`, `logg <= logg_max`,
/// `vb >= vb_min` and (if set) `starflag == starflag_required`.
/// Missing (NaN) metadata fails every finite comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualityFilter {
    pub snr_min: f64,
    pub teff_width: f64,
    pub logg_max: f64,
    pub vb_min: f64,
    pub starflag_required: Option<i64>,
}

impl Default for QualityFilter {
    fn default() -> Self {
        QualityFilter {
            snr_min: 70.0,
            teff_width: 1000.0,
            logg_max: 3.6,
            vb_min: 0.9,
            starflag_required: Some(0),
        }
    }
}

impl QualityFilter {
    /// Keeps every row with finite metadata.
    pub fn permissive() -> Self {
        QualityFilter {
            snr_min: 0.0,
            teff_width: f64::INFINITY,
            logg_max: f64::INFINITY,
            vb_min: 0.0,
            starflag_required: None,
        }
    }

    pub fn keeps(&self, snr: f64, teff_offset: f64, logg: f64, vb: f64, flag: Option<i64>) -> bool {
        let teff_ok = self.teff_width.is_infinite() || teff_offset.abs() <= self.teff_width / 2.0;
        let flag_ok = match self.starflag_required {
            None => true,
            Some(req) => flag == Some(req),
        };
        snr >= self.snr_min && teff_ok && logg <= self.logg_max && vb >= self.vb_min && flag_ok
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Row indices kept by the filter, in input order.
pub fn filter_rows(ds: &Dataset, f: &QualityFilter) -> Vec<usize> {
    let center = median(ds.meta().iter().map(|m| m.teff).collect()).unwrap_or(f64::NAN);
    ds.meta()
        .iter()
        .enumerate()
        .filter(|(_, m)| f.keeps(m.snr, m.teff - center, m.logg, m.vb, m.starflag))
        .map(|(i, _)| i)
        .collect()
}

pub fn apply_quality_filters(ds: &Dataset, f: &QualityFilter) -> Result<Dataset> {
    let keep = filter_rows(ds, f);
    if keep.is_empty() {
        return Err(Error::Data("all rows filtered out by the quality-control thresholds".into()));
    }
    Ok(ds.subset(&keep))
}

/// Ordered list of abundance columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSet {
    pub name: String,
    pub columns: Vec<String>,
}

const SMALL7: [&str; 7] = ["FE_H", "MG_FE", "O_FE", "SI_FE", "CA_FE", "NI_FE", "AL_FE"];
const MEDIUM_EXTRA: [&str; 4] = ["C_FE", "MN_FE", "N_FE", "K_FE"];
const LARGE_EXTRA: [&str; 8] = ["CI_FE", "NA_FE", "S_FE", "TI_FE", "TIII_FE", "V_FE", "CR_FE", "CO_FE"];

impl FeatureSet {
    fn from_lists(name: &str, lists: &[&[&str]]) -> Self {
        FeatureSet {
            name: name.into(),
            columns: lists.iter().flat_map(|l| l.iter().map(|s| s.to_string())).collect(),
        }
    }

    pub fn small7() -> Self {
        Self::from_lists("small7", &[&SMALL7])
    }

    pub fn medium11() -> Self {
        Self::from_lists("medium11", &[&SMALL7, &MEDIUM_EXTRA])
    }

    pub fn large19() -> Self {
        Self::from_lists("large19", &[&SMALL7, &MEDIUM_EXTRA, &LARGE_EXTRA])
    }

    pub fn custom(name: impl Into<String>, columns: Vec<String>) -> Self {
        FeatureSet {
            name: name.into(),
            columns,
        }
    }

    pub fn tier(name: &str) -> Option<Self> {
        match name {
            "small7" => Some(Self::small7()),
            "medium11" => Some(Self::medium11()),
            "large19" => Some(Self::large19()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputerKind {
    Mean,
    Forest,
}

impl fmt::Display for ImputerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImputerKind::Mean => "mean",
            ImputerKind::Forest => "forest",
        })
    }
}

impl FromStr for ImputerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ImputerKind::Mean),
            "forest" => Ok(ImputerKind::Forest),
            _ => Err(Error::Config(format!("unknown imputer `{s}` (expected mean or forest)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestImputeOptions {
    pub trees: usize,
    pub max_iters: usize,
    pub min_node_size: usize,
}

impl Default for ForestImputeOptions {
    fn default() -> Self {
        ForestImputeOptions {
            trees: 100,
            max_iters: 10,
            min_node_size: 5,
        }
    }
}

/// One complete preprocessing recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub filter: QualityFilter,
    pub features: FeatureSet,
    pub imputer: ImputerKind,
    pub forest: ForestImputeOptions,
    pub embedder: Option<Embedder>,
    pub label: String,
}

impl PipelineSpec {
    pub fn new(filter: QualityFilter, features: FeatureSet, imputer: ImputerKind, embedder: Option<Embedder>) -> Self {
        let mut label = format!("{}-{}", features.name, imputer);
        if let Some(e) = &embedder {
            label.push('-');
            label.push_str(&e.to_string());
        }
        PipelineSpec {
            filter,
            features,
            imputer,
            forest: ForestImputeOptions::default(),
            embedder,
            label,
        }
    }
}

/// Feature values with a missingness mask (masked cells hold NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    pub names: Vec<String>,
    pub values: Matrix,
    pub missing: Vec<bool>,
}

impl MaskedMatrix {
    pub fn new(names: Vec<String>, mut values: Matrix, missing: Vec<bool>) -> Result<Self> {
        if names.len() != values.cols() || missing.len() != values.rows() * values.cols() {
            return Err(invalid("masked matrix shape mismatch"));
        }
        let p = values.cols();
        for (idx, &m) in missing.iter().enumerate() {
            if m {
                values.set(idx / p, idx % p, f64::NAN);
            }
        }
        Ok(MaskedMatrix { names, values, missing })
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.values.cols() + j]
    }

    fn observed(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.rows())
            .filter(move |&i| !self.is_missing(i, j))
            .map(move |i| self.values.get(i, j))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub observed: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor n - 1).
    pub sd: f64,
    pub constant: bool,
}

pub fn select_features(ds: &Dataset, fs: &FeatureSet) -> Result<MaskedMatrix> {
    let idx = fs
        .columns
        .iter()
        .map(|c| {
            ds.column_index(c)
                .ok_or_else(|| Error::Data(format!("feature set `{}` needs unknown column `{c}`", fs.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = ds.len();
    let mut missing = Vec::with_capacity(n * idx.len());
    for i in 0..n {
        missing.extend(idx.iter().map(|&j| ds.is_missing(i, j)));
    }
    MaskedMatrix::new(fs.columns.clone(), ds.features().select_cols(&idx), missing)
}

/// Z-score each column over its observed entries. Constant columns become
/// all zeros with a warning.
pub fn standardize(m: &MaskedMatrix) -> Result<(MaskedMatrix, Vec<ColumnStats>)> {
    let (n, p) = (m.values.rows(), m.values.cols());
    let mut out = m.values.clone();
    let mut stats = Vec::with_capacity(p);
    for j in 0..p {
        let obs: Vec<f64> = m.observed(j).collect();
        if obs.len() < 2 {
            return Err(Error::Data(format!(
                "column `{}` has {} observed values; standardization needs 2",
                m.names[j],
                obs.len()
            )));
        }
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        let sd = (obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (obs.len() - 1) as f64).sqrt();
        let constant = !(sd > 1e-12 * mean.abs().max(1.0));
        if constant {
            diag::warn(format!("column `{}` is constant after filtering; set to 0", m.names[j]));
        }
        for i in 0..n {
            if !m.is_missing(i, j) {
                out.set(i, j, if constant { 0.0 } else { (m.values.get(i, j) - mean) / sd });
            }
        }
        stats.push(ColumnStats {
            name: m.names[j].clone(),
            observed: obs.len(),
            mean,
            sd,
            constant,
        });
    }
    Ok((MaskedMatrix::new(m.names.clone(), out, m.missing.clone())?, stats))
}

fn column_means(m: &MaskedMatrix) -> Result<Vec<f64>> {
    (0..m.values.cols())
        .map(|j| {
            let (s, c) = m.observed(j).fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if c == 0 {
                Err(Error::Data(format!("column `{}` has no observed values", m.names[j])))
            } else {
                Ok(s / c as f64)
            }
        })
        .collect()
}

/// Replace each masked entry with its column's observed mean.
pub fn impute_mean(m: &MaskedMatrix) -> Result<Matrix> {
    let means = column_means(m)?;
    Ok(fill_masked(m, &means))
}

fn fill_masked(m: &MaskedMatrix, means: &[f64]) -> Matrix {
    let mut out = m.values.clone();
    for i in 0..out.rows() {
        for (j, mean) in means.iter().enumerate() {
            if m.is_missing(i, j) {
                out.set(i, j, *mean);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestImputation {
    pub values: Matrix,
    pub iterations: usize,
    pub forest_fits: usize,
}

/// Iterative forest imputation: start from the mean fill, then repeatedly
/// regress each incomplete column (fewest missing first) on all the other
/// columns. Stops when the sum of squared changes over imputed cells
/// grows, returning the previous iterate, or after `max_iters` sweeps.
pub fn impute_forest(m: &MaskedMatrix, opts: &ForestImputeOptions, seed: u64) -> Result<ForestImputation> {
    let (n, p) = (m.values.rows(), m.values.cols());
    let mut current = impute_mean(m)?;
    let mut cols: Vec<(usize, usize)> = (0..p)
        .map(|j| (j, (0..n).filter(|&i| m.is_missing(i, j)).count()))
        .filter(|&(_, c)| c > 0)
        .collect();
    cols.sort_by_key(|&(j, c)| (c, j));
    if cols.is_empty() || opts.max_iters == 0 {
        return Ok(ForestImputation {
            values: current,
            iterations: 0,
            forest_fits: 0,
        });
    }
    if p < 2 {
        diag::warn("forest imputation needs at least 2 columns; falling back to mean fill");
        return Ok(ForestImputation {
            values: current,
            iterations: 0,
            forest_fits: 0,
        });
    }
    let params = ForestParams {
        n_trees: opts.trees,
        min_node_size: opts.min_node_size,
        ..ForestParams::regress()
    };
    let mut fits = 0;
    let mut prev_change = f64::INFINITY;
    for it in 0..opts.max_iters {
        let before = current.clone();
        for &(j, _) in &cols {
            let others: Vec<usize> = (0..p).filter(|&c| c != j).collect();
            let obs: Vec<usize> = (0..n).filter(|&i| !m.is_missing(i, j)).collect();
            let mis: Vec<usize> = (0..n).filter(|&i| m.is_missing(i, j)).collect();
            let x = current.select_cols(&others);
            let y: Vec<f64> = obs.iter().map(|&i| current.get(i, j)).collect();
            let pred = if obs.len() >= 2 {
                let model = forest::fit_regressor(&x.select_rows(&obs), &y, &params, seed::derive(seed, "impute", &[it as u64, j as u64]))?;
                fits += 1;
                model.predict_values(&x.select_rows(&mis))?
            } else {
                vec![y[0]; mis.len()]
            };
            for (&i, v) in mis.iter().zip(pred) {
                current.set(i, j, v);
            }
        }
        let change: f64 = cols
            .iter()
            .flat_map(|&(j, _)| (0..n).filter(move |&i| m.is_missing(i, j)).map(move |i| (i, j)))
            .map(|(i, j)| (current.get(i, j) - before.get(i, j)).powi(2))
            .sum();
        if change > prev_change {
            return Ok(ForestImputation {
                values: before,
                iterations: it + 1,
                forest_fits: fits,
            });
        }
        prev_change = change;
        if change == 0.0 {
            return Ok(ForestImputation {
                values: current,
                iterations: it + 1,
                forest_fits: fits,
            });
        }
    }
    Ok(ForestImputation {
        values: current,
        iterations: opts.max_iters,
        forest_fits: fits,
    })
}

/// Standardized and imputed matrix produced by a pipeline, aligned to ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub ids: Vec<String>,
    pub label: String,
    pub columns: Vec<String>,
}

/// Every intermediate product of [`materialize`].
#[derive(Debug, Clone)]
pub struct Materialized {
    /// Standardized, imputed features before any embedding.
    pub features: FeatureMatrix,
    pub stats: Vec<ColumnStats>,
    pub embedding: Option<Embedding>,
    /// What clustering consumes: the embedding if present, else `features`.
    pub output: FeatureMatrix,
}

/// select → standardize → impute → optional embed. `ds` must already be
/// quality-filtered.
pub fn materialize_stages(spec: &PipelineSpec, ds: &Dataset, seed: u64) -> Result<Materialized> {
    let raw = select_features(ds, &spec.features)?;
    let (std, stats) = standardize(&raw)?;
    let values = match spec.imputer {
        // observed standardized columns have mean 0 by construction
        ImputerKind::Mean => fill_masked(&std, &vec![0.0; std.values.cols()]),
        ImputerKind::Forest => impute_forest(&std, &spec.forest, seed::derive(seed, "forest-impute", &[]))?.values,
    };
    let features = FeatureMatrix {
        values,
        ids: ds.ids().to_vec(),
        label: spec.label.clone(),
        columns: spec.features.columns.clone(),
    };
    let embedding = match &spec.embedder {
        None => None,
        Some(Embedder::Pca { components }) => Some(embed::pca(&features.values, &features.ids, *components)?),
        Some(Embedder::Tsne { perplexity }) => Some(embed::tsne(
            &features.values,
            &features.ids,
            *perplexity,
            seed::derive(seed, "tsne", &[]),
            &TsneOptions::default(),
        )?),
    };
    let output = match &embedding {
        None => features.clone(),
        Some(e) => FeatureMatrix {
            values: e.coords.clone(),
            ids: e.ids.clone(),
            label: spec.label.clone(),
            columns: (1..=e.coords.cols()).map(|c| format!("{}{c}", e.method)).collect(),
        },
    };
    Ok(Materialized {
        features,
        stats,
        embedding,
        output,
    })
}

pub fn materialize(spec: &PipelineSpec, ds: &Dataset, seed: u64) -> Result<FeatureMatrix> {
    Ok(materialize_stages(spec, ds, seed)?.output)
}

/// Materialize every spec on the same (already filtered) data, in
/// parallel. Output order follows `specs`.
pub fn materialize_all(specs: &[PipelineSpec], ds: &Dataset, seed: u64) -> Result<Vec<FeatureMatrix>> {
    use rayon::prelude::*;
    specs
        .par_iter()
        .map(|s| materialize(s, ds, pipeline_seed(seed, s)))
        .collect()
}

/// Seed used to materialize a pipeline within a run.
pub fn pipeline_seed(master: u64, spec: &PipelineSpec) -> u64 {
    seed::derive(master, "pipeline", &[]) ^ seed::derive(0, &spec.label, &[])
}

/// Cross product feature sets × imputers × embedders in configuration
/// order; duplicates are dropped with a warning.
pub fn enumerate_pipelines(cfg: &RunConfig) -> Result<Vec<PipelineSpec>> {
    let embedders: Vec<Option<Embedder>> = cfg.embedders.iter().map(|e| e.0.clone()).collect();
    let mut out: Vec<PipelineSpec> = Vec::new();
    for fs in &cfg.features {
        let fs = fs.resolve()?;
        for &imp in &cfg.imputers {
            for e in &embedders {
                let mut spec = PipelineSpec::new(cfg.filter, fs.clone(), imp, e.clone());
                spec.forest = cfg.forest_imputer.clone();
                if out.iter().any(|s| s.label == spec.label) {
                    diag::warn(format!("duplicate pipeline `{}` dropped", spec.label));
                    continue;
                }
                out.push(spec);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Config("pipeline grid is empty".into()));
    }
    Ok(out)
}

/// Write a materialized matrix as `<dir>/<label>.csv` with an id column.
pub fn export_feature_matrix(fm: &FeatureMatrix, dir: &Path) -> Result<std::path::PathBuf> {
    let path = dir.join(format!("{}.csv", fm.label));
    let mut w = crate::error::csv_writer(&path)?;
    let mut header = vec!["id".to_string()];
    header.extend(fm.columns.iter().cloned());
    w.write_record(&header)?;
    for (i, id) in fm.ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(fm.values.row(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_planted, QcRow};
    use rand::Rng;

    fn masked(rows: &[&[Option<f64>]]) -> MaskedMatrix {
        let p = rows[0].len();
        let mut vals = Vec::new();
        let mut miss = Vec::new();
        for r in rows {
            for c in r.iter() {
                vals.push(c.unwrap_or(f64::NAN));
                miss.push(c.is_none());
            }
        }
        MaskedMatrix::new((0..p).map(|j| format!("c{j}")).collect(), Matrix::from_vec(rows.len(), p, vals).unwrap(), miss).unwrap()
    }

    #[test]
    fn feature_tiers_nest_and_have_table_sizes() {
        let (s, m, l) = (FeatureSet::small7(), FeatureSet::medium11(), FeatureSet::large19());
        assert_eq!((s.columns.len(), m.columns.len(), l.columns.len()), (7, 11, 19));
        assert!(s.columns.iter().all(|c| m.columns.contains(c)));
        assert!(m.columns.iter().all(|c| l.columns.contains(c)));
        assert_eq!(s.columns[0], "FE_H");
        assert_eq!(l.columns[18], "CO_FE");
    }

    fn meta_ds(snrs: &[f64]) -> Dataset {
        let n = snrs.len();
        let (ds, _) = synth_planted(1, n, 2, 1.0, 1.0, 0).unwrap();
        let meta = snrs
            .iter()
            .enumerate()
            .map(|(i, &snr)| QcRow {
                snr,
                teff: 4000.0 + 100.0 * i as f64,
                logg: 1.0 + 0.5 * i as f64,
                vb: 0.95,
                starflag: Some(0),
            })
            .collect();
        ds.with_meta(meta).unwrap()
    }

    #[test]
    fn snr_threshold_is_inclusive() {
        let ds = meta_ds(&[69.0, 70.0, 71.0]);
        let f = QualityFilter {
            snr_min: 70.0,
            ..QualityFilter::permissive()
        };
        assert_eq!(filter_rows(&ds, &f), vec![1, 2]);
    }

    #[test]
    fn teff_window_is_centered_on_median() {
        // teff = 4000, 4100, 4200, 4300, 4400; median 4200
        let ds = meta_ds(&[100.0; 5]);
        let f = QualityFilter {
            teff_width: 300.0,
            ..QualityFilter::permissive()
        };
        assert_eq!(filter_rows(&ds, &f), vec![1, 2, 3]);
    }

    #[test]
    fn permissive_filter_is_identity_and_empty_is_error() {
        let ds = meta_ds(&[10.0, 20.0, 30.0]);
        assert_eq!(apply_quality_filters(&ds, &QualityFilter::permissive()).unwrap(), ds);
        let f = QualityFilter {
            snr_min: 1000.0,
            ..QualityFilter::permissive()
        };
        assert!(apply_quality_filters(&ds, &f).is_err());
    }

    #[test]
    fn starflag_must_match() {
        let ds = meta_ds(&[100.0, 100.0]);
        let mut meta = ds.meta().to_vec();
        meta[1].starflag = Some(8);
        let ds = ds.with_meta(meta).unwrap();
        let f = QualityFilter {
            starflag_required: Some(0),
            ..QualityFilter::permissive()
        };
        assert_eq!(filter_rows(&ds, &f), vec![0]);
    }

    #[test]
    fn raising_snr_shrinks_survivors() {
        let mut rng = crate::seed::rng(3);
        let snrs: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..200.0)).collect();
        let ds = meta_ds(&snrs);
        let mut prev: Option<Vec<usize>> = None;
        for t in [0.0, 30.0, 50.0, 70.0, 110.0, 150.0] {
            let f = QualityFilter {
                snr_min: t,
                ..QualityFilter::permissive()
            };
            let rows = filter_rows(&ds, &f);
            if let Some(p) = &prev {
                assert!(rows.iter().all(|r| p.contains(r)));
            }
            prev = Some(rows);
        }
    }

    #[test]
    fn standardize_sample_sd() {
        let m = masked(&[&[Some(1.0)], &[Some(2.0)], &[Some(3.0)]]);
        let (s, stats) = standardize(&m).unwrap();
        assert_eq!(s.values.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(stats[0].sd, 1.0);
        let (again, _) = standardize(&s).unwrap();
        for (a, b) in again.values.as_slice().iter().zip(s.values.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn standardize_constant_column_zeroes() {
        let m = masked(&[&[Some(5.0)], &[Some(5.0)], &[Some(5.0)]]);
        let (s, stats) = standardize(&m).unwrap();
        assert_eq!(s.values.column(0), vec![0.0; 3]);
        assert!(stats[0].constant);
    }

    #[test]
    fn standardize_skips_masked_cells() {
        let m = masked(&[&[Some(1.0)], &[None], &[Some(3.0)]]);
        let (s, stats) = standardize(&m).unwrap();
        assert_eq!(stats[0].observed, 2);
        assert!(s.is_missing(1, 0));
        assert!(masked(&[&[Some(1.0)], &[None]]).values.get(1, 0).is_nan());
        assert!(standardize(&masked(&[&[Some(1.0)], &[None]])).is_err());
    }

    #[test]
    fn mean_imputation() {
        let m = masked(&[&[Some(1.0)], &[None], &[Some(3.0)]]);
        assert_eq!(impute_mean(&m).unwrap().column(0), vec![1.0, 2.0, 3.0]);
        let full = masked(&[&[Some(1.0), Some(4.0)], &[Some(2.0), Some(5.0)]]);
        assert_eq!(impute_mean(&full).unwrap(), full.values);
        assert!(impute_mean(&masked(&[&[None], &[None]])).is_err());
    }

    #[test]
    fn mean_imputation_matches_direct_means() {
        let rows: [&[Option<f64>]; 5] = [
            &[Some(1.0), None, Some(2.0)],
            &[Some(4.0), Some(3.0), None],
            &[None, Some(-1.0), Some(6.0)],
            &[Some(0.5), Some(2.0), Some(1.0)],
            &[Some(2.5), None, Some(3.0)],
        ];
        let m = masked(&rows);
        let out = impute_mean(&m).unwrap();
        let direct = [(1.0 + 4.0 + 0.5 + 2.5) / 4.0, (3.0 - 1.0 + 2.0) / 3.0, (2.0 + 6.0 + 1.0 + 3.0) / 4.0];
        assert_eq!(out.get(2, 0), direct[0]);
        assert_eq!(out.get(0, 1), direct[1]);
        assert_eq!(out.get(4, 1), direct[1]);
        assert_eq!(out.get(1, 2), direct[2]);
    }

    #[test]
    fn standardize_then_mean_fills_zero() {
        let m = masked(&[&[Some(1.0)], &[None], &[Some(7.0)], &[Some(2.0)]]);
        let (s, _) = standardize(&m).unwrap();
        assert!(impute_mean(&s).unwrap().get(1, 0).abs() < 1e-15);

        let (ds, _) = synth_planted(2, 10, 3, 4.0, 1.0, 5).unwrap();
        let mut missing = vec![false; 60];
        missing[4] = true;
        missing[31] = true;
        let ds = Dataset::new(
            ds.ids().to_vec(),
            ds.gc_tags().to_vec(),
            ds.meta().to_vec(),
            ds.feature_names().to_vec(),
            ds.features().clone(),
            missing,
        )
        .unwrap();
        let spec = PipelineSpec::new(
            QualityFilter::permissive(),
            FeatureSet::custom("f", ds.feature_names().to_vec()),
            ImputerKind::Mean,
            None,
        );
        let fm = materialize(&spec, &ds, 0).unwrap();
        assert_eq!(fm.values.get(1, 1), 0.0);
        assert_eq!(fm.values.get(10, 1), 0.0);
    }

    #[test]
    fn forest_imputation_without_missing_is_identity() {
        let m = masked(&[&[Some(1.0), Some(2.0)], &[Some(3.0), Some(4.0)]]);
        let r = impute_forest(&m, &ForestImputeOptions::default(), 0).unwrap();
        assert_eq!(r.values, m.values);
        assert_eq!(r.forest_fits, 0);
    }

    fn linear_pair(seed: u64) -> (MaskedMatrix, Vec<(usize, f64)>) {
        let mut rng = crate::seed::rng(seed);
        let n = 200;
        let a: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64 + rng.gen_range(-0.001..0.001)).collect();
        let mut rows: Vec<Vec<Option<f64>>> = a.iter().map(|&v| vec![Some(v), Some(2.0 * v)]).collect();
        let mut held = Vec::new();
        for i in (5..n).step_by(10) {
            held.push((i, 2.0 * a[i]));
            rows[i][1] = None;
        }
        let refs: Vec<&[Option<f64>]> = rows.iter().map(Vec::as_slice).collect();
        (masked(&refs), held)
    }

    #[test]
    fn forest_imputation_recovers_linear_relation() {
        let (m, held) = linear_pair(1);
        let r = impute_forest(&m, &ForestImputeOptions::default(), 42).unwrap();
        let rmse = (held.iter().map(|&(i, t)| (r.values.get(i, 1) - t).powi(2)).sum::<f64>() / held.len() as f64).sqrt();
        assert!(rmse <= 0.2, "rmse {rmse}");
        // observed cells untouched
        for i in 0..200 {
            for j in 0..2 {
                if !m.is_missing(i, j) {
                    assert_eq!(r.values.get(i, j), m.values.get(i, j));
                }
            }
        }
        let again = impute_forest(&m, &ForestImputeOptions::default(), 42).unwrap();
        assert_eq!(again.values, r.values);
    }

    #[test]
    fn pipeline_materializes_standardized_matrix() {
        let (ds, _) = synth_planted(2, 20, 7, 5.0, 1.0, 3).unwrap();
        let fs = FeatureSet::custom("all7", ds.feature_names().to_vec());
        let spec = PipelineSpec::new(QualityFilter::permissive(), fs.clone(), ImputerKind::Mean, None);
        let fm = materialize(&spec, &ds, 1).unwrap();
        assert_eq!(fm.values.cols(), 7);
        for j in 0..7 {
            let col = fm.values.column(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
            assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
        }
        let other = PipelineSpec::new(QualityFilter::permissive(), fs, ImputerKind::Forest, None);
        assert_ne!(other.label, spec.label);
        let tsne = PipelineSpec::new(
            QualityFilter::permissive(),
            FeatureSet::custom("all7", ds.feature_names().to_vec()),
            ImputerKind::Mean,
            Some(Embedder::Tsne { perplexity: 5.0 }),
        );
        let m1 = materialize(&tsne, &ds, 9).unwrap();
        assert_eq!(m1.values.cols(), 2);
        assert_eq!(m1, materialize(&tsne, &ds, 9).unwrap());
    }

    #[test]
    fn unknown_feature_column_is_error() {
        let (ds, _) = synth_planted(1, 5, 2, 1.0, 1.0, 0).unwrap();
        assert!(select_features(&ds, &FeatureSet::small7()).is_err());
    }
}
