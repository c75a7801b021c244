//! Catalog ingestion, deterministic train/test splitting and planted
//! synthetic data.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// Abundances at or below this value are the catalog's "unmeasured" marker.
pub const MISSING_SENTINEL_MAX: f64 = -9000.0;

/// Quality-control metadata for one star.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcRow {
    pub snr: f64,
    pub teff: f64,
    pub logg: f64,
    pub vb: f64,
    pub starflag: Option<i64>,
}

/// Column names used when reading a catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schema {
    pub id: String,
    pub gc: String,
    pub snr: String,
    pub teff: String,
    pub logg: String,
    pub vb: String,
    pub starflag: String,
    /// Abundance columns to load. Empty means "every column not named above".
    pub features: Vec<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            id: "APOGEE_ID".into(),
            gc: "GC_NAME".into(),
            snr: "SNR".into(),
            teff: "TEFF".into(),
            logg: "LOGG".into(),
            vb: "VB".into(),
            starflag: "STARFLAG".into(),
            features: crate::preprocess::FeatureSet::large19().columns,
        }
    }
}

impl Schema {
    fn meta_columns(&self) -> [&str; 7] {
        [
            &self.id,
            &self.gc,
            &self.snr,
            &self.teff,
            &self.logg,
            &self.vb,
            &self.starflag,
        ]
    }
}

/// Row-indexed star catalog with an explicit missingness mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    gc_tags: Vec<Option<String>>,
    meta: Vec<QcRow>,
    feature_names: Vec<String>,
    features: Matrix,
    missing: Vec<bool>,
}

impl Dataset {
    /// Build a dataset, checking shapes and id uniqueness. Masked entries
    /// are stored as NaN.
    pub fn new(
        ids: Vec<String>,
        gc_tags: Vec<Option<String>>,
        meta: Vec<QcRow>,
        feature_names: Vec<String>,
        mut features: Matrix,
        missing: Vec<bool>,
    ) -> Result<Self> {
        let n = ids.len();
        if gc_tags.len() != n || meta.len() != n || features.rows() != n {
            return Err(Error::Data(format!(
                "column lengths disagree: ids {n}, gc {}, meta {}, features {}",
                gc_tags.len(),
                meta.len(),
                features.rows()
            )));
        }
        if features.cols() != feature_names.len() || missing.len() != features.rows() * features.cols() {
            return Err(Error::Data("feature matrix, names and mask disagree in shape".into()));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate id `{id}`")));
            }
        }
        let p = features.cols();
        for i in 0..n {
            for j in 0..p {
                if missing[i * p + j] {
                    features.set(i, j, f64::NAN);
                } else if !features.get(i, j).is_finite() {
                    return Err(Error::Data(format!("non-finite observed value for `{}` at row {i}", ids[i])));
                }
            }
        }
        Ok(Dataset {
            ids,
            gc_tags,
            meta,
            feature_names,
            features,
            missing,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn gc_tags(&self) -> &[Option<String>] {
        &self.gc_tags
    }

    pub fn meta(&self) -> &[QcRow] {
        &self.meta
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Feature values; masked entries are NaN.
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.feature_names.len() + col]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|c| c == name)
    }

    /// Rows at `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let p = self.feature_names.len();
        let mut missing = Vec::with_capacity(idx.len() * p);
        for &i in idx {
            missing.extend_from_slice(&self.missing[i * p..(i + 1) * p]);
        }
        Dataset {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            gc_tags: idx.iter().map(|&i| self.gc_tags[i].clone()).collect(),
            meta: idx.iter().map(|&i| self.meta[i]).collect(),
            feature_names: self.feature_names.clone(),
            features: self.features.select_rows(idx),
            missing,
        }
    }

    /// Replace the QC metadata, keeping everything else.
    pub fn with_meta(mut self, meta: Vec<QcRow>) -> Result<Self> {
        if meta.len() != self.len() {
            return Err(invalid("metadata length does not match dataset"));
        }
        self.meta = meta;
        Ok(self)
    }

    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }
}

fn is_missing_token(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "" | "nan" | "na" | "null" | "none"
    )
}

/// Parse an abundance cell. `Ok(None)` means the cell is masked.
fn parse_abundance(s: &str) -> std::result::Result<Option<f64>, String> {
    let s = s.trim();
    if is_missing_token(s) {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| format!("cannot parse `{s}` as a number"))?;
    if !v.is_finite() || v <= MISSING_SENTINEL_MAX {
        Ok(None)
    } else {
        Ok(Some(v))
    }
}

fn parse_meta(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if is_missing_token(s) {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| format!("cannot parse `{s}` as a number"))
}

fn parse_flag(s: &str) -> std::result::Result<Option<i64>, String> {
    let s = s.trim();
    if is_missing_token(s) {
        return Ok(None);
    }
    if let Ok(v) = s.parse::<i64>() {
        return Ok(Some(v));
    }
    match s.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(Some(v as i64)),
        _ => Err(format!("cannot parse `{s}` as an integer flag")),
    }
}

/// Load a CSV catalog. Empty cells, `NaN`-like tokens and abundances at or
/// below -9000 are masked. Row order is preserved.
pub fn load_catalog(path: &Path, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_catalog(file, schema)
}

pub fn read_catalog<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn { column: name.to_string() })
    };
    let id_c = find(&schema.id)?;
    let gc_c = find(&schema.gc)?;
    let snr_c = find(&schema.snr)?;
    let teff_c = find(&schema.teff)?;
    let logg_c = find(&schema.logg)?;
    let vb_c = find(&schema.vb)?;
    let flag_c = find(&schema.starflag)?;
    let feature_names: Vec<String> = if schema.features.is_empty() {
        let meta = schema.meta_columns();
        headers
            .iter()
            .filter(|h| !meta.contains(h))
            .map(str::to_string)
            .collect()
    } else {
        schema.features.clone()
    };
    let feat_c = feature_names.iter().map(|f| find(f)).collect::<Result<Vec<_>>>()?;

    let p = feature_names.len();
    let mut ids = Vec::new();
    let mut gc_tags = Vec::new();
    let mut meta = Vec::new();
    let mut values = Vec::new();
    let mut missing = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row: line,
            message: e.to_string(),
        })?;
        let perr = |message: String| Error::Parse { row: line, message };
        let id = rec.get(id_c).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(perr("empty id".into()));
        }
        let gc = rec.get(gc_c).unwrap_or("");
        gc_tags.push(if is_missing_token(gc) { None } else { Some(gc.to_string()) });
        let field = |c: usize| rec.get(c).unwrap_or("");
        meta.push(QcRow {
            snr: parse_meta(field(snr_c)).map_err(perr)?,
            teff: parse_meta(field(teff_c)).map_err(perr)?,
            logg: parse_meta(field(logg_c)).map_err(perr)?,
            vb: parse_meta(field(vb_c)).map_err(perr)?,
            starflag: parse_flag(field(flag_c)).map_err(perr)?,
        });
        for &c in &feat_c {
            match parse_abundance(field(c)).map_err(|m| perr(format!("column `{}`: {m}", &headers[c])))? {
                Some(v) => {
                    values.push(v);
                    missing.push(false);
                }
                None => {
                    values.push(f64::NAN);
                    missing.push(true);
                }
            }
        }
        ids.push(id);
    }
    let n = ids.len();
    Dataset::new(ids, gc_tags, meta, feature_names, Matrix::from_vec(n, p, values)?, missing)
}

/// Write a dataset back out in the schema's column layout. Masked cells are
/// written empty.
pub fn write_catalog(ds: &Dataset, path: &Path, schema: &Schema) -> Result<()> {
    let mut w = crate::error::csv_writer(path)?;
    let mut header: Vec<&str> = schema.meta_columns().to_vec();
    header.extend(ds.feature_names().iter().map(String::as_str));
    w.write_record(&header)?;
    let fmt_meta = |v: f64| if v.is_nan() { String::new() } else { v.to_string() };
    for i in 0..ds.len() {
        let m = ds.meta()[i];
        let mut rec = vec![
            ds.ids()[i].clone(),
            ds.gc_tags()[i].clone().unwrap_or_default(),
            fmt_meta(m.snr),
            fmt_meta(m.teff),
            fmt_meta(m.logg),
            fmt_meta(m.vb),
            m.starflag.map(|f| f.to_string()).unwrap_or_default(),
        ];
        for j in 0..ds.feature_names().len() {
            rec.push(if ds.is_missing(i, j) {
                String::new()
            } else {
                ds.features().get(i, j).to_string()
            });
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub fraction: f64,
}

/// Number of training rows: `floor(fraction * n)`, kept within `1..n`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).floor() as usize).clamp(1, n - 1)
}

/// Seeded random split. Rows inside each part keep their original order.
pub fn train_test_split(ds: &Dataset, fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid(format!("split fraction {fraction} not in (0,1)")));
    }
    let n = ds.len();
    if n < 2 {
        return Err(Error::Data(format!("cannot split {n} rows")));
    }
    let n_train = train_size(n, fraction);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, "split", &[])));
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(SplitResult {
        train: ds.subset(&train_idx),
        test: ds.subset(&test_idx),
        seed,
        fraction,
    })
}

/// Read an id list: the `id_column` column if present, otherwise the first.
pub fn load_id_list(path: &Path, id_column: &str) -> Result<Vec<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let col = rdr.headers()?.iter().position(|h| h == id_column).unwrap_or(0);
    let mut ids = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if let Some(v) = rec.get(col) {
            if !v.is_empty() {
                ids.push(v.to_string());
            }
        }
    }
    Ok(ids)
}

/// Split according to explicit id lists (for externally released splits).
/// Ids absent from the dataset are an error; dataset rows in neither list
/// are dropped.
pub fn split_by_ids(ds: &Dataset, train_ids: &[String], test_ids: &[String]) -> Result<SplitResult> {
    let index = ds.id_index();
    let mut unknown = Vec::new();
    let mut lookup = |ids: &[String]| {
        let mut rows: Vec<usize> = ids
            .iter()
            .filter_map(|id| {
                let r = index.get(id.as_str()).copied();
                if r.is_none() {
                    unknown.push(id.clone());
                }
                r
            })
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    };
    let train = lookup(train_ids);
    let test = lookup(test_ids);
    if !unknown.is_empty() {
        unknown.truncate(10);
        return Err(Error::Data(format!("split lists reference unknown ids: {}", unknown.join(", "))));
    }
    let train_set: HashSet<usize> = train.iter().copied().collect();
    if test.iter().any(|r| train_set.contains(r)) {
        return Err(Error::Data("train and test id lists overlap".into()));
    }
    let n_train = train.len();
    Ok(SplitResult {
        fraction: n_train as f64 / (n_train + test.len()).max(1) as f64,
        train: ds.subset(&train),
        test: ds.subset(&test),
        seed: 0,
    })
}

/// Centers of the planted generator: a scaled simplex when `k <= dims`
/// (all pairwise distances equal `separation`), otherwise points spaced
/// `separation` apart along the first axis.
pub fn planted_centers(k: usize, dims: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            let mut v = vec![0.0; dims];
            if k <= dims {
                v[c] = separation / std::f64::consts::SQRT_2;
            } else {
                v[0] = separation * c as f64;
            }
            v
        })
        .collect()
}

/// Gaussian blobs around [`planted_centers`]. Returns the dataset and the
/// true labels (1-based). Features are named `f1..f<dims>`; QC metadata is
/// set to values that pass the baseline filter.
pub fn synth_planted(
    k: usize,
    per_cluster: usize,
    dims: usize,
    separation: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if k < 1 || per_cluster < 1 || dims < 1 {
        return Err(invalid("synth_planted needs k, per_cluster and dims >= 1"));
    }
    if !(noise_sd >= 0.0) {
        return Err(invalid("noise_sd must be non-negative"));
    }
    let centers = planted_centers(k, dims, separation);
    let normal = Normal::new(0.0, noise_sd).map_err(|e| invalid(e.to_string()))?;
    let mut rng = seed::rng(seed::derive(seed, "synth", &[]));
    let n = k * per_cluster;
    let mut values = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_cluster {
            values.extend(center.iter().map(|m| m + normal.sample(&mut rng)));
            labels.push(c + 1);
        }
    }
    let ds = Dataset::new(
        (0..n).map(|i| format!("s{i:05}")).collect(),
        labels.iter().map(|l| Some(format!("G{l}"))).collect(),
        vec![
            QcRow {
                snr: 100.0,
                teff: 4500.0,
                logg: 2.0,
                vb: 1.0,
                starflag: Some(0),
            };
            n
        ],
        (1..=dims).map(|j| format!("f{j}")).collect(),
        Matrix::from_vec(n, dims, values)?,
        vec![false; n * dims],
    )?;
    Ok((ds, labels))
}
