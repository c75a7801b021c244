//! Dimension reduction and neighborhood-retention diagnostics.

mod pca;
mod retention;
pub mod tsne;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use pca::pca;
pub use retention::{neighbor_retention, retention_curve, retention_many, write_retention_csv, RetentionCurve};
pub use tsne::{tsne, TsneOptions};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// A dimension-reduction step that can end a preprocessing pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Embedder {
    /// `components: None` keeps the fewest components explaining at least
    /// 90% of the variance.
    Pca { components: Option<usize> },
    Tsne { perplexity: f64 },
}

pub const PCA_DEFAULT_VARIANCE: f64 = 0.9;

impl fmt::Display for Embedder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Embedder::Pca { components: None } => write!(f, "pca"),
            Embedder::Pca { components: Some(q) } => write!(f, "pca-{q}"),
            Embedder::Tsne { perplexity } => write!(f, "tsne-{perplexity}"),
        }
    }
}

impl FromStr for Embedder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown embedder `{s}` (expected pca, pca-<q> or tsne-<perplexity>)"));
        if s == "pca" {
            return Ok(Embedder::Pca { components: None });
        }
        if let Some(q) = s.strip_prefix("pca-") {
            let q: usize = q.parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            return Ok(Embedder::Pca { components: Some(q) });
        }
        if let Some(p) = s.strip_prefix("tsne-") {
            let perplexity: f64 = p.parse().map_err(|_| bad())?;
            if !(perplexity.is_finite() && perplexity > 0.0) {
                return Err(bad());
            }
            return Ok(Embedder::Tsne { perplexity });
        }
        Err(bad())
    }
}

impl TryFrom<String> for Embedder {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Embedder> for String {
    fn from(e: Embedder) -> String {
        e.to_string()
    }
}

/// Low-dimensional coordinates aligned to row ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: Matrix,
    pub ids: Vec<String>,
    pub method: String,
    /// PCA only: explained-variance ratio per kept component.
    pub explained_variance_ratio: Option<Vec<f64>>,
    /// PCA only: d x q loading matrix.
    pub loadings: Option<Matrix>,
}

impl Embedding {
    pub fn new(coords: Matrix, ids: Vec<String>, method: impl Into<String>) -> Result<Self> {
        if coords.rows() != ids.len() {
            return Err(invalid("embedding rows and ids disagree"));
        }
        Ok(Embedding {
            coords,
            ids,
            method: method.into(),
            explained_variance_ratio: None,
            loadings: None,
        })
    }
}

/// Write `id,x,y` (or `id,c1,..,cq` when q != 2).
pub fn export_embedding(e: &Embedding, path: &Path) -> Result<()> {
    let mut w = crate::error::csv_writer(path)?;
    let q = e.coords.cols();
    let mut header = vec!["id".to_string()];
    if q == 2 {
        header.extend(["x".to_string(), "y".to_string()]);
    } else {
        header.extend((1..=q).map(|c| format!("c{c}")));
    }
    w.write_record(&header)?;
    for (i, id) in e.ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(e.coords.row(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|err| Error::io(path, err))?;
    Ok(())
}

/// Read an externally computed embedding and realign it to `ids`.
pub fn import_embedding(path: &Path, ids: &[String]) -> Result<Embedding> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let q = rdr.headers()?.len().saturating_sub(1);
    if q == 0 {
        return Err(Error::Data(format!("{}: embedding needs an id column and coordinates", path.display())));
    }
    let mut by_id: HashMap<String, Vec<f64>> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let id = rec.get(0).unwrap_or("").to_string();
        let vals = (1..=q)
            .map(|c| {
                rec.get(c)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { row, message: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        if by_id.insert(id.clone(), vals).is_some() {
            return Err(Error::Data(format!("duplicate id `{id}` in embedding file")));
        }
    }
    let missing: Vec<&str> = ids.iter().filter(|id| !by_id.contains_key(*id)).map(String::as_str).collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("embedding file lacks ids: {}", missing.join(", "))));
    }
    if by_id.len() != ids.len() {
        let known: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
        let mut extra: Vec<&str> = by_id.keys().map(String::as_str).filter(|k| !known.contains(k)).collect();
        extra.sort_unstable();
        return Err(Error::Data(format!("embedding file has unknown ids: {}", extra.join(", "))));
    }
    let mut data = Vec::with_capacity(ids.len() * q);
    for id in ids {
        data.extend_from_slice(&by_id[id]);
    }
    let name = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    Embedding::new(Matrix::from_vec(ids.len(), q, data)?, ids.to_vec(), format!("external:{name}"))
}
