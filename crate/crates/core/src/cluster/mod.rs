//! The three clustering families: k-means, agglomerative hierarchical and
//! spectral clustering. All are deterministic for a fixed seed.

pub mod hierarchical;
pub mod kmeans;
pub mod spectral;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use hierarchical::{agglomerate, cut_tree, hierarchical, Linkage, Merge};
pub use kmeans::{kmeans, kmeans_with, KMeansOptions, KMeansResult};
pub use spectral::{spectral, SpectralOptions};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Anything that can split a set of rows into `k` labelled groups. `rows`
/// holds the original dataset row index of each row of `data`, so
/// labelers may depend on row identity.
pub trait Clusterer: Send + Sync {
    fn name(&self) -> String;

    /// Labels in `1..=k`, one per row of `data`.
    fn cluster(&self, data: &Matrix, rows: &[usize], k: usize, seed: u64) -> Result<Vec<usize>>;
}

/// Clustering methods of the case-study grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ClusterMethod {
    KMeans,
    Hierarchical(Linkage),
    Spectral { n_neighbors: usize },
}

impl ClusterMethod {
    /// The case-study grid: k-means, complete and Ward hierarchical, and
    /// spectral with 5, 30, 60 and 100 neighbors.
    pub fn default_grid() -> Vec<ClusterMethod> {
        let mut v = vec![
            ClusterMethod::KMeans,
            ClusterMethod::Hierarchical(Linkage::Complete),
            ClusterMethod::Hierarchical(Linkage::Ward),
        ];
        v.extend([5, 30, 60, 100].map(|n_neighbors| ClusterMethod::Spectral { n_neighbors }));
        v
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterMethod::KMeans => write!(f, "kmeans"),
            ClusterMethod::Hierarchical(l) => write!(f, "hc-{l}"),
            ClusterMethod::Spectral { n_neighbors } => write!(f, "spectral-{n_neighbors}"),
        }
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "unknown clustering method `{s}` (expected kmeans, hc-complete, hc-ward, hc-average or spectral-<n>)"
            ))
        };
        if s == "kmeans" {
            return Ok(ClusterMethod::KMeans);
        }
        if let Some(l) = s.strip_prefix("hc-") {
            return Ok(ClusterMethod::Hierarchical(l.parse().map_err(|_| bad())?));
        }
        if let Some(n) = s.strip_prefix("spectral-") {
            let n_neighbors: usize = n.parse().map_err(|_| bad())?;
            if n_neighbors == 0 {
                return Err(bad());
            }
            return Ok(ClusterMethod::Spectral { n_neighbors });
        }
        Err(bad())
    }
}

impl TryFrom<String> for ClusterMethod {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ClusterMethod> for String {
    fn from(m: ClusterMethod) -> String {
        m.to_string()
    }
}

impl Clusterer for ClusterMethod {
    fn name(&self) -> String {
        self.to_string()
    }

    fn cluster(&self, data: &Matrix, _rows: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
        match *self {
            ClusterMethod::KMeans => Ok(kmeans(data, k, seed)?.labels),
            ClusterMethod::Hierarchical(linkage) => hierarchical(data, k, linkage),
            ClusterMethod::Spectral { n_neighbors } => spectral(data, k, n_neighbors, seed),
        }
    }
}

/// A method together with a cluster count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClustererSpec {
    pub method: ClusterMethod,
    pub k: usize,
}

impl fmt::Display for ClustererSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.method, self.k)
    }
}

impl FromStr for ClustererSpec {
    type Err = Error;

    /// Parses `<method>:<k>`, e.g. `kmeans:8` or `spectral-60:2`.
    fn from_str(s: &str) -> Result<Self> {
        let (m, k) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::Config(format!("expected <method>:<k>, got `{s}`")))?;
        let k: usize = k
            .parse()
            .map_err(|_| Error::Config(format!("bad cluster count in `{s}`")))?;
        Ok(ClustererSpec { method: m.parse()?, k })
    }
}

/// Relabel to `1..=k` in order of first appearance.
pub fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut map: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    raw.iter()
        .map(|r| {
            let next = map.len() + 1;
            *map.entry(*r).or_insert(next)
        })
        .collect()
}

/// Labels over a row subset together with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub k: usize,
    pub method: String,
    pub pipeline: String,
    pub objective: Option<f64>,
}

impl ClusterAssignment {
    /// Checks that labels lie in `1..=k` and every cluster is nonempty.
    pub fn new(ids: Vec<String>, labels: Vec<usize>, k: usize, method: impl Into<String>, pipeline: impl Into<String>) -> Result<Self> {
        if ids.len() != labels.len() {
            return Err(invalid("ids and labels differ in length"));
        }
        let mut sizes = vec![0usize; k + 1];
        for &l in &labels {
            if l == 0 || l > k {
                return Err(invalid(format!("label {l} outside 1..={k}")));
            }
            sizes[l] += 1;
        }
        if let Some(empty) = (1..=k).find(|&c| sizes[c] == 0) {
            return Err(invalid(format!("cluster {empty} of {k} is empty")));
        }
        Ok(ClusterAssignment {
            ids,
            labels,
            k,
            method: method.into(),
            pipeline: pipeline.into(),
            objective: None,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l - 1] += 1;
        }
        s
    }
}

/// CSV with header `id,label,pipeline,method,k`.
pub fn write_labels_csv(a: &ClusterAssignment, path: &Path) -> Result<()> {
    let mut w = crate::error::csv_writer(path)?;
    w.write_record(["id", "label", "pipeline", "method", "k"])?;
    for (id, l) in a.ids.iter().zip(&a.labels) {
        w.write_record([id.as_str(), &l.to_string(), &a.pipeline, &a.method, &a.k.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Validate inputs shared by every clustering routine.
pub(crate) fn check_input(m: &Matrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if k > m.rows() {
        return Err(invalid(format!("k = {k} exceeds the {} available rows", m.rows())));
    }
    m.ensure_finite()
}
