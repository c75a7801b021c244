use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{cut_tree, hierarchical::linkage_from_dissimilarity, ClusterAssignment, Clusterer, Linkage};
use crate::error::{invalid, Error, Result};
use crate::preprocess::FeatureMatrix;
use crate::seed;

/// Pairwise co-clustering frequencies. `values[i][j]` is the fraction of
/// runs covering both rows in which they shared a cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
    counts: Vec<u32>,
}

impl ConsensusMatrix {
    /// Wrap a precomputed row-major matrix. It must be square, symmetric
    /// and within [0, 1]; pair counts are recorded as zero.
    pub fn from_values(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(invalid(format!("consensus needs {} values for {n} rows, got {}", n * n, values.len())));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !(0.0..=1.0).contains(&v) || v != values[j * n + i] {
                    return Err(invalid(format!("consensus entry ({i}, {j}) = {v} is outside [0, 1] or asymmetric")));
                }
            }
        }
        Ok(ConsensusMatrix { ids, values, counts: vec![0; n * n] })
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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Restrict to a subset of rows (in the given order).
    pub fn select(&self, rows: &[usize]) -> ConsensusMatrix {
        let n = self.len();
        let mut values = Vec::with_capacity(rows.len() * rows.len());
        let mut counts = Vec::with_capacity(rows.len() * rows.len());
        for &i in rows {
            for &j in rows {
                values.push(self.values[i * n + j]);
                counts.push(self.counts[i * n + j]);
            }
        }
        ConsensusMatrix {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            values,
            counts,
        }
    }
}

/// One clustering run: labels for a sorted subset of row positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub rows: Vec<usize>,
    pub labels: Vec<usize>,
}

impl Labeling {
    pub fn full(labels: Vec<usize>) -> Self {
        Labeling {
            rows: (0..labels.len()).collect(),
            labels,
        }
    }
}

/// Accumulate integer co-occurrence counts over labelings.
pub fn consensus_from_labelings(ids: &[String], runs: &[Labeling]) -> Result<ConsensusMatrix> {
    let n = ids.len();
    let mut co = vec![0u32; n * n];
    let mut counts = vec![0u32; n * n];
    for run in runs {
        if run.rows.len() != run.labels.len() || run.rows.iter().any(|&r| r >= n) {
            return Err(invalid("labeling does not fit the consensus rows"));
        }
        for (a, &i) in run.rows.iter().enumerate() {
            for (b, &j) in run.rows.iter().enumerate() {
                counts[i * n + j] += 1;
                if run.labels[a] == run.labels[b] {
                    co[i * n + j] += 1;
                }
            }
        }
    }
    let values = co
        .iter()
        .zip(&counts)
        .map(|(&c, &t)| if t == 0 { 0.0 } else { f64::from(c) / f64::from(t) })
        .collect();
    Ok(ConsensusMatrix {
        ids: ids.to_vec(),
        values,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConsensusOptions {
    /// Cluster a random fraction of rows in each run instead of all rows.
    pub subsample: Option<f64>,
    /// Runs per pipeline (only meaningful with `subsample`).
    pub reps: usize,
}

/// Cluster every pipeline's matrix with the chosen method and `k`, and
/// aggregate co-membership. Without subsampling each pipeline contributes
/// one full-data run, so every count equals the number of pipelines.
pub fn consensus(
    views: &[FeatureMatrix],
    method: &dyn Clusterer,
    k: usize,
    seed: u64,
    opts: &ConsensusOptions,
) -> Result<ConsensusMatrix> {
    let first = views.first().ok_or_else(|| invalid("consensus needs at least one pipeline"))?;
    let n = first.ids.len();
    if views.iter().any(|v| v.ids != first.ids) {
        return Err(invalid("pipelines disagree on row ids"));
    }
    let reps = if opts.subsample.is_some() { opts.reps.max(1) } else { 1 };
    let tasks: Vec<(usize, usize)> = (0..views.len()).flat_map(|g| (0..reps).map(move |r| (g, r))).collect();
    let runs = tasks
        .par_iter()
        .map(|&(g, r)| {
            let v = &views[g];
            let s = seed::derive(seed::derive(seed, &v.label, &[]), "consensus", &[r as u64]);
            let rows: Vec<usize> = match opts.subsample {
                Some(f) if f < 1.0 => {
                    let size = ((f * n as f64).round() as usize).clamp(k.min(n), n);
                    let mut rows = rand::seq::index::sample(&mut seed::rng(seed::derive(s, "rows", &[])), n, size).into_vec();
                    rows.sort_unstable();
                    rows
                }
                _ => (0..n).collect(),
            };
            let labels = method.cluster(&v.values.select_rows(&rows), &rows, k, s)?;
            Ok(Labeling { rows, labels })
        })
        .collect::<Result<Vec<_>>>()?;
    consensus_from_labelings(&first.ids, &runs)
}

/// Average-linkage hierarchical clustering on `1 - C`, cut at `k`.
pub fn consensus_labels(c: &ConsensusMatrix, k: usize) -> Result<ClusterAssignment> {
    let n = c.len();
    if k == 0 || k > n {
        return Err(invalid(format!("cannot cut {n} rows into {k} clusters")));
    }
    let d: Vec<f64> = (0..n * n)
        .map(|idx| if idx / n == idx % n { 0.0 } else { 1.0 - c.values[idx] })
        .collect();
    let merges = linkage_from_dissimilarity(d, n, Linkage::Average)?;
    let labels = cut_tree(&merges, n, k)?;
    ClusterAssignment::new(c.ids.clone(), labels, k, "consensus-average", "consensus")
}

/// Per-row mean consensus with the other members of its own cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalStability {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub scores: Vec<f64>,
}

impl LocalStability {
    /// Mean score per cluster label `1..=k`.
    pub fn cluster_means(&self) -> Vec<(usize, f64)> {
        let k = self.labels.iter().copied().max().unwrap_or(0);
        (1..=k)
            .filter_map(|l| {
                let v: Vec<f64> = self.labels.iter().zip(&self.scores).filter(|(&x, _)| x == l).map(|(_, &s)| s).collect();
                (!v.is_empty()).then(|| (l, v.iter().sum::<f64>() / v.len() as f64))
            })
            .collect()
    }
}

/// Singletons score 1.
pub fn local_stability(c: &ConsensusMatrix, labels: &[usize]) -> Result<LocalStability> {
    let n = c.len();
    if labels.len() != n {
        return Err(invalid("labels do not align with the consensus matrix"));
    }
    let scores = (0..n)
        .map(|i| {
            let (sum, cnt) = (0..n)
                .filter(|&j| j != i && labels[j] == labels[i])
                .fold((0.0, 0usize), |(s, c_), j| (s + c.get(i, j), c_ + 1));
            if cnt == 0 {
                1.0
            } else {
                sum / cnt as f64
            }
        })
        .collect();
    Ok(LocalStability {
        ids: c.ids.clone(),
        labels: labels.to_vec(),
        scores,
    })
}

/// Dense matrix with an `id` header row and column.
pub fn write_consensus_csv(c: &ConsensusMatrix, path: &Path) -> Result<()> {
    let mut w = crate::error::csv_writer(path)?;
    let mut header = vec!["id".to_string()];
    header.extend(c.ids.iter().cloned());
    w.write_record(&header)?;
    for i in 0..c.len() {
        let mut rec = vec![c.ids[i].clone()];
        rec.extend((0..c.len()).map(|j| c.get(i, j).to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `id,label,local_stability`.
pub fn write_local_stability_csv(ls: &LocalStability, path: &Path) -> Result<()> {
    let mut w = crate::error::csv_writer(path)?;
    w.write_record(["id", "label", "local_stability"])?;
    for ((id, l), s) in ls.ids.iter().zip(&ls.labels).zip(&ls.scores) {
        w.write_record([id.clone(), l.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::ari;
    use rand::Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn identical_runs_give_binary_blocks() {
        let l = vec![1, 1, 2, 2, 2, 3];
        let c = consensus_from_labelings(&ids(6), &[Labeling::full(l.clone()), Labeling::full(l.clone())]).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(c.get(i, j), if l[i] == l[j] { 1.0 } else { 0.0 });
                assert_eq!(c.count(i, j), 2);
            }
        }
        let back = consensus_labels(&c, 3).unwrap();
        assert_eq!(ari(&back.labels, &l).unwrap(), 1.0);
        assert!(local_stability(&c, &l).unwrap().scores.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn one_disagreeing_row_gives_halves() {
        let a = vec![1, 1, 1, 2, 2, 2];
        let b = vec![1, 1, 2, 2, 2, 2];
        let c = consensus_from_labelings(&ids(6), &[Labeling::full(a), Labeling::full(b)]).unwrap();
        assert_eq!(c.get(2, 0), 0.5);
        assert_eq!(c.get(2, 1), 0.5);
        assert_eq!(c.get(2, 3), 0.5);
        assert_eq!(c.get(2, 5), 0.5);
        assert_eq!(c.get(0, 1), 1.0);
        assert_eq!(c.get(0, 4), 0.0);
        assert_eq!(c.get(2, 2), 1.0);
    }

    #[test]
    fn partial_runs_use_pair_counts() {
        let runs = [
            Labeling { rows: vec![0, 1], labels: vec![1, 1] },
            Labeling { rows: vec![1, 2], labels: vec![1, 2] },
        ];
        let c = consensus_from_labelings(&ids(3), &runs).unwrap();
        assert_eq!((c.get(0, 1), c.count(0, 1)), (1.0, 1));
        assert_eq!((c.get(0, 2), c.count(0, 2)), (0.0, 0));
        assert_eq!(c.count(1, 1), 2);
    }

    fn noisy_blocks(n: usize, seed: u64) -> ConsensusMatrix {
        let mut rng = crate::seed::rng(seed);
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = if i == j {
                    1.0
                } else if (i < n / 2) == (j < n / 2) {
                    0.9 + rng.gen_range(-0.05..0.05)
                } else {
                    0.1 + rng.gen_range(-0.05..0.05)
                };
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        ConsensusMatrix {
            ids: ids(n),
            values,
            counts: vec![1; n * n],
        }
    }

    #[test]
    fn noisy_two_blocks_recovered() {
        let c = noisy_blocks(60, 4);
        let truth: Vec<usize> = (0..60).map(|i| if i < 30 { 1 } else { 2 }).collect();
        assert_eq!(ari(&consensus_labels(&c, 2).unwrap().labels, &truth).unwrap(), 1.0);
    }

    #[test]
    fn zero_off_diagonal_gives_singletons() {
        let n = 5;
        let c = ConsensusMatrix {
            ids: ids(n),
            values: (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect(),
            counts: vec![1; n * n],
        };
        let mut l = consensus_labels(&c, n).unwrap().labels;
        l.sort_unstable();
        assert_eq!(l, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn local_stability_by_hand() {
        let n = 5;
        #[rustfmt::skip]
        let values = vec![
            1.0, 1.0, 0.5, 0.0, 0.2,
            1.0, 1.0, 0.8, 0.1, 0.0,
            0.5, 0.8, 1.0, 0.3, 0.0,
            0.0, 0.1, 0.3, 1.0, 0.6,
            0.2, 0.0, 0.0, 0.6, 1.0,
        ];
        let c = ConsensusMatrix {
            ids: ids(n),
            values,
            counts: vec![1; n * n],
        };
        let labels = [1, 1, 1, 2, 3];
        let ls = local_stability(&c, &labels).unwrap();
        assert_eq!(ls.scores[0], 0.75);
        assert_eq!(ls.scores[1], 0.9);
        assert_eq!(ls.scores[2], (0.5 + 0.8) / 2.0);
        assert_eq!(ls.scores[3], 1.0);
        assert_eq!(ls.scores[4], 1.0);
        assert!(ls.scores.iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn pipelines_with_same_structure_agree() {
        let (ds, truth) = crate::dataset::synth_planted(3, 15, 2, 20.0, 0.5, 6).unwrap();
        let views: Vec<FeatureMatrix> = (0..3)
            .map(|g| FeatureMatrix {
                values: ds.features().scaled(1.0 + g as f64),
                ids: ds.ids().to_vec(),
                label: format!("g{g}"),
                columns: vec!["a".into(), "b".into()],
            })
            .collect();
        let c = consensus(&views, &crate::cluster::ClusterMethod::KMeans, 3, 1, &ConsensusOptions::default()).unwrap();
        assert!(c.counts.iter().all(|&t| t == 3));
        let labels = consensus_labels(&c, 3).unwrap();
        assert_eq!(ari(&labels.labels, &truth).unwrap(), 1.0);
        let sub = consensus(
            &views,
            &crate::cluster::ClusterMethod::KMeans,
            3,
            1,
            &ConsensusOptions { subsample: Some(0.8), reps: 4 },
        )
        .unwrap();
        assert!(sub.counts.iter().any(|&t| t < 12));
    }
}
