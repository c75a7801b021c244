//! Agglomerative clustering with Lance–Williams dissimilarity updates.
//!
//! At every step the pair `(a, b)`, `a < b`, minimizing `(d(a, b), a, b)`
//! lexicographically is merged. A cluster is identified by the smallest
//! original row index it contains, so the merged cluster keeps id `a`.
//! Ward linkage runs on squared Euclidean distances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{canonical_labels, check_input};
use crate::error::{invalid, Error, Result};
use crate::matrix::{pairwise_sq_dists, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Linkage {
    Complete,
    Average,
    Ward,
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Ward => "ward",
        })
    }
}

impl FromStr for Linkage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            "ward" => Ok(Linkage::Ward),
            _ => Err(Error::Config(format!("unknown linkage `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    /// Size of the merged cluster.
    pub size: usize,
}

/// Merge sequence for a full `n x n` dissimilarity matrix.
pub fn linkage_from_dissimilarity(mut d: Vec<f64>, n: usize, linkage: Linkage) -> Result<Vec<Merge>> {
    if d.len() != n * n {
        return Err(invalid("dissimilarity matrix shape mismatch"));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(invalid("dissimilarities must be finite"));
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    // nearest partner with a larger index
    let mut nn = vec![usize::MAX; n];
    let mut nn_d = vec![f64::INFINITY; n];
    let rescan = |i: usize, d: &[f64], active: &[bool], nn: &mut [usize], nn_d: &mut [f64]| {
        nn[i] = usize::MAX;
        nn_d[i] = f64::INFINITY;
        for j in i + 1..n {
            if active[j] && d[i * n + j] < nn_d[i] {
                nn[i] = j;
                nn_d[i] = d[i * n + j];
            }
        }
    };
    for i in 0..n {
        rescan(i, &d, &active, &mut nn, &mut nn_d);
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut a = usize::MAX;
        for i in 0..n {
            if active[i] && nn[i] != usize::MAX && (a == usize::MAX || nn_d[i] < nn_d[a]) {
                a = i;
            }
        }
        let b = nn[a];
        let h = nn_d[a];
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for l in 0..n {
            if !active[l] || l == a || l == b {
                continue;
            }
            let (dla, dlb) = (d[l * n + a], d[l * n + b]);
            let v = match linkage {
                Linkage::Complete => dla.max(dlb),
                Linkage::Average => (na * dla + nb * dlb) / (na + nb),
                Linkage::Ward => {
                    let nl = size[l] as f64;
                    ((na + nl) * dla + (nb + nl) * dlb - nl * h) / (na + nb + nl)
                }
            };
            d[l * n + a] = v;
            d[a * n + l] = v;
        }
        active[b] = false;
        size[a] += size[b];
        merges.push(Merge {
            a,
            b,
            height: h,
            size: size[a],
        });
        rescan(a, &d, &active, &mut nn, &mut nn_d);
        for l in 0..n {
            if !active[l] || l == a {
                continue;
            }
            if nn[l] == a || nn[l] == b {
                rescan(l, &d, &active, &mut nn, &mut nn_d);
            } else if l < a && (d[l * n + a] < nn_d[l] || (d[l * n + a] == nn_d[l] && a < nn[l])) {
                nn[l] = a;
                nn_d[l] = d[l * n + a];
            }
        }
    }
    Ok(merges)
}

/// Merge sequence on Euclidean distances (squared Euclidean for Ward).
pub fn agglomerate(m: &Matrix, linkage: Linkage) -> Result<Vec<Merge>> {
    m.ensure_finite()?;
    let mut d = pairwise_sq_dists(m);
    if linkage != Linkage::Ward {
        d.iter_mut().for_each(|v| *v = v.sqrt());
    }
    linkage_from_dissimilarity(d, m.rows(), linkage)
}

/// Labels `1..=k` after applying the first `n - k` merges.
pub fn cut_tree(merges: &[Merge], n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > n || merges.len() + 1 < n {
        return Err(invalid(format!("cannot cut {n} rows into {k} clusters")));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for m in &merges[..n - k] {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        parent[rb] = ra;
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    Ok(canonical_labels(&roots))
}

pub fn hierarchical(m: &Matrix, k: usize, linkage: Linkage) -> Result<Vec<usize>> {
    check_input(m, k)?;
    let merges = agglomerate(m, linkage)?;
    cut_tree(&merges, m.rows(), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// O(n³) agglomeration that recomputes inter-cluster distances from
    /// the member lists at every step.
    fn naive(points: &Matrix, linkage: Linkage) -> Vec<(usize, usize, f64)> {
        let n = points.rows();
        let dist = |a: usize, b: usize| crate::matrix::sq_dist(points.row(a), points.row(b)).sqrt();
        let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut out = Vec::new();
        while clusters.len() > 1 {
            let mut best = (f64::INFINITY, 0, 0);
            for x in 0..clusters.len() {
                for y in x + 1..clusters.len() {
                    let ds = clusters[x].iter().flat_map(|&a| clusters[y].iter().map(move |&b| dist(a, b)));
                    let v = match linkage {
                        Linkage::Complete => ds.fold(0.0, f64::max),
                        Linkage::Average => ds.sum::<f64>() / (clusters[x].len() * clusters[y].len()) as f64,
                        Linkage::Ward => unreachable!(),
                    };
                    let key = (v, clusters[x][0], clusters[y][0]);
                    if (key.0, key.1, key.2) < best {
                        best = key;
                    }
                }
            }
            let (v, a, b) = best;
            let xi = clusters.iter().position(|c| c[0] == a).unwrap();
            let yi = clusters.iter().position(|c| c[0] == b).unwrap();
            let moved = clusters[yi].clone();
            clusters[xi].extend(moved);
            clusters[xi].sort_unstable();
            clusters.remove(yi);
            out.push((a, b, v));
        }
        out
    }

    fn random_points(n: usize, seed: u64) -> Matrix {
        let mut rng = crate::seed::rng(seed);
        Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.gen_range(0.0..10.0)).collect()).unwrap()
    }

    fn assert_same(got: &[Merge], want: &[(usize, usize, f64)]) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert_eq!((g.a, g.b), (w.0, w.1));
            assert!((g.height - w.2).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_matches_naive() {
        for seed in 0..25 {
            let p = random_points(6, seed);
            assert_same(&agglomerate(&p, Linkage::Complete).unwrap(), &naive(&p, Linkage::Complete));
        }
    }

    #[test]
    fn average_matches_naive() {
        for seed in 100..110 {
            let p = random_points(7, seed);
            assert_same(&agglomerate(&p, Linkage::Average).unwrap(), &naive(&p, Linkage::Average));
        }
    }

    #[test]
    fn ward_matches_sum_of_squares_increase() {
        // Ward merge cost on squared distances is 2 * ΔSSE
        let p = random_points(6, 7);
        let merges = agglomerate(&p, Linkage::Ward).unwrap();
        let sse = |rows: &[usize]| {
            let c: Vec<f64> = (0..2).map(|j| rows.iter().map(|&r| p.get(r, j)).sum::<f64>() / rows.len() as f64).collect();
            rows.iter().map(|&r| crate::matrix::sq_dist(p.row(r), &c)).sum::<f64>()
        };
        let mut members: Vec<Vec<usize>> = (0..6).map(|i| vec![i]).collect();
        for m in merges {
            let mut joined = members[m.a].clone();
            joined.extend(&members[m.b]);
            let delta = sse(&joined) - sse(&members[m.a]) - sse(&members[m.b]);
            assert!((m.height - 2.0 * delta).abs() < 1e-9);
            members[m.a] = joined;
        }
    }

    #[test]
    fn nearest_pair_first() {
        let p = Matrix::from_vec(3, 1, vec![0.0, 1.0, 10.0]).unwrap();
        assert_eq!(hierarchical(&p, 2, Linkage::Complete).unwrap(), vec![1, 1, 2]);
    }

    #[test]
    fn extremes_of_k() {
        let p = random_points(8, 3);
        let all = hierarchical(&p, 8, Linkage::Ward).unwrap();
        let mut s = all.clone();
        s.sort_unstable();
        assert_eq!(s, (1..=8).collect::<Vec<_>>());
        assert!(hierarchical(&p, 1, Linkage::Complete).unwrap().iter().all(|&l| l == 1));
    }

    #[test]
    fn ties_merge_lowest_pair() {
        // equal spacing: every adjacent pair ties at distance 1
        let p = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let merges = agglomerate(&p, Linkage::Complete).unwrap();
        assert_eq!((merges[0].a, merges[0].b), (0, 1));
        assert_eq!((merges[1].a, merges[1].b), (2, 3));
    }
}
