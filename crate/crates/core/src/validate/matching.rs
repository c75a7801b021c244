use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Maximum-weight assignment of rows to columns of a nonnegative weight
/// table (Hungarian algorithm). Returns, per row, the assigned column;
/// rows beyond the smaller dimension are left unassigned.
pub fn hungarian_max(weights: &[Vec<u64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let max = weights.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| -> i64 {
        let w = if transpose { weights[j][i] } else { weights[i][j] };
        max - w as i64
    };
    // potentials-based O(n^2 m), 1-indexed with a virtual column 0
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; rows];
    for j in 1..=m {
        if p[j] != 0 {
            let (r, c) = if transpose { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) };
            out[r] = Some(c);
        }
    }
    out
}

/// Optimal one-to-one correspondence between two labelings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMatching {
    /// `(predicted label, reference label)` pairs.
    pub pairs: Vec<(usize, usize)>,
    pub total_overlap: u64,
}

impl ClusterMatching {
    pub fn reference_for(&self, pred: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == pred).map(|p| p.1)
    }

    pub fn predicted_for(&self, reference: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == reference).map(|p| p.0)
    }
}

/// Contingency table over explicit label universes.
pub fn contingency(pred: &[usize], reference: &[usize], pred_labels: &[usize], ref_labels: &[usize]) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; ref_labels.len()]; pred_labels.len()];
    for (p, r) in pred.iter().zip(reference) {
        if let (Some(i), Some(j)) = (pred_labels.iter().position(|x| x == p), ref_labels.iter().position(|x| x == r)) {
            t[i][j] += 1;
        }
    }
    t
}

/// Match over the given label universes (labels absent from the data still
/// take part, with zero overlap).
pub fn match_clusters_in(pred: &[usize], reference: &[usize], pred_labels: &[usize], ref_labels: &[usize]) -> Result<ClusterMatching> {
    if pred.len() != reference.len() {
        return Err(invalid("labelings differ in length"));
    }
    let table = contingency(pred, reference, pred_labels, ref_labels);
    let assign = hungarian_max(&table);
    let mut pairs = Vec::new();
    let mut total = 0;
    for (i, a) in assign.iter().enumerate() {
        if let Some(j) = a {
            pairs.push((pred_labels[i], ref_labels[*j]));
            total += table[i][*j];
        }
    }
    pairs.sort_unstable();
    Ok(ClusterMatching {
        pairs,
        total_overlap: total,
    })
}

fn universe(labels: &[usize]) -> Vec<usize> {
    let mut u = labels.to_vec();
    u.sort_unstable();
    u.dedup();
    u
}

/// Maximize total overlap between the clusters of `pred` and `reference`.
pub fn match_clusters(pred: &[usize], reference: &[usize]) -> Result<ClusterMatching> {
    match_clusters_in(pred, reference, &universe(pred), &universe(reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn recovers_permutation() {
        let reference = vec![1, 1, 2, 2, 3, 3, 3];
        let pred: Vec<usize> = reference.iter().map(|&l| [0, 3, 1, 2][l]).collect();
        let m = match_clusters(&pred, &reference).unwrap();
        assert_eq!(m.pairs, vec![(1, 2), (2, 3), (3, 1)]);
        assert_eq!(m.total_overlap, 7);
        let id = match_clusters(&reference, &reference).unwrap();
        assert_eq!(id.pairs, vec![(1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = crate::seed::rng(21);
        for k in [3usize, 4] {
            for _ in 0..100 {
                let n = rng.gen_range(5..40);
                let a: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=k)).collect();
                let b: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=k)).collect();
                let labels: Vec<usize> = (1..=k).collect();
                let t = contingency(&a, &b, &labels, &labels);
                let best = permutations(k)
                    .iter()
                    .map(|p| (0..k).map(|i| t[i][p[i]]).sum::<u64>())
                    .max()
                    .unwrap();
                let m = match_clusters_in(&a, &b, &labels, &labels).unwrap();
                assert_eq!(m.total_overlap, best);
                let identity: u64 = (0..k).map(|i| t[i][i]).sum();
                assert!(m.total_overlap >= identity);
            }
        }
    }

    #[test]
    fn rectangular_leaves_surplus_unmatched() {
        let pred = vec![1, 1, 2, 2, 3, 3];
        let reference = vec![1, 1, 1, 2, 2, 2];
        let m = match_clusters(&pred, &reference).unwrap();
        assert_eq!(m.pairs.len(), 2);
        assert_eq!(m.total_overlap, 4);
        let wide = hungarian_max(&[vec![1, 5, 2]]);
        assert_eq!(wide, vec![Some(1)]);
        let tall = hungarian_max(&[vec![1], vec![5], vec![2]]);
        assert_eq!(tall, vec![None, Some(0), None]);
    }
}
