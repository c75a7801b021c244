//! Spectral clustering on an unweighted k-nearest-neighbor graph.
//!
//! The graph is symmetrized by union. The embedding uses the eigenvectors
//! of the `k` smallest eigenvalues of `L = I - D^{-1/2} W D^{-1/2}` (full
//! dense eigendecomposition), rows scaled to unit length, followed by
//! seeded k-means.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_input, kmeans_with, KMeansOptions};
use crate::diag;
use crate::error::{invalid, Result};
use crate::matrix::{sq_dist, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Restarts of the k-means run on the spectral embedding.
    pub n_init: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { n_init: 10 }
    }
}

/// Sorted adjacency lists of the union-symmetrized kNN graph. Neighbor
/// ties are broken by row index.
pub fn knn_graph(m: &Matrix, n_neighbors: usize) -> Vec<Vec<usize>> {
    let n = m.rows();
    let directed: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = m.row(i);
            let mut cand: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (sq_dist(ri, m.row(j)), j)).collect();
            let take = n_neighbors.min(cand.len());
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if take < cand.len() && take > 0 {
                cand.select_nth_unstable_by(take - 1, cmp);
            }
            cand.truncate(take);
            cand.into_iter().map(|c| c.1).collect()
        })
        .collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, nbrs) in directed.iter().enumerate() {
        for &j in nbrs {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Number of connected components.
pub fn component_count(adj: &[Vec<usize>]) -> usize {
    let mut seen = vec![false; adj.len()];
    let mut count = 0;
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

/// Dense symmetric normalized Laplacian of an unweighted graph. Isolated
/// vertices get a unit diagonal entry.
pub fn normalized_laplacian(adj: &[Vec<usize>]) -> DMatrix<f64> {
    let n = adj.len();
    let inv_sqrt: Vec<f64> = adj
        .iter()
        .map(|a| if a.is_empty() { 0.0 } else { 1.0 / (a.len() as f64).sqrt() })
        .collect();
    let mut l = DMatrix::<f64>::identity(n, n);
    for (i, nbrs) in adj.iter().enumerate() {
        for &j in nbrs {
            l[(i, j)] = -inv_sqrt[i] * inv_sqrt[j];
        }
    }
    l
}

/// Eigenvalues (ascending, ties by index) and the matching eigenvector
/// columns.
pub fn sorted_eigen(l: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = l.nrows();
    let eig = SymmetricEigen::new(l);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Row-normalized spectral embedding with `k` columns.
pub fn spectral_embedding(m: &Matrix, k: usize, n_neighbors: usize) -> Result<Matrix> {
    let n = m.rows();
    if n_neighbors >= n {
        return Err(invalid(format!("n_neighbors = {n_neighbors} must be below n = {n}")));
    }
    let adj = knn_graph(m, n_neighbors);
    let comps = component_count(&adj);
    if comps > k {
        diag::warn(format!("spectral: kNN graph has {comps} components, more than k = {k}"));
    }
    let isolated: Vec<usize> = (0..n).filter(|&i| adj[i].is_empty()).collect();
    if !isolated.is_empty() {
        diag::warn(format!("spectral: {} isolated vertices left at the origin", isolated.len()));
    }
    let (_, vectors) = sorted_eigen(normalized_laplacian(&adj));
    let mut emb = Matrix::zeros(n, k);
    for i in 0..n {
        if adj[i].is_empty() {
            continue;
        }
        let row = emb.row_mut(i);
        for c in 0..k {
            row[c] = vectors[(i, c)];
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(emb)
}

pub fn spectral(m: &Matrix, k: usize, n_neighbors: usize, seed: u64) -> Result<Vec<usize>> {
    spectral_with(m, k, n_neighbors, seed, &SpectralOptions::default())
}

pub fn spectral_with(m: &Matrix, k: usize, n_neighbors: usize, seed: u64, opts: &SpectralOptions) -> Result<Vec<usize>> {
    check_input(m, k)?;
    if n_neighbors == 0 {
        return Err(invalid("n_neighbors must be at least 1"));
    }
    let emb = spectral_embedding(m, k, n_neighbors)?;
    let km = KMeansOptions {
        n_init: opts.n_init,
        ..KMeansOptions::default()
    };
    Ok(kmeans_with(&emb, k, seed, &km)?.labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cliques() -> (Matrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for c in 0..2 {
            for i in 0..5 {
                let a = i as f64 * 0.4;
                rows.push(vec![c as f64 * 100.0 + a.cos(), a.sin()]);
                truth.push(c + 1);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn separated_cliques_split_perfectly() {
        let (m, truth) = two_cliques();
        let labels = spectral(&m, 2, 4, 1).unwrap();
        assert_eq!(labels, truth);
    }

    #[test]
    fn disconnected_graph_has_double_zero_eigenvalue() {
        let (m, _) = two_cliques();
        let adj = knn_graph(&m, 4);
        assert_eq!(component_count(&adj), 2);
        let (vals, _) = sorted_eigen(normalized_laplacian(&adj));
        assert!(vals[0].abs() < 1e-8 && vals[1].abs() < 1e-8);
        assert!(vals[2] > 1e-3);
    }

    #[test]
    fn laplacian_is_symmetric_psd() {
        let (ds, _) = crate::dataset::synth_planted(3, 15, 3, 2.0, 1.0, 2).unwrap();
        let adj = knn_graph(ds.features(), 5);
        let l = normalized_laplacian(&adj);
        assert_eq!(l.clone(), l.transpose());
        let (vals, _) = sorted_eigen(l);
        assert!(vals[0] >= -1e-8);
    }

    #[test]
    fn eigenpairs_of_ring_laplacian() {
        // repeated eigenvalues; older nalgebra returned wrong vectors here
        let m = Matrix::from_rows(
            &(0..100)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / 100.0;
                    vec![5.0 * t.cos(), 5.0 * t.sin()]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let l = normalized_laplacian(&knn_graph(&m, 10));
        let (vals, vecs) = sorted_eigen(l.clone());
        for c in 0..vals.len() {
            let r = &l * vecs.column(c) - vecs.column(c) * vals[c];
            assert!(r.norm() < 1e-10, "eigenpair {c}: residual {}", r.norm());
        }
    }

    #[test]
    fn union_symmetrization() {
        // point 3 is far: its nearest neighbor is 2, but nobody picks 3
        let m = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 10.0]).unwrap();
        let adj = knn_graph(&m, 1);
        assert!(adj[2].contains(&3) && adj[3].contains(&2));
        for (i, a) in adj.iter().enumerate() {
            for &j in a {
                assert!(adj[j].contains(&i));
            }
        }
    }

    #[test]
    fn neighbor_count_must_be_below_n() {
        let (m, _) = two_cliques();
        assert!(spectral(&m, 2, 10, 0).is_err());
    }
}
