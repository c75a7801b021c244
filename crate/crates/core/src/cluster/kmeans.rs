//! k-means with k-means++ seeding and Lloyd iterations.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{canonical_labels, check_input};
use crate::error::{numeric, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest objective wins.
    pub n_init: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions { max_iter: 300, n_init: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Matrix,
    /// Within-cluster sum of squares.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after every assignment step.
    pub history: Vec<f64>,
}

pub fn kmeans(m: &Matrix, k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(m, k, seed, &KMeansOptions::default())
}

pub fn kmeans_with(m: &Matrix, k: usize, seed: u64, opts: &KMeansOptions) -> Result<KMeansResult> {
    check_input(m, k)?;
    let mut best: Option<KMeansResult> = None;
    for run in 0..opts.n_init.max(1) {
        let r = lloyd(m, k, seed::derive(seed, "kmeans", &[run as u64]), opts.max_iter)?;
        if best.as_ref().map_or(true, |b| r.objective < b.objective) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one run");
    // relabel by first appearance, permuting centers to match
    let labels = canonical_labels(&best.labels);
    let mut centers = Matrix::zeros(k, m.cols());
    for (old, new) in best.labels.iter().zip(&labels) {
        centers.row_mut(new - 1).copy_from_slice(best.centers.row(old - 1));
    }
    best.labels = labels;
    best.centers = centers;
    Ok(best)
}

/// k-means++: first center uniform, then proportional to squared distance.
fn plus_plus(m: &Matrix, k: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let n = m.rows();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(m.row(i), m.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, v) in d2.iter().enumerate() {
                acc += v;
                if acc > target && *v > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(m.row(i), m.row(next)));
        }
    }
    chosen
}

fn nearest(row: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = sq_dist(row, centers.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Give every empty cluster the point farthest from its current center,
/// taken from clusters with more than one member.
fn repair_empty(m: &Matrix, assign: &mut [usize], centers: &mut Matrix) {
    let k = centers.rows();
    let mut counts = vec![0usize; k];
    for &a in assign.iter() {
        counts[a] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let far = (0..assign.len())
            .filter(|&i| counts[assign[i]] > 1)
            .map(|i| (i, sq_dist(m.row(i), centers.row(assign[i]))))
            .fold(None, |b: Option<(usize, f64)>, (i, v)| match b {
                Some((_, bv)) if bv >= v => b,
                _ => Some((i, v)),
            });
        if let Some((i, _)) = far {
            counts[assign[i]] -= 1;
            counts[c] = 1;
            assign[i] = c;
            centers.row_mut(c).copy_from_slice(m.row(i));
        }
    }
}

fn update_centers(m: &Matrix, assign: &[usize], centers: &mut Matrix) {
    let (k, d) = (centers.rows(), m.cols());
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &a) in assign.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(m.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for (r, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                *r = s / counts[c] as f64;
            }
        }
    }
}

fn lloyd(m: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    let n = m.rows();
    let mut rng = seed::rng(seed);
    let mut centers = m.select_rows(&plus_plus(m, k, &mut rng));
    let objective_of = |assign: &[usize], centers: &Matrix| -> f64 {
        (0..n).map(|i| sq_dist(m.row(i), centers.row(assign[i]))).sum()
    };
    let mut assign: Vec<usize> = (0..n).map(|i| nearest(m.row(i), &centers).0).collect();
    repair_empty(m, &mut assign, &mut centers);
    let mut history = vec![objective_of(&assign, &centers)];
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        update_centers(m, &assign, &mut centers);
        let mut new_assign: Vec<usize> = (0..n).map(|i| nearest(m.row(i), &centers).0).collect();
        repair_empty(m, &mut new_assign, &mut centers);
        let obj = objective_of(&new_assign, &centers);
        let prev = *history.last().expect("history");
        if obj > prev + 1e-9 * prev.abs().max(1.0) {
            return Err(numeric(format!("k-means objective increased from {prev} to {obj}")));
        }
        history.push(obj);
        let done = new_assign == assign;
        assign = new_assign;
        if done {
            break;
        }
    }
    let mut counts = vec![0usize; k];
    for &a in &assign {
        counts[a] += 1;
    }
    if counts.contains(&0) {
        return Err(numeric("k-means left an empty cluster"));
    }
    // final centers are the means of the final assignment
    update_centers(m, &assign, &mut centers);
    let objective = objective_of(&assign, &centers);
    Ok(KMeansResult {
        labels: assign.iter().map(|a| a + 1).collect(),
        centers,
        objective,
        iterations,
        history,
    })
}
