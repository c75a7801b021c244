//! Exact (O(n²)) t-SNE.
//!
//! Per-row Gaussian bandwidths are calibrated by bisection so each
//! conditional distribution has entropy `ln(perplexity)`. The joint `P` is
//! the symmetrized conditional matrix divided by `2n`. The low-dimensional
//! kernel is Student-t with one degree of freedom, and `KL(P || Q)` is
//! minimized by gradient descent with momentum and per-coordinate gains.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Embedding;
use crate::error::{invalid, numeric, Result};
use crate::matrix::{pairwise_sq_dists, sq_dist, Matrix};
use crate::seed;

/// Floor applied to Q entries inside the objective.
pub const Q_FLOOR: f64 = 1e-12;

/// Target accuracy of the perplexity calibration, in nats.
pub const ENTROPY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TsneInit {
    /// First principal components rescaled to standard deviation `init_sd`.
    Pca,
    /// Isotropic Gaussian with standard deviation `init_sd`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneOptions {
    pub dims: usize,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub min_gain: f64,
    pub init: TsneInit,
    pub init_sd: f64,
}

impl Default for TsneOptions {
    fn default() -> Self {
        TsneOptions {
            dims: 2,
            iterations: 1000,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            min_gain: 0.01,
            init: TsneInit::Pca,
            init_sd: 1e-4,
        }
    }
}

/// Row-wise conditional affinities `p(j|i)` for the given squared
/// distances, plus the achieved entropy (nats) of each row.
pub fn conditional_affinities(sq_dists: &[f64], n: usize, perplexity: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if sq_dists.len() != n * n {
        return Err(invalid("distance matrix shape mismatch"));
    }
    if n < 2 || !(perplexity >= 1.0 && perplexity < (n - 1) as f64) {
        return Err(invalid(format!("perplexity {perplexity} must lie in [1, {})", n.saturating_sub(1))));
    }
    let target = perplexity.ln();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| calibrate_row(&sq_dists[i * n..(i + 1) * n], i, target))
        .collect();
    let mut p = Vec::with_capacity(n * n);
    let mut h = Vec::with_capacity(n);
    for (row, ent) in rows {
        p.extend(row);
        h.push(ent);
    }
    if h.iter().any(|e| (e - target).abs() > ENTROPY_TOL) {
        return Err(numeric("perplexity calibration did not converge"));
    }
    Ok((p, h))
}

/// Entropy and probabilities of `exp(-beta * (d - dmin))` over `j != i`.
fn row_distribution(d: &[f64], i: usize, dmin: f64, beta: f64, out: &mut [f64]) -> f64 {
    let mut z = 0.0;
    let mut weighted = 0.0;
    for (j, (&dj, o)) in d.iter().zip(out.iter_mut()).enumerate() {
        if j == i {
            *o = 0.0;
            continue;
        }
        let shifted = dj - dmin;
        let w = (-beta * shifted).exp();
        *o = w;
        z += w;
        weighted += w * shifted;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    z.ln() + beta * weighted / z
}

fn calibrate_row(d: &[f64], i: usize, target: f64) -> (Vec<f64>, f64) {
    let dmin = d
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let mut p = vec![0.0; d.len()];
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut beta = 1.0;
    let mut h = row_distribution(d, i, dmin, beta, &mut p);
    for _ in 0..500 {
        let diff = h - target;
        if diff.abs() < 1e-10 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_infinite() { beta * 2.0 } else { (beta + hi) / 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
        if hi.is_finite() && hi - lo <= f64::EPSILON * hi {
            break;
        }
        h = row_distribution(d, i, dmin, beta, &mut p);
    }
    (p, h)
}

/// Symmetrized joint probabilities `(p(j|i) + p(i|j)) / 2n`.
pub fn joint_probabilities(p_cond: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in i + 1..n {
            let v = (p_cond[i * n + j] + p_cond[j * n + i]) / denom;
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
    }
    p
}

/// Joint `P` for the rows of `x` at the given perplexity.
pub fn joint_from_data(x: &Matrix, perplexity: f64) -> Result<Vec<f64>> {
    let n = x.rows();
    let d = pairwise_sq_dists(x);
    let (pc, _) = conditional_affinities(&d, n, perplexity)?;
    Ok(joint_probabilities(&pc, n))
}

/// Per-row sums of the unnormalized Student-t kernel, summed in row order.
fn kernel_normalizer(y: &Matrix) -> f64 {
    let n = y.rows();
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = y.row(i);
            (0..n)
                .filter(|&j| j != i)
                .map(|j| 1.0 / (1.0 + sq_dist(yi, y.row(j))))
                .sum()
        })
        .collect();
    partial.iter().sum()
}

/// `KL(P || Q)` with Q floored at [`Q_FLOOR`].
pub fn kl_divergence(p: &[f64], y: &Matrix) -> f64 {
    let n = y.rows();
    let z = kernel_normalizer(y);
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = y.row(i);
            let mut s = 0.0;
            for j in 0..n {
                let pij = p[i * n + j];
                if j == i || pij <= 0.0 {
                    continue;
                }
                let q = (1.0 / (1.0 + sq_dist(yi, y.row(j))) / z).max(Q_FLOOR);
                s += pij * (pij / q).ln();
            }
            s
        })
        .collect();
    partial.iter().sum()
}

/// Analytic gradient `4 Σ_j (p_ij − q_ij)(y_i − y_j)/(1 + |y_i − y_j|²)`,
/// with `P` scaled by `scale` (early exaggeration).
pub fn kl_gradient_scaled(p: &[f64], y: &Matrix, scale: f64) -> Matrix {
    let (n, q) = (y.rows(), y.cols());
    let z = kernel_normalizer(y);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = y.row(i);
            let mut g = vec![0.0; q];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let yj = y.row(j);
                let num = 1.0 / (1.0 + sq_dist(yi, yj));
                let coeff = 4.0 * (scale * p[i * n + j] - num / z) * num;
                for c in 0..q {
                    g[c] += coeff * (yi[c] - yj[c]);
                }
            }
            g
        })
        .collect();
    Matrix::from_vec(n, q, rows.concat()).expect("gradient shape")
}

pub fn kl_gradient(p: &[f64], y: &Matrix) -> Matrix {
    kl_gradient_scaled(p, y, 1.0)
}

/// Result of a t-SNE run with objective values for diagnostics.
#[derive(Debug, Clone)]
pub struct TsneRun {
    pub coords: Matrix,
    pub initial_kl: f64,
    pub final_kl: f64,
}

fn initial_layout(x: &Matrix, opts: &TsneOptions, seed: u64) -> Result<Matrix> {
    let n = x.rows();
    let random = |seed: u64| -> Result<Matrix> {
        let normal = Normal::new(0.0, opts.init_sd).map_err(|e| invalid(e.to_string()))?;
        let mut rng = seed::rng(seed::derive(seed, "tsne-init", &[]));
        Matrix::from_vec(n, opts.dims, (0..n * opts.dims).map(|_| normal.sample(&mut rng)).collect())
    };
    if opts.init == TsneInit::Random || x.cols() < opts.dims {
        return random(seed);
    }
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let e = super::pca(x, &ids, Some(opts.dims))?;
    let first = e.coords.column(0);
    let mean = first.iter().sum::<f64>() / n as f64;
    let sd = (first.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1).max(1) as f64).sqrt();
    if !(sd > 0.0) {
        return random(seed);
    }
    Ok(e.coords.scaled(opts.init_sd / sd))
}

/// Gradient descent from `init` on a precomputed joint `P`.
pub fn optimize(p: &[f64], init: Matrix, opts: &TsneOptions) -> Result<TsneRun> {
    let (n, q) = (init.rows(), init.cols());
    let initial_kl = kl_divergence(p, &init);
    let mut y = init;
    let mut update = vec![0.0f64; n * q];
    let mut gains = vec![1.0f64; n * q];
    for it in 0..opts.iterations {
        let scale = if it < opts.exaggeration_iters { opts.exaggeration } else { 1.0 };
        let momentum = if it < opts.momentum_switch { opts.momentum } else { opts.final_momentum };
        let grad = kl_gradient_scaled(p, &y, scale);
        let g = grad.as_slice();
        for idx in 0..n * q {
            gains[idx] = if (g[idx] > 0.0) != (update[idx] > 0.0) {
                gains[idx] + 0.2
            } else {
                (gains[idx] * 0.8).max(opts.min_gain)
            };
            update[idx] = momentum * update[idx] - opts.learning_rate * gains[idx] * g[idx];
        }
        let mut means = vec![0.0; q];
        for i in 0..n {
            let row = y.row_mut(i);
            for c in 0..q {
                row[c] += update[i * q + c];
                means[c] += row[c];
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        for i in 0..n {
            for (c, v) in y.row_mut(i).iter_mut().enumerate() {
                *v -= means[c];
            }
        }
    }
    y.ensure_finite()
        .map_err(|_| numeric("t-SNE diverged to non-finite coordinates"))?;
    let final_kl = kl_divergence(p, &y);
    Ok(TsneRun {
        coords: y,
        initial_kl,
        final_kl,
    })
}

/// Full t-SNE run returning diagnostics.
pub fn tsne_run(x: &Matrix, perplexity: f64, seed: u64, opts: &TsneOptions) -> Result<TsneRun> {
    let n = x.rows();
    if !(perplexity >= 2.0 && perplexity < n as f64 / 3.0) {
        return Err(invalid(format!(
            "t-SNE perplexity {perplexity} must satisfy 2 <= perplexity < n/3 = {:.3}",
            n as f64 / 3.0
        )));
    }
    if opts.dims == 0 {
        return Err(invalid("t-SNE needs at least one output dimension"));
    }
    x.ensure_finite()?;
    let p = joint_from_data(x, perplexity)?;
    let init = initial_layout(x, opts, seed)?;
    optimize(&p, init, opts)
}

pub fn tsne(x: &Matrix, ids: &[String], perplexity: f64, seed: u64, opts: &TsneOptions) -> Result<Embedding> {
    let run = tsne_run(x, perplexity, seed, opts)?;
    Embedding::new(run.coords, ids.to_vec(), format!("tsne-{perplexity}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = crate::seed::rng(seed);
        Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn calibration_hits_target_entropy() {
        let x = random(5, 3, 1);
        let d = pairwise_sq_dists(&x);
        let (p, h) = conditional_affinities(&d, 5, 2.0).unwrap();
        for i in 0..5 {
            assert!((h[i] - 2f64.ln()).abs() <= 1e-5);
            // recompute entropy from the returned row
            let ent: f64 = (0..5).filter(|&j| p[i * 5 + j] > 0.0).map(|j| -p[i * 5 + j] * p[i * 5 + j].ln()).sum();
            assert!((ent - 2f64.ln()).abs() <= 1e-5);
            assert_eq!(p[i * 5 + i], 0.0);
        }
    }

    #[test]
    fn joint_is_symmetric_normalized() {
        let x = random(30, 4, 2);
        let p = joint_from_data(&x, 5.0).unwrap();
        let n = 30;
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() <= 1e-9);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(p[i * n + j], p[j * n + i]);
                assert!(p[i * n + j] >= 0.0);
            }
        }
    }

    #[test]
    fn perplexity_range_enforced() {
        let x = random(12, 2, 3);
        let ids: Vec<String> = (0..12).map(|i| i.to_string()).collect();
        assert!(tsne(&x, &ids, 4.0, 0, &TsneOptions::default()).is_err());
        assert!(tsne(&x, &ids, 1.5, 0, &TsneOptions::default()).is_err());
    }

    #[test]
    fn short_run_is_deterministic_and_descends() {
        let x = random(40, 5, 4);
        let opts = TsneOptions::default();
        let a = tsne_run(&x, 5.0, 9, &opts).unwrap();
        let b = tsne_run(&x, 5.0, 9, &opts).unwrap();
        assert_eq!(a.coords, b.coords);
        assert!(a.final_kl < a.initial_kl);
    }
}
