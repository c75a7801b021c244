use nalgebra::{DMatrix, SymmetricEigen};

use super::{Embedding, PCA_DEFAULT_VARIANCE};
use crate::diag;
use crate::error::{invalid, Result};
use crate::matrix::Matrix;

/// Eigenpairs of the sample covariance, sorted by decreasing eigenvalue
/// (ties by original index). Negative round-off eigenvalues are clamped to 0.
fn covariance_eigen(centered: &Matrix) -> (Vec<f64>, DMatrix<f64>) {
    let (n, d) = (centered.rows(), centered.cols());
    let x = DMatrix::from_row_slice(n, d, centered.as_slice());
    let cov = (x.transpose() * &x) / ((n.max(2) - 1) as f64);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Principal-component scores of the column-centered matrix. Each
/// component's sign makes its largest-magnitude loading positive.
/// `q = None` keeps the fewest components reaching 90% explained variance.
pub fn pca(m: &Matrix, ids: &[String], q: Option<usize>) -> Result<Embedding> {
    let (n, d) = (m.rows(), m.cols());
    if n < 2 || d == 0 {
        return Err(invalid("PCA needs at least 2 rows and 1 column"));
    }
    m.ensure_finite()?;
    let mut centered = m.clone();
    for j in 0..d {
        let mean = (0..n).map(|i| m.get(i, j)).sum::<f64>() / n as f64;
        for i in 0..n {
            centered.set(i, j, m.get(i, j) - mean);
        }
    }
    let (values, vectors) = covariance_eigen(&centered);
    let total: f64 = values.iter().sum();
    let ratios: Vec<f64> = values
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    let q = match q {
        Some(q) if q >= 1 && q <= d => q,
        Some(q) => return Err(invalid(format!("PCA components {q} not in 1..={d}"))),
        None => {
            let mut acc = 0.0;
            ratios
                .iter()
                .position(|r| {
                    acc += r;
                    acc >= PCA_DEFAULT_VARIANCE - 1e-12
                })
                .map_or(d, |p| p + 1)
        }
    };
    let tol = 1e-12 * values[0].max(1.0);
    let rank = values.iter().filter(|v| **v > tol).count();
    if q > rank {
        diag::warn(format!("PCA: {q} components requested but data rank is {rank}; extra components have zero variance"));
    }

    let mut loadings = Matrix::zeros(d, q);
    for c in 0..q {
        let col: Vec<f64> = (0..d).map(|r| vectors[(r, c)]).collect();
        let pivot = col
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > col[best].abs() { i } else { best });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (r, v) in col.iter().enumerate() {
            loadings.set(r, c, sign * v);
        }
    }
    let mut scores = Matrix::zeros(n, q);
    for i in 0..n {
        let row = centered.row(i);
        for c in 0..q {
            scores.set(i, c, (0..d).map(|r| row[r] * loadings.get(r, c)).sum());
        }
    }
    let mut e = Embedding::new(scores, ids.to_vec(), if q == d { "pca".to_string() } else { format!("pca-{q}") })?;
    e.explained_variance_ratio = Some(ratios[..q].to_vec());
    e.loadings = Some(loadings);
    Ok(e)
}
