use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Embedding;
use crate::error::{invalid, Error, Result};
use crate::matrix::{sq_dist, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionCurve {
    pub method: String,
    pub ks: Vec<usize>,
    pub retention: Vec<f64>,
}

/// Neighbors of row `i` sorted by distance, ties by row index, self excluded.
fn neighbor_order(m: &Matrix, i: usize) -> Vec<usize> {
    let ri = m.row(i);
    let d: Vec<f64> = (0..m.rows()).map(|j| sq_dist(ri, m.row(j))).collect();
    let mut order: Vec<usize> = (0..m.rows()).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    order
}

/// Mean fraction of each row's `k` nearest neighbors shared between `high`
/// and `low`, for every `k` in `ks`.
pub fn retention_many(high: &Matrix, low: &Matrix, ks: &[usize]) -> Result<Vec<f64>> {
    let n = high.rows();
    if low.rows() != n {
        return Err(invalid("high and low matrices have different row counts"));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k >= n) {
        return Err(invalid(format!("neighborhood size {k} not in 1..={}", n.saturating_sub(1))));
    }
    let per_row: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let hi = neighbor_order(high, i);
            let lo = neighbor_order(low, i);
            let mut rank_low = vec![usize::MAX; n];
            for (r, &j) in lo.iter().enumerate() {
                rank_low[j] = r;
            }
            ks.iter()
                .map(|&k| hi[..k].iter().filter(|&&j| rank_low[j] < k).count() as f64 / k as f64)
                .collect()
        })
        .collect();
    Ok((0..ks.len())
        .map(|c| per_row.iter().map(|r| r[c]).sum::<f64>() / n as f64)
        .collect())
}

fn check_ids(high_ids: &[String], low: &Embedding) -> Result<()> {
    if high_ids != low.ids.as_slice() {
        return Err(Error::Data(format!("embedding `{}` row ids do not match the feature matrix", low.method)));
    }
    Ok(())
}

pub fn neighbor_retention(high: &Matrix, high_ids: &[String], low: &Embedding, k: usize) -> Result<f64> {
    check_ids(high_ids, low)?;
    Ok(retention_many(high, &low.coords, &[k])?[0])
}

pub fn retention_curve(high: &Matrix, high_ids: &[String], low: &Embedding, ks: &[usize]) -> Result<RetentionCurve> {
    check_ids(high_ids, low)?;
    Ok(RetentionCurve {
        method: low.method.clone(),
        ks: ks.to_vec(),
        retention: retention_many(high, &low.coords, ks)?,
    })
}

/// CSV with header `method,k,retention`.
pub fn write_retention_csv(curves: &[RetentionCurve], path: &Path) -> Result<()> {
    let mut w = crate::error::csv_writer(path)?;
    w.write_record(["method", "k", "retention"])?;
    for c in curves {
        for (k, r) in c.ks.iter().zip(&c.retention) {
            w.write_record([c.method.clone(), k.to_string(), r.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
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
    fn identity_and_scaling_retain_everything() {
        let m = random(20, 4, 1);
        let ks: Vec<usize> = (1..20).collect();
        assert!(retention_many(&m, &m, &ks).unwrap().iter().all(|&r| r == 1.0));
        assert!(retention_many(&m, &m.scaled(2.0), &ks).unwrap().iter().all(|&r| r == 1.0));
    }

    #[test]
    fn matches_brute_force_on_fixed_points() {
        let high = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![3.0, 3.0],
            vec![5.0, 1.0],
            vec![-2.0, 4.0],
        ])
        .unwrap();
        let low = Matrix::from_rows(&[vec![0.0], vec![4.0], vec![1.0], vec![2.0], vec![9.0], vec![-3.0]]).unwrap();
        // hand-built distance tables, brute-force kNN via full enumeration
        let dist = |m: &Matrix, a: usize, b: usize| sq_dist(m.row(a), m.row(b));
        let knn = |m: &Matrix, i: usize, k: usize| {
            let mut all: Vec<(f64, usize)> = (0..6).filter(|&j| j != i).map(|j| (dist(m, i, j), j)).collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.into_iter().take(k).map(|e| e.1).collect::<std::collections::BTreeSet<_>>()
        };
        for k in 1..6 {
            let want = (0..6)
                .map(|i| knn(&high, i, k).intersection(&knn(&low, i, k)).count() as f64 / k as f64)
                .sum::<f64>()
                / 6.0;
            let got = retention_many(&high, &low, &[k]).unwrap()[0];
            assert!((got - want).abs() < 1e-15, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn full_neighborhood_is_one_and_bounds_hold() {
        let a = random(15, 3, 2);
        let b = random(15, 2, 3);
        let r = retention_many(&a, &b, &[1, 3, 7, 14]).unwrap();
        assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(r[3], 1.0);
    }

    #[test]
    fn id_mismatch_rejected() {
        let a = random(4, 2, 1);
        let ids: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let mut other = ids.clone();
        other.swap(0, 1);
        let e = Embedding::new(a.clone(), other, "x").unwrap();
        assert!(neighbor_retention(&a, &ids, &e, 2).is_err());
        assert!(retention_many(&a, &a, &[4]).is_err());
    }
}
