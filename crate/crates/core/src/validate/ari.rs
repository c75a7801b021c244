use std::collections::HashMap;

use crate::cluster::canonical_labels;
use crate::error::{invalid, Result};

fn comb2(x: u64) -> i128 {
    let x = x as i128;
    x * (x - 1) / 2
}

/// Adjusted Rand index by pair counting.
///
/// When the chance-corrected denominator vanishes (both partitions
/// trivial) the result is 1 for identical partitions and 0 otherwise.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid(format!("label vectors differ in length ({} vs {})", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(invalid("ARI needs at least two rows"));
    }
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut ca: HashMap<usize, u64> = HashMap::new();
    let mut cb: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let index: i128 = joint.values().map(|&c| comb2(c)).sum();
    let sa: i128 = ca.values().map(|&c| comb2(c)).sum();
    let sb: i128 = cb.values().map(|&c| comb2(c)).sum();
    let total = comb2(n as u64);
    // scaled by 2 * C(n, 2) so everything stays integral
    let num = 2 * (index * total - sa * sb);
    let den = (sa + sb) * total - 2 * sa * sb;
    if den == 0 {
        return Ok(if canonical_labels(a) == canonical_labels(b) { 1.0 } else { 0.0 });
    }
    Ok(num as f64 / den as f64)
}
