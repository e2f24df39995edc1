//! Rank correlations between ordinal labels and projection scores.

use std::cmp::Ordering;

use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { what: "rank correlation inputs".into(), expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::Undefined("rank correlation needs at least two items".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Undefined("non-finite input".into()));
    }
    Ok(())
}

/// 1-based ranks with ties sharing the average of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean(i+1 ..= j)
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("constant input vector".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(labels: &[f64], scores: &[f64]) -> Result<f64> {
    check_pair(labels, scores)?;
    pearson(&average_ranks(labels), &average_ranks(scores))
}

/// Kendall's tau-b, `O(n log n)` (sort by `x`, count discordances with a
/// merge sort on `y`).
pub fn kendall_tau_b(labels: &[f64], scores: &[f64]) -> Result<f64> {
    check_pair(labels, scores)?;
    let n = labels.len();
    let mut pairs: Vec<(f64, f64)> = labels.iter().copied().zip(scores.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let tie_count = |len: u64| len * (len - 1) / 2;

    // ties in x and joint ties in (x, y)
    let (mut n1, mut n3) = (0u64, 0u64);
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for i in 1..n {
        if pairs[i].0 == pairs[i - 1].0 {
            run_x += 1;
            if pairs[i].1 == pairs[i - 1].1 {
                run_xy += 1;
            } else {
                n3 += tie_count(run_xy);
                run_xy = 1;
            }
        } else {
            n1 += tie_count(run_x);
            n3 += tie_count(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    n1 += tie_count(run_x);
    n3 += tie_count(run_xy);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys);

    let mut n2 = 0u64;
    let mut run_y = 1u64;
    for i in 1..n {
        if ys[i] == ys[i - 1] {
            run_y += 1;
        } else {
            n2 += tie_count(run_y);
            run_y = 1;
        }
    }
    n2 += tie_count(run_y);

    if n1 == n0 || n2 == n0 {
        return Err(Error::Undefined("all pairs tied on one variable".into()));
    }
    // concordant - discordant = n0 - n1 - n2 + n3 - 2 * swaps
    let numer = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let denom = ((n0 - n1) as f64).sqrt() * ((n0 - n2) as f64).sqrt();
    Ok((numer / denom).clamp(-1.0, 1.0))
}

/// Sorts `v` ascending and returns the number of inversions (pairs that
/// strictly decrease).
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mut buf = v.to_vec();
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if v[j].total_cmp(&v[i]) == Ordering::Less {
                    buf[k] = v[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + (end - j)].copy_from_slice(&v[j..end]);
            start = end;
        }
        v.copy_from_slice(&buf);
        width *= 2;
    }
    swaps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_orders() {
        let l = [0.0, 1.0, 2.0];
        assert_eq!(spearman(&l, &[-1.0, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(spearman(&l, &[1.0, 0.0, -1.0]).unwrap(), -1.0);
        assert_eq!(kendall_tau_b(&l, &[-1.0, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(kendall_tau_b(&l, &[1.0, 0.0, -1.0]).unwrap(), -1.0);
    }

    #[test]
    fn kendall_with_label_ties() {
        // concordant 4, discordant 0, ties in x: 2, ties in y: 0, n0 = 6
        let t = kendall_tau_b(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((t - 4.0 / (4.0f64 * 6.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_input_is_undefined() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(kendall_tau_b(&[0.0, 1.0, 2.0], &[5.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn inversion_count() {
        let mut v = [3.0, 1.0, 2.0, 2.0, 0.0];
        assert_eq!(merge_count(&mut v), 7);
        assert_eq!(v, [0.0, 1.0, 2.0, 2.0, 3.0]);
    }
}
