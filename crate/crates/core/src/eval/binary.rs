//! Threshold-free binary metrics on raw scores.

use super::rank::average_ranks;
use crate::error::{Error, Result};

fn check(labels: &[bool], scores: &[f64]) -> Result<()> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch { what: "binary metric inputs".into(), expected: labels.len(), got: scores.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Undefined("non-finite score".into()));
    }
    Ok(())
}

/// ROC-AUC as the Mann-Whitney statistic, `P(s+ > s-) + 0.5 P(s+ = s-)`,
/// computed from average ranks.
pub fn auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    check(labels, scores)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("AUC needs both classes".into()));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: mean of precision@k over the positions k of the
/// positives, in descending score order. Tied scores are ordered by
/// ascending item index (stable sort), so results are reproducible.
pub fn average_precision(labels: &[bool], scores: &[f64]) -> Result<f64> {
    check(labels, scores)?;
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return Err(Error::Undefined("average precision needs a positive".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_cases() {
        let l = [false, false, true, true];
        assert_eq!(auc(&l, &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(auc(&l, &[0.5; 4]).unwrap(), 0.5);
        assert_eq!(auc(&l, &[0.9, 0.8, 0.2, 0.1]).unwrap(), 0.0);
        assert!(auc(&[true, true], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn ap_cases() {
        assert_eq!(average_precision(&[true, true, false], &[3.0, 2.0, 1.0]).unwrap(), 1.0);
        assert_eq!(average_precision(&[false, true, false], &[1.0, 5.0, 2.0]).unwrap(), 1.0);
        // two positives ranked last among five: (1/4 + 2/5) / 2
        let ap = average_precision(&[true, false, false, true, false], &[0.1, 0.9, 0.8, 0.0, 0.7]).unwrap();
        assert!((ap - (0.25 + 0.4) / 2.0).abs() < 1e-15);
        assert!(average_precision(&[false, false], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn ap_tie_order_is_by_index() {
        // all tied: order is 0,1,2 -> positive at position 2
        assert_eq!(average_precision(&[false, true, false], &[1.0; 3]).unwrap(), 0.5);
    }
}
