//! Macro-averaged pairwise ordering accuracy.

use rand::Rng;

use crate::data::PhysicsLabel;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Default per-class-pair budget above which pairs are sampled.
pub const DEFAULT_PAIR_CAP: usize = 100_000;

fn pair_score(lo: f64, hi: f64) -> f64 {
    if hi > lo {
        1.0
    } else if hi == lo {
        0.5
    } else {
        0.0
    }
}

/// For every ordered class pair `(a, b)` with `a` below `b` in the ordinal
/// order and both present, the fraction of cross-class instance pairs with
/// `score(b) > score(a)` (ties count 0.5); averaged over the available class
/// pairs. Class pairs with at most `pair_cap` instance pairs are enumerated,
/// larger ones are estimated from `pair_cap` pairs drawn with replacement
/// from a stream seeded by `seed`.
pub fn poa_macro(labels: &[PhysicsLabel], scores: &[f64], seed: u64, pair_cap: usize) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch { what: "POA inputs".into(), expected: labels.len(), got: scores.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Undefined("non-finite score".into()));
    }
    let by_class: Vec<Vec<f64>> = PhysicsLabel::ALL
        .iter()
        .map(|&c| labels.iter().zip(scores).filter(|(l, _)| **l == c).map(|(_, s)| *s).collect())
        .collect();
    let mut accs = Vec::new();
    for a in 0..3 {
        for b in a + 1..3 {
            let (lo, hi) = (&by_class[a], &by_class[b]);
            if lo.is_empty() || hi.is_empty() {
                continue;
            }
            let total = lo.len() * hi.len();
            let acc = if total <= pair_cap {
                lo.iter().map(|&x| hi.iter().map(|&y| pair_score(x, y)).sum::<f64>()).sum::<f64>() / total as f64
            } else {
                let mut rng = substream(seed, "poa", (a * 3 + b) as u64);
                (0..pair_cap)
                    .map(|_| pair_score(lo[rng.random_range(0..lo.len())], hi[rng.random_range(0..hi.len())]))
                    .sum::<f64>()
                    / pair_cap as f64
            };
            accs.push(acc);
        }
    }
    if accs.is_empty() {
        return Err(Error::Undefined("POA needs at least two classes".into()));
    }
    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
}
