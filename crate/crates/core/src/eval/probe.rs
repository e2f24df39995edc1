//! Linear probe on frozen embeddings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub l2: f64,
    pub steps: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { l2: 1e-3, steps: 500 }
    }
}

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var.iter().map(|v| if *v > 1e-24 { 1.0 / v.sqrt() } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    /// Standardized rows with a trailing bias column of ones.
    fn apply(&self, x: &Matrix) -> Matrix {
        let d = x.cols();
        Matrix::from_rows(
            d + 1,
            x.iter_rows().map(|r| {
                let mut out: Vec<f64> = r.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) * s).collect();
                out.push(1.0);
                out
            }),
        )
    }
}

/// Largest eigenvalue of `X^T X / n` by power iteration from a fixed start.
fn gram_top_eigenvalue(x: &Matrix) -> f64 {
    let n = x.rows() as f64;
    let mut v = vec![1.0 / (x.cols() as f64).sqrt(); x.cols()];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let xv: Vec<f64> = x.iter_rows().map(|r| dot(r, &v)).collect();
        let mut w = vec![0.0; x.cols()];
        for (r, a) in x.iter_rows().zip(&xv) {
            for (wi, ri) in w.iter_mut().zip(r) {
                *wi += a * ri / n;
            }
        }
        let nw = dot(&w, &w).sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        lambda = nw;
        v = w.into_iter().map(|x| x / nw).collect();
    }
    lambda
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Fits an L2-penalized logistic regression on `train` (columns standardized
/// with train statistics; the bias is not penalized) by full-batch gradient
/// descent with step `1 / L` for a fixed number of steps, and returns the
/// raw decision values on `eval`.
pub fn linear_probe_scores(train: &Matrix, train_labels: &[bool], eval: &Matrix, cfg: &ProbeConfig) -> Result<Vec<f64>> {
    if train.rows() != train_labels.len() {
        return Err(Error::DimensionMismatch { what: "probe labels".into(), expected: train.rows(), got: train_labels.len() });
    }
    if eval.cols() != train.cols() {
        return Err(Error::DimensionMismatch { what: "probe eval features".into(), expected: train.cols(), got: eval.cols() });
    }
    let pos = train_labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == train_labels.len() {
        return Err(Error::Undefined("linear probe needs both classes in training data".into()));
    }
    let std = Standardizer::fit(train);
    let x = std.apply(train);
    let d = x.cols();
    let n = x.rows() as f64;
    let lipschitz = 0.25 * gram_top_eigenvalue(&x) + cfg.l2;
    let step = 1.0 / lipschitz;

    let y: Vec<f64> = train_labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut w = vec![0.0; d];
    let mut grad = vec![0.0; d];
    for _ in 0..cfg.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (r, yi) in x.iter_rows().zip(&y) {
            let e = (sigmoid(dot(r, &w)) - yi) / n;
            for (g, v) in grad.iter_mut().zip(r) {
                *g += e * v;
            }
        }
        for j in 0..d - 1 {
            grad[j] += cfg.l2 * w[j];
        }
        for (wj, g) in w.iter_mut().zip(&grad) {
            *wj -= step * g;
        }
    }
    Ok(std.apply(eval).iter_rows().map(|r| dot(r, &w)).collect())
}
