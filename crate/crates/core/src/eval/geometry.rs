//! Severity axis, projections, per-class projection means and the physics
//! consistency ratio.

use serde::{Deserialize, Serialize};

use crate::data::PhysicsLabel;
use crate::error::{Error, Result};
use crate::matrix::{dot, euclidean, norm, Matrix};

/// Unit direction from the Supported centroid to the Head centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityAxis {
    pub direction: Vec<f64>,
}

fn centroid(z: &Matrix, labels: &[PhysicsLabel], class: PhysicsLabel) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; z.cols()];
    let mut n = 0usize;
    for (r, &l) in z.iter_rows().zip(labels) {
        if l == class {
            for (s, v) in sum.iter_mut().zip(r) {
                *s += v;
            }
            n += 1;
        }
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

pub fn severity_axis(train_z: &Matrix, train_labels: &[PhysicsLabel]) -> Result<SeverityAxis> {
    if train_z.rows() != train_labels.len() {
        return Err(Error::DimensionMismatch { what: "axis labels".into(), expected: train_z.rows(), got: train_labels.len() });
    }
    let head = centroid(train_z, train_labels, PhysicsLabel::Head)
        .ok_or_else(|| Error::Undefined("severity axis: no Head window in the training split".into()))?;
    let sup = centroid(train_z, train_labels, PhysicsLabel::Supported)
        .ok_or_else(|| Error::Undefined("severity axis: no Supported window in the training split".into()))?;
    let diff: Vec<f64> = head.iter().zip(&sup).map(|(h, s)| h - s).collect();
    let n = norm(&diff);
    if n == 0.0 {
        return Err(Error::Undefined("severity axis: Head and Supported centroids coincide".into()));
    }
    Ok(SeverityAxis { direction: diff.into_iter().map(|d| d / n).collect() })
}

/// `s_i = z_i . v`.
pub fn project(z: &Matrix, axis: &SeverityAxis) -> Result<Vec<f64>> {
    if z.cols() != axis.direction.len() {
        return Err(Error::DimensionMismatch { what: "projection".into(), expected: axis.direction.len(), got: z.cols() });
    }
    Ok(z.iter_rows().map(|r| dot(r, &axis.direction)).collect())
}

/// Per-class values keyed by label name.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    #[serde(rename = "Supported")]
    pub supported: f64,
    #[serde(rename = "Trunk")]
    pub trunk: f64,
    #[serde(rename = "Head")]
    pub head: f64,
}

impl PerClass {
    pub fn get(&self, l: PhysicsLabel) -> f64 {
        match l {
            PhysicsLabel::Supported => self.supported,
            PhysicsLabel::Trunk => self.trunk,
            PhysicsLabel::Head => self.head,
        }
    }

    pub fn set(&mut self, l: PhysicsLabel, v: f64) {
        match l {
            PhysicsLabel::Supported => self.supported = v,
            PhysicsLabel::Trunk => self.trunk = v,
            PhysicsLabel::Head => self.head = v,
        }
    }
}

pub fn category_mean_projection(scores: &[f64], labels: &[PhysicsLabel]) -> Result<PerClass> {
    let mut out = PerClass::default();
    for c in PhysicsLabel::ALL {
        let v: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| **l == c).map(|(s, _)| *s).collect();
        if v.is_empty() {
            return Err(Error::Undefined(format!("no {} window in split", c.as_str())));
        }
        out.set(c, v.iter().sum::<f64>() / v.len() as f64);
    }
    Ok(out)
}

pub const PCR_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pcr {
    pub ratio: f64,
    /// Within-class distances averaged to (nearly) zero; `ratio` then rests
    /// on the epsilon guard.
    pub degenerate: bool,
}

/// Mean Euclidean distance over cross-class pairs divided by the mean over
/// within-class pairs (pooled across classes with at least two members).
pub fn pcr(z: &Matrix, labels: &[PhysicsLabel]) -> Result<Pcr> {
    if z.rows() != labels.len() {
        return Err(Error::DimensionMismatch { what: "PCR labels".into(), expected: z.rows(), got: labels.len() });
    }
    let (mut inter, mut n_inter) = (0.0, 0u64);
    let (mut intra, mut n_intra) = (0.0, 0u64);
    for i in 0..z.rows() {
        for j in i + 1..z.rows() {
            let d = euclidean(z.row(i), z.row(j));
            if labels[i] == labels[j] {
                intra += d;
                n_intra += 1;
            } else {
                inter += d;
                n_inter += 1;
            }
        }
    }
    if n_inter == 0 {
        return Err(Error::Undefined("PCR needs at least two classes".into()));
    }
    if n_intra == 0 {
        return Err(Error::Undefined("PCR needs a class with at least two members".into()));
    }
    let intra_mean = intra / n_intra as f64;
    Ok(Pcr {
        ratio: (inter / n_inter as f64) / intra_mean.max(PCR_EPSILON),
        degenerate: intra_mean <= PCR_EPSILON,
    })
}
