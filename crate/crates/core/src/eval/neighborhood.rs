//! Cross-video neighborhood consistency on a class-balanced database.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::PhysicsLabel;
use crate::error::{Error, Result};
use crate::eval::geometry::PerClass;
use crate::matrix::{dot, norm, Matrix};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodResult {
    pub diagonal: PerClass,
    /// Queries with no valid neighbor after same-video exclusion, per class.
    pub skipped_queries: ClassCount,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    #[serde(rename = "Supported")]
    pub supported: usize,
    #[serde(rename = "Trunk")]
    pub trunk: usize,
    #[serde(rename = "Head")]
    pub head: usize,
}

impl ClassCount {
    pub fn get(&self, l: PhysicsLabel) -> usize {
        match l {
            PhysicsLabel::Supported => self.supported,
            PhysicsLabel::Trunk => self.trunk,
            PhysicsLabel::Head => self.head,
        }
    }

    fn bump(&mut self, l: PhysicsLabel) {
        match l {
            PhysicsLabel::Supported => self.supported += 1,
            PhysicsLabel::Trunk => self.trunk += 1,
            PhysicsLabel::Head => self.head += 1,
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}

/// Every window is a query. The database holds each class subsampled to the
/// minority size. Per query, same-video entries are dropped, the rest ranked
/// by (descending cosine, ascending index) and the top `k` kept. A class's
/// diagonal rate is the share of its queries' retrieved neighbors that carry
/// the same class.
pub fn neighborhood_consistency(
    z: &Matrix,
    labels: &[PhysicsLabel],
    video_ids: &[&str],
    k: usize,
    seed: u64,
) -> Result<NeighborhoodResult> {
    if labels.len() != z.rows() || video_ids.len() != z.rows() {
        return Err(Error::DimensionMismatch { what: "neighborhood metadata".into(), expected: z.rows(), got: labels.len().min(video_ids.len()) });
    }
    if k == 0 {
        return Err(Error::Config("neighborhood k must be at least 1".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); 3];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.ordinal() as usize].push(i);
    }
    if let Some(c) = PhysicsLabel::ALL.iter().find(|c| by_class[c.ordinal() as usize].is_empty()) {
        return Err(Error::Undefined(format!("neighborhood consistency: no {} window", c.as_str())));
    }
    let minority = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut rng = substream(seed, "neighborhood", 0);
    let mut database = Vec::with_capacity(3 * minority);
    for members in &by_class {
        let mut m = members.clone();
        m.shuffle(&mut rng);
        m.truncate(minority);
        database.extend(m);
    }
    database.sort_unstable();

    let mut hits = [0usize; 3];
    let mut retrieved = [0usize; 3];
    let mut skipped = ClassCount::default();
    for q in 0..z.rows() {
        let mut cand: Vec<(f64, usize)> = database
            .iter()
            .filter(|&&j| video_ids[j] != video_ids[q])
            .map(|&j| (cosine(z.row(q), z.row(j)), j))
            .collect();
        if cand.is_empty() {
            skipped.bump(labels[q]);
            continue;
        }
        cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let c = labels[q].ordinal() as usize;
        for &(_, j) in cand.iter().take(k) {
            retrieved[c] += 1;
            if labels[j] == labels[q] {
                hits[c] += 1;
            }
        }
    }
    let mut diagonal = PerClass::default();
    for c in PhysicsLabel::ALL {
        let i = c.ordinal() as usize;
        let rate = if retrieved[i] == 0 { 0.0 } else { hits[i] as f64 / retrieved[i] as f64 };
        diagonal.set(c, rate);
    }
    Ok(NeighborhoodResult { diagonal, skipped_queries: skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use PhysicsLabel::*;

    #[test]
    fn pure_clusters() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut vids = Vec::new();
        for (c, dir) in [(Supported, [1.0, 0.0, 0.0]), (Trunk, [0.0, 1.0, 0.0]), (Head, [0.0, 0.0, 1.0])] {
            for i in 0..6 {
                let mut r = dir;
                r[(c.ordinal() as usize + 1) % 3] = 0.01 * i as f64;
                rows.push(r);
                labels.push(c);
                vids.push(format!("v{i}"));
            }
        }
        let z = Matrix::from_rows(3, rows);
        let v: Vec<&str> = vids.iter().map(String::as_str).collect();
        let r = neighborhood_consistency(&z, &labels, &v, 3, 1).unwrap();
        assert_eq!(r.diagonal, PerClass { supported: 1.0, trunk: 1.0, head: 1.0 });
    }

    #[test]
    fn own_video_only_is_skipped() {
        let z = Matrix::from_rows(2, [[1.0, 0.0], [0.0, 1.0], [0.7, 0.7]]);
        let r = neighborhood_consistency(&z, &[Supported, Trunk, Head], &["a", "a", "a"], 10, 0).unwrap();
        assert_eq!(r.skipped_queries.get(Head), 1);
        assert_eq!(r.skipped_queries.supported + r.skipped_queries.trunk + r.skipped_queries.head, 3);
    }

    #[test]
    fn missing_class() {
        let z = Matrix::from_rows(1, [[1.0], [1.0]]);
        assert!(neighborhood_consistency(&z, &[Supported, Trunk], &["a", "b"], 1, 0).is_err());
    }
}
