//! Per-anchor contrastive relation sets and the physics-stratified batch
//! sampler.
//!
//! A *pool* is the current batch followed by any memory-bank entries. Only
//! batch rows are anchors; bank rows take part as candidates exactly like
//! batch rows do. All sets hold pool positions in ascending order.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{PhysicsLabel, WindowRecord};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Metadata of one pool row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolItem {
    /// Identity of the underlying window. A bank snapshot of the anchor's own
    /// window carries the same key and is excluded like the anchor itself.
    pub key: usize,
    pub traj: usize,
    pub label: PhysicsLabel,
}

/// How the physics-positive set matches classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicsGrouping {
    /// Head attracts Head, Trunk attracts Trunk.
    #[default]
    Exact,
    /// Head and Trunk are one contact class.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationOptions {
    /// Remove cross-trajectory contact windows from a contact anchor's
    /// denominator. Disabled for the vanilla control.
    pub masking: bool,
    pub grouping: PhysicsGrouping,
}

impl Default for RelationOptions {
    fn default() -> Self {
        RelationOptions { masking: true, grouping: PhysicsGrouping::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorRelations {
    pub anchor: usize,
    pub traj_positives: Vec<usize>,
    pub candidates: Vec<usize>,
    pub mask: Vec<usize>,
    pub phys_positives: Vec<usize>,
    pub cross_traj_candidates: Vec<usize>,
}

impl AnchorRelations {
    pub fn skip_motion(&self) -> bool {
        self.traj_positives.is_empty()
    }

    pub fn skip_physics(&self) -> bool {
        self.phys_positives.is_empty()
    }

    /// Motion-loss denominator: candidates minus mask.
    pub fn denominator(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.candidates.len() - self.mask.len());
        let mut m = self.mask.iter().peekable();
        for &c in &self.candidates {
            if m.peek() == Some(&&c) {
                m.next();
            } else {
                out.push(c);
            }
        }
        out
    }
}

/// Builds relations for the first `num_anchors` pool rows.
pub fn build_relations(pool: &[PoolItem], num_anchors: usize, opts: RelationOptions) -> Vec<AnchorRelations> {
    assert!(num_anchors <= pool.len());
    (0..num_anchors)
        .map(|a| {
            let anchor = pool[a];
            let contact = anchor.label.is_contact();
            let mut rel = AnchorRelations {
                anchor: a,
                traj_positives: Vec::new(),
                candidates: Vec::new(),
                mask: Vec::new(),
                phys_positives: Vec::new(),
                cross_traj_candidates: Vec::new(),
            };
            for (k, item) in pool.iter().enumerate() {
                if k == a || item.key == anchor.key {
                    continue;
                }
                rel.candidates.push(k);
                if item.traj == anchor.traj {
                    rel.traj_positives.push(k);
                    continue;
                }
                rel.cross_traj_candidates.push(k);
                if opts.masking && contact && item.label.is_contact() {
                    rel.mask.push(k);
                }
                let same_class = match opts.grouping {
                    PhysicsGrouping::Exact => item.label == anchor.label,
                    PhysicsGrouping::Binary => item.label.is_contact(),
                };
                if contact && same_class {
                    rel.phys_positives.push(k);
                }
            }
            rel
        })
        .collect()
}

/// Pool of a batch of labeled windows (no bank). Trajectories are numbered
/// in order of first appearance; keys are batch positions.
pub fn pool_from_windows(batch: &[&WindowRecord]) -> Result<Vec<PoolItem>> {
    let mut trajs: HashMap<&str, usize> = HashMap::new();
    batch
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let label = w.phys_label.ok_or_else(|| Error::Unlabeled(w.window_id.clone()))?;
            let n = trajs.len();
            let traj = *trajs.entry(w.traj_id.as_str()).or_insert(n);
            Ok(PoolItem { key: i, traj, label })
        })
        .collect()
}

/// Minimum number of Head and Trunk windows per batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quota {
    pub head: usize,
    pub trunk: usize,
}

impl Quota {
    fn of(&self, l: PhysicsLabel) -> usize {
        match l {
            PhysicsLabel::Head => self.head,
            PhysicsLabel::Trunk => self.trunk,
            PhysicsLabel::Supported => 0,
        }
    }
}

/// Plain seeded partition of `0..n` into consecutive batches of `batch_size`
/// (the last one may be short).
pub fn shuffled_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Epoch partition of `0..labels.len()` in which each batch holds at least
/// `quota` Head and Trunk windows while the epoch still has them. Every index
/// appears exactly once. With a zero quota this is [`shuffled_batches`].
pub fn stratified_batches(
    labels: &[PhysicsLabel],
    batch_size: usize,
    quota: Quota,
    rng: &mut Rng,
) -> Result<Vec<Vec<usize>>> {
    if quota.head + quota.trunk > batch_size {
        return Err(Error::Config(format!(
            "stratification quota {} + {} exceeds batch size {batch_size}",
            quota.head, quota.trunk
        )));
    }
    if quota.head == 0 && quota.trunk == 0 {
        return shuffled_batches(labels.len(), batch_size, rng);
    }
    let n = labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let classes = [PhysicsLabel::Head, PhysicsLabel::Trunk];
    // Per-class queues in global shuffled order.
    let mut queues: Vec<std::collections::VecDeque<usize>> = classes
        .iter()
        .map(|&c| order.iter().copied().filter(|&i| labels[i] == c).collect())
        .collect();
    let mut remaining: Vec<usize> = queues.iter().map(|q| q.len()).collect();
    let mut used = vec![false; n];
    let mut cursor = 0;
    let num_batches = n.div_ceil(batch_size);
    let mut batches = Vec::with_capacity(num_batches);

    for b in 0..num_batches {
        let size = if b + 1 == num_batches { n - b * batch_size } else { batch_size };
        let later = num_batches - b - 1;
        let mut batch = Vec::with_capacity(size);

        for (ci, &c) in classes.iter().enumerate() {
            let want = quota.of(c).min(size - batch.len());
            while batch.len() < size && batch.iter().filter(|&&i| labels[i] == c).count() < want {
                let Some(i) = queues[ci].pop_front() else { break };
                if used[i] {
                    continue;
                }
                used[i] = true;
                remaining[ci] -= 1;
                batch.push(i);
            }
        }

        // Fill from the global order, holding back quota windows that later
        // batches still need.
        let mut scan = cursor;
        let mut deferred = Vec::new();
        while batch.len() < size && scan < n {
            let i = order[scan];
            scan += 1;
            if used[i] {
                continue;
            }
            if let Some(ci) = classes.iter().position(|&c| c == labels[i]) {
                if remaining[ci] <= quota.of(classes[ci]) * later {
                    deferred.push(i);
                    continue;
                }
                remaining[ci] -= 1;
            }
            used[i] = true;
            batch.push(i);
        }
        for i in deferred {
            if batch.len() == size {
                break;
            }
            let ci = classes.iter().position(|&c| c == labels[i]).expect("deferred only quota classes");
            remaining[ci] -= 1;
            used[i] = true;
            batch.push(i);
        }
        while cursor < n && used[order[cursor]] {
            cursor += 1;
        }
        batches.push(batch);
    }
    debug_assert!(used.iter().all(|&u| u));
    Ok(batches)
}
