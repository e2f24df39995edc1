//! Window-level contact labels from raw contact descriptors.
//!
//! For a window `[t0, t1)` a descriptor counts as evidence when
//!
//! * its source is enabled,
//! * an `in_window` descriptor overlaps the window (`t_s < t1 && t_e > t0`),
//!   a `continuation` descriptor starts within the horizon after the window
//!   (`t1 <= t_s < t1 + H`),
//! * and its impulse reaches the reliability threshold.
//!
//! Surviving descriptors are merged by per-category maximum impulse and the
//! label is chosen by dominance: any Head evidence gives `Head`, otherwise any
//! Trunk evidence gives `Trunk`, otherwise `Supported`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{ContactDescriptor, ContactSource, Dataset, PhysicsLabel, Split, TrajectoryRecord, WindowRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingConfig {
    /// Minimum impulse (N·s) for a descriptor to count; compared inclusively.
    pub min_impulse: f64,
    pub use_window_source: bool,
    pub use_continuation_source: bool,
    /// Frames after the window end in which continuation contacts may start.
    pub continuation_horizon: u32,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig {
            min_impulse: 0.0,
            use_window_source: true,
            use_continuation_source: true,
            continuation_horizon: 30,
        }
    }
}

impl LabelingConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.use_window_source && !self.use_continuation_source {
            return Err(Error::Config("labeling: at least one evidence source must be enabled".into()));
        }
        if !(self.min_impulse.is_finite() && self.min_impulse >= 0.0) {
            return Err(Error::Config(format!("labeling.min_impulse must be >= 0, got {}", self.min_impulse)));
        }
        Ok(())
    }
}

/// Half-open interval overlap.
pub fn overlaps(t0: u32, t1: u32, t_s: u32, t_e: u32) -> bool {
    t_s < t1 && t_e > t0
}

/// Filtered evidence of one window: the maximum surviving impulse per
/// category, `None` where no descriptor survived.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CategoryImpulseSet {
    pub head: Option<f64>,
    pub trunk: Option<f64>,
    pub supported: Option<f64>,
}

impl CategoryImpulseSet {
    pub fn get(&self, cat: PhysicsLabel) -> Option<f64> {
        match cat {
            PhysicsLabel::Head => self.head,
            PhysicsLabel::Trunk => self.trunk,
            PhysicsLabel::Supported => self.supported,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.head.is_none() && self.trunk.is_none() && self.supported.is_none()
    }

    fn merge(&mut self, cat: PhysicsLabel, impulse: f64) {
        let slot = match cat {
            PhysicsLabel::Head => &mut self.head,
            PhysicsLabel::Trunk => &mut self.trunk,
            PhysicsLabel::Supported => &mut self.supported,
        };
        *slot = Some(slot.map_or(impulse, |v| v.max(impulse)));
    }
}

/// Whether `d` counts as evidence for the window `[t0, t1)` under `cfg`.
pub fn admits(t0: u32, t1: u32, d: &ContactDescriptor, cfg: &LabelingConfig) -> bool {
    let in_time = match d.source {
        ContactSource::InWindow => cfg.use_window_source && overlaps(t0, t1, d.t_s, d.t_e),
        ContactSource::Continuation => {
            cfg.use_continuation_source && d.t_s >= t1 && d.t_s < t1.saturating_add(cfg.continuation_horizon)
        }
    };
    in_time && d.impulse >= cfg.min_impulse
}

pub fn collect_evidence(
    window: &WindowRecord,
    descriptors: &[ContactDescriptor],
    cfg: &LabelingConfig,
) -> Result<CategoryImpulseSet> {
    collect_evidence_refs(window, descriptors.iter(), cfg)
}

fn collect_evidence_refs<'a>(
    window: &WindowRecord,
    descriptors: impl IntoIterator<Item = &'a ContactDescriptor>,
    cfg: &LabelingConfig,
) -> Result<CategoryImpulseSet> {
    let mut set = CategoryImpulseSet::default();
    for d in descriptors {
        if d.traj_id != window.traj_id {
            return Err(Error::ForeignDescriptor {
                window_id: window.window_id.clone(),
                window_traj: window.traj_id.clone(),
                descriptor_traj: d.traj_id.clone(),
            });
        }
        if admits(window.t0, window.t1, d, cfg) {
            set.merge(d.region.category(), d.impulse);
        }
    }
    Ok(set)
}

pub fn assign_label(evidence: &CategoryImpulseSet) -> PhysicsLabel {
    if evidence.head.is_some() {
        PhysicsLabel::Head
    } else if evidence.trunk.is_some() {
        PhysicsLabel::Trunk
    } else {
        PhysicsLabel::Supported
    }
}

fn by_trajectory(descriptors: &[ContactDescriptor]) -> HashMap<&str, Vec<&ContactDescriptor>> {
    let mut map: HashMap<&str, Vec<&ContactDescriptor>> = HashMap::new();
    for d in descriptors {
        map.entry(d.traj_id.as_str()).or_default().push(d);
    }
    map
}

/// Returns a copy of `windows` with `phys_label` set on every window.
pub fn label_dataset(
    windows: &[WindowRecord],
    descriptors: &[ContactDescriptor],
    cfg: &LabelingConfig,
) -> Result<Vec<WindowRecord>> {
    cfg.validate()?;
    let index = by_trajectory(descriptors);
    windows
        .iter()
        .map(|w| {
            let own = index.get(w.traj_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            let evidence = collect_evidence_refs(w, own.iter().copied(), cfg)?;
            let mut out = w.clone();
            out.phys_label = Some(assign_label(&evidence));
            Ok(out)
        })
        .collect()
}

/// Coarse trajectory-level labels without temporal alignment: every window of
/// a fall trajectory inherits the most dominant category found among all of
/// that trajectory's descriptors; windows of non-fall trajectories are
/// `Supported`. This is the "no denoising" ablation.
pub fn broadcast_trajectory_labels(
    trajectories: &[TrajectoryRecord],
    windows: &[WindowRecord],
    descriptors: &[ContactDescriptor],
) -> Vec<PhysicsLabel> {
    let mut dominant: HashMap<&str, PhysicsLabel> = HashMap::new();
    for d in descriptors {
        let e = dominant.entry(d.traj_id.as_str()).or_insert(PhysicsLabel::Supported);
        *e = (*e).max(d.region.category());
    }
    let fall: HashMap<&str, bool> = trajectories.iter().map(|t| (t.traj_id.as_str(), t.fall_flag)).collect();
    windows
        .iter()
        .map(|w| {
            if fall.get(w.traj_id.as_str()).copied().unwrap_or(false) {
                dominant.get(w.traj_id.as_str()).copied().unwrap_or(PhysicsLabel::Supported)
            } else {
                PhysicsLabel::Supported
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    #[serde(rename = "Supported")]
    pub supported: usize,
    #[serde(rename = "Trunk")]
    pub trunk: usize,
    #[serde(rename = "Head")]
    pub head: usize,
}

impl ClassCounts {
    pub fn add(&mut self, l: PhysicsLabel) {
        match l {
            PhysicsLabel::Supported => self.supported += 1,
            PhysicsLabel::Trunk => self.trunk += 1,
            PhysicsLabel::Head => self.head += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.supported + self.trunk + self.head
    }

    pub fn fractions(&self) -> [f64; 3] {
        let n = self.total().max(1) as f64;
        [self.supported as f64 / n, self.trunk as f64 / n, self.head as f64 / n]
    }
}

/// Class counts per split of a labeled dataset.
pub fn summarize(ds: &Dataset) -> Result<BTreeMap<Split, ClassCounts>> {
    let splits = ds.split_of();
    let mut out: BTreeMap<Split, ClassCounts> = Split::ALL.iter().map(|&s| (s, ClassCounts::default())).collect();
    for w in &ds.windows {
        let label = w.phys_label.ok_or_else(|| Error::Unlabeled(w.window_id.clone()))?;
        let split = splits
            .get(w.traj_id.as_str())
            .ok_or_else(|| Error::DanglingTrajectory { window_id: w.window_id.clone(), traj_id: w.traj_id.clone() })?;
        out.get_mut(split).expect("all splits present").add(label);
    }
    Ok(out)
}
