//! Shared record types and the line-delimited JSON dataset format.
//!
//! A dataset on disk is a manifest (`manifest.json`) naming three record
//! files plus the trajectory split assignment:
//!
//! ```text
//! manifest.json      {"trajectories": "...", "windows": "...", "contacts": "...",
//!                     "splits": {"train": [traj ids], "val": [...], "test": [...]}}
//! trajectories.jsonl {"traj_id", "fall_flag", "num_frames", "split"}
//! windows.jsonl      {"window_id", "traj_id", "t0", "t1", "features", "fall_flag", "phys_label"}
//! contacts.jsonl     {"traj_id", "region", "t_s", "t_e", "impulse", "source"}
//! ```
//!
//! All intervals are half-open frame ranges. Record file paths in the manifest
//! are resolved relative to the manifest's directory.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// Coarse contact category of a window.
///
/// The derived ordering is the dominance order `Supported < Trunk < Head`;
/// [`PhysicsLabel::ordinal`] exposes the same order as `{0, 1, 2}` for the
/// evaluation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhysicsLabel {
    Supported,
    Trunk,
    Head,
}

impl PhysicsLabel {
    pub const ALL: [PhysicsLabel; 3] = [PhysicsLabel::Supported, PhysicsLabel::Trunk, PhysicsLabel::Head];

    pub fn ordinal(self) -> u8 {
        match self {
            PhysicsLabel::Supported => 0,
            PhysicsLabel::Trunk => 1,
            PhysicsLabel::Head => 2,
        }
    }

    /// Binary contact indicator: Head or Trunk.
    pub fn is_contact(self) -> bool {
        !matches!(self, PhysicsLabel::Supported)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhysicsLabel::Supported => "Supported",
            PhysicsLabel::Trunk => "Trunk",
            PhysicsLabel::Head => "Head",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BodyRegion {
    Head,
    Torso,
    Hip,
    Arm,
    Hand,
    Leg,
    Foot,
}

impl BodyRegion {
    pub const ALL: [BodyRegion; 7] = [
        BodyRegion::Head,
        BodyRegion::Torso,
        BodyRegion::Hip,
        BodyRegion::Arm,
        BodyRegion::Hand,
        BodyRegion::Leg,
        BodyRegion::Foot,
    ];

    pub fn category(self) -> PhysicsLabel {
        match self {
            BodyRegion::Head => PhysicsLabel::Head,
            BodyRegion::Torso | BodyRegion::Hip => PhysicsLabel::Trunk,
            BodyRegion::Arm | BodyRegion::Hand | BodyRegion::Leg | BodyRegion::Foot => {
                PhysicsLabel::Supported
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactSource {
    /// Observed inside the recorded frames.
    InWindow,
    /// Produced by a short-horizon rollout started at a window boundary.
    Continuation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub traj_id: String,
    pub fall_flag: bool,
    pub num_frames: u32,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowRecord {
    pub window_id: String,
    pub traj_id: String,
    pub t0: u32,
    pub t1: u32,
    pub features: Vec<f64>,
    pub fall_flag: bool,
    #[serde(default)]
    pub phys_label: Option<PhysicsLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactDescriptor {
    pub traj_id: String,
    pub region: BodyRegion,
    pub t_s: u32,
    pub t_e: u32,
    pub impulse: f64,
    pub source: ContactSource,
}

impl ContactDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.t_s >= self.t_e {
            return Err(Error::Invariant(format!(
                "descriptor of {} has empty interval [{}, {})",
                self.traj_id, self.t_s, self.t_e
            )));
        }
        if !(self.impulse.is_finite() && self.impulse >= 0.0) {
            return Err(Error::Invariant(format!(
                "descriptor of {} has invalid impulse {}",
                self.traj_id, self.impulse
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub trajectories: String,
    pub windows: String,
    pub contacts: String,
    pub splits: SplitAssignment,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const WINDOWS_FILE: &str = "windows.jsonl";
pub const CONTACTS_FILE: &str = "contacts.jsonl";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<TrajectoryRecord>,
    pub windows: Vec<WindowRecord>,
    pub contacts: Vec<ContactDescriptor>,
}

impl Dataset {
    /// Checks every record invariant and the cross references between files.
    pub fn validate(&self) -> Result<()> {
        let mut trajs: HashMap<&str, &TrajectoryRecord> = HashMap::new();
        for t in &self.trajectories {
            if t.num_frames == 0 {
                return Err(Error::Invariant(format!("trajectory {} has zero frames", t.traj_id)));
            }
            if trajs.insert(t.traj_id.as_str(), t).is_some() {
                return Err(Error::Invariant(format!("duplicate traj_id {}", t.traj_id)));
            }
        }

        let mut dim = None;
        let mut window_ids = BTreeSet::new();
        for w in &self.windows {
            let parent = trajs.get(w.traj_id.as_str()).ok_or_else(|| Error::DanglingTrajectory {
                window_id: w.window_id.clone(),
                traj_id: w.traj_id.clone(),
            })?;
            if !window_ids.insert(w.window_id.as_str()) {
                return Err(Error::Invariant(format!("duplicate window_id {}", w.window_id)));
            }
            if !(w.t0 < w.t1 && w.t1 <= parent.num_frames) {
                return Err(Error::Invariant(format!(
                    "window {} span [{}, {}) outside trajectory of {} frames",
                    w.window_id, w.t0, w.t1, parent.num_frames
                )));
            }
            if w.fall_flag != parent.fall_flag {
                return Err(Error::Invariant(format!(
                    "window {} fall_flag disagrees with trajectory {}",
                    w.window_id, w.traj_id
                )));
            }
            if w.features.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invariant(format!("window {} has non-finite features", w.window_id)));
            }
            match dim {
                None => dim = Some(w.features.len()),
                Some(d) if d != w.features.len() => {
                    return Err(Error::DimensionMismatch {
                        what: format!("window {}", w.window_id),
                        expected: d,
                        got: w.features.len(),
                    })
                }
                Some(_) => {}
            }
        }

        for c in &self.contacts {
            c.validate()?;
            if !trajs.contains_key(c.traj_id.as_str()) {
                return Err(Error::Invariant(format!(
                    "contact descriptor references unknown trajectory {}",
                    c.traj_id
                )));
            }
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.windows.first().map(|w| w.features.len())
    }

    pub fn split_assignment(&self) -> SplitAssignment {
        let mut s = SplitAssignment::default();
        for t in &self.trajectories {
            let list = match t.split {
                Split::Train => &mut s.train,
                Split::Val => &mut s.val,
                Split::Test => &mut s.test,
            };
            list.push(t.traj_id.clone());
        }
        s
    }

    /// Split of each trajectory, keyed by id.
    pub fn split_of(&self) -> HashMap<&str, Split> {
        self.trajectories
            .iter()
            .map(|t| (t.traj_id.as_str(), t.split))
            .collect()
    }

    /// Indices into `windows` of the windows whose trajectory is in `split`,
    /// in file order.
    pub fn window_indices(&self, split: Split) -> Vec<usize> {
        let splits = self.split_of();
        self.windows
            .iter()
            .enumerate()
            .filter(|(_, w)| splits.get(w.traj_id.as_str()) == Some(&split))
            .map(|(i, _)| i)
            .collect()
    }

    /// Window labels in file order; errors if any window is unlabeled.
    pub fn labels(&self) -> Result<Vec<PhysicsLabel>> {
        self.windows
            .iter()
            .map(|w| w.phys_label.ok_or_else(|| Error::Unlabeled(w.window_id.clone())))
            .collect()
    }
}

fn check_manifest_splits(manifest: &DatasetManifest, ds: &Dataset) -> Result<()> {
    let mut seen: HashMap<&str, Split> = HashMap::new();
    for (split, ids) in [
        (Split::Train, &manifest.splits.train),
        (Split::Val, &manifest.splits.val),
        (Split::Test, &manifest.splits.test),
    ] {
        for id in ids {
            if let Some(prev) = seen.insert(id.as_str(), split) {
                return Err(Error::Invariant(format!(
                    "trajectory {id} assigned to both {} and {}",
                    prev.as_str(),
                    split.as_str()
                )));
            }
        }
    }
    for t in &ds.trajectories {
        match seen.get(t.traj_id.as_str()) {
            Some(&s) if s == t.split => {}
            Some(&s) => {
                return Err(Error::Invariant(format!(
                    "trajectory {} is {} in its record but {} in the manifest",
                    t.traj_id,
                    t.split.as_str(),
                    s.as_str()
                )))
            }
            None => {
                return Err(Error::Invariant(format!(
                    "trajectory {} missing from manifest splits",
                    t.traj_id
                )))
            }
        }
    }
    if seen.len() != ds.trajectories.len() {
        return Err(Error::Invariant(
            "manifest splits name trajectories absent from the trajectory file".into(),
        ));
    }
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            file: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        file: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn resolve(manifest_path: &Path, file: &str) -> PathBuf {
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    base.join(file)
}

/// Loads and cross-validates the dataset named by a manifest file.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = read_manifest(manifest_path)?;
    let ds = Dataset {
        trajectories: read_jsonl(&resolve(manifest_path, &manifest.trajectories))?,
        windows: read_jsonl(&resolve(manifest_path, &manifest.windows))?,
        contacts: read_jsonl(&resolve(manifest_path, &manifest.contacts))?,
    };
    ds.validate()?;
    check_manifest_splits(&manifest, &ds)?;
    Ok(ds)
}

/// Writes `ds` into `dir` using the default file names and returns the path
/// of the manifest. Invalid datasets are refused before anything is written.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    write_dataset_as(ds, dir, WINDOWS_FILE, MANIFEST_FILE)
}

/// Like [`write_dataset`] but with a custom windows file and manifest name,
/// used to publish a labeled copy next to the raw dataset.
pub fn write_dataset_as(ds: &Dataset, dir: &Path, windows_file: &str, manifest_file: &str) -> Result<PathBuf> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(&dir.join(TRAJECTORIES_FILE), &ds.trajectories)?;
    write_jsonl(&dir.join(windows_file), &ds.windows)?;
    write_jsonl(&dir.join(CONTACTS_FILE), &ds.contacts)?;
    let manifest = DatasetManifest {
        trajectories: TRAJECTORIES_FILE.into(),
        windows: windows_file.into(),
        contacts: CONTACTS_FILE.into(),
        splits: ds.split_assignment(),
    };
    let path = dir.join(manifest_file);
    write_manifest(&path, &manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Dataset {
        let trajectories = vec![
            TrajectoryRecord { traj_id: "a".into(), fall_flag: true, num_frames: 64, split: Split::Train },
            TrajectoryRecord { traj_id: "b".into(), fall_flag: false, num_frames: 64, split: Split::Val },
            TrajectoryRecord { traj_id: "c".into(), fall_flag: true, num_frames: 48, split: Split::Test },
        ];
        let mut windows = Vec::new();
        for t in &trajectories {
            for k in 0..2u32 {
                windows.push(WindowRecord {
                    window_id: format!("{}-{k}", t.traj_id),
                    traj_id: t.traj_id.clone(),
                    t0: 16 * k,
                    t1: 16 * k + 32,
                    features: vec![0.1 * k as f64, -1.0 / 3.0, 1e-300],
                    fall_flag: t.fall_flag,
                    phys_label: None,
                });
            }
        }
        let contacts = vec![ContactDescriptor {
            traj_id: "a".into(),
            region: BodyRegion::Hip,
            t_s: 20,
            t_e: 30,
            impulse: 2.5,
            source: ContactSource::Continuation,
        }];
        Dataset { trajectories, windows, contacts }
    }

    #[test]
    fn three_trajectory_fixture_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ds = fixture();
        let manifest = write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(&manifest).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.trajectories.len(), 3);
    }

    #[test]
    fn empty_dataset_writes_valid_files() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_dataset(&Dataset::default(), dir.path()).unwrap();
        assert_eq!(load_dataset(&manifest).unwrap(), Dataset::default());
    }

    #[test]
    fn dangling_trajectory_is_rejected() {
        let mut ds = fixture();
        ds.windows[0].traj_id = "zzz".into();
        assert!(matches!(ds.validate(), Err(Error::DanglingTrajectory { .. })));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut ds = fixture();
        ds.windows[0].features = vec![0.0; 16];
        ds.windows[1].features = vec![0.0; 17];
        assert!(matches!(ds.validate(), Err(Error::DimensionMismatch { expected: 16, got: 17, .. })));
    }

    #[test]
    fn refuses_to_write_empty_descriptor_interval() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = fixture();
        ds.contacts[0].t_s = 30;
        assert!(write_dataset(&ds, dir.path()).is_err());
        assert!(!dir.path().join(MANIFEST_FILE).exists());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_dataset(&fixture(), dir.path()).unwrap();
        let wpath = dir.path().join(WINDOWS_FILE);
        let mut text = fs::read_to_string(&wpath).unwrap();
        text.push_str("{\"window_id\": 5}\n");
        fs::write(&wpath, text).unwrap();
        match load_dataset(&manifest) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_split_conflict_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = fixture();
        let path = write_dataset(&ds, dir.path()).unwrap();
        let mut m = read_manifest(&path).unwrap();
        m.splits.val.push("a".into());
        write_manifest(&path, &m).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Invariant(_))));
    }

    #[test]
    fn window_outside_trajectory_is_rejected() {
        let mut ds = fixture();
        ds.windows[5].t1 = 49;
        assert!(matches!(ds.validate(), Err(Error::Invariant(_))));
    }

    #[test]
    fn region_categories() {
        use BodyRegion::*;
        assert_eq!(Head.category(), PhysicsLabel::Head);
        for r in [Torso, Hip] {
            assert_eq!(r.category(), PhysicsLabel::Trunk);
        }
        for r in [Arm, Hand, Leg, Foot] {
            assert_eq!(r.category(), PhysicsLabel::Supported);
        }
        assert!(PhysicsLabel::Supported < PhysicsLabel::Trunk && PhysicsLabel::Trunk < PhysicsLabel::Head);
    }
}
