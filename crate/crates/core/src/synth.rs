//! Seeded synthetic trajectories with planted contact labels.
//!
//! A fall trajectory walks, hits the ground with the trunk at `t_imp` and, for
//! a subset, strikes the head shortly after. Impacts are emitted both as
//! in-window descriptors and as continuation descriptors starting at the
//! impact frame, so windows that end shortly before an impact see it only
//! through the continuation source. Non-fall trajectories carry only
//! supported contacts (feet, hands).
//!
//! Window features mix a per-trajectory motion signature, per-window noise,
//! a component tied to the window's contact evidence and, for a share of
//! supported windows, a confuser that mimics the primary trunk cue.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{
    read_jsonl, write_jsonl, BodyRegion, ContactDescriptor, ContactSource, Dataset, PhysicsLabel, Split, TrajectoryRecord,
    WindowRecord,
};
use crate::error::{Error, Result};
use crate::rng::{substream, Rng};

pub const PLANTED_FILE: &str = "planted.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMix {
    #[serde(rename = "Supported")]
    pub supported: f64,
    #[serde(rename = "Trunk")]
    pub trunk: f64,
    #[serde(rename = "Head")]
    pub head: f64,
}

impl Default for ClassMix {
    fn default() -> Self {
        ClassMix { supported: 0.56, trunk: 0.34, head: 0.10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_trajectories: usize,
    pub frames_per_trajectory: u32,
    pub window_len: u32,
    pub window_stride: u32,
    pub feature_dim: usize,
    pub class_mix: ClassMix,
    pub signal_strength: f64,
    pub confuser_strength: f64,
    /// Must match the labeling horizon for planted labels to be recoverable.
    pub continuation_horizon: u32,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_trajectories: 200,
            frames_per_trajectory: 192,
            window_len: 32,
            window_stride: 16,
            feature_dim: 24,
            class_mix: ClassMix::default(),
            signal_strength: 0.75,
            confuser_strength: 0.5,
            continuation_horizon: 30,
            val_fraction: 0.1,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Number of fixed feature directions the generator plants.
const NUM_DIRECTIONS: usize = 5;
const SIGNAL_AMPLITUDE: f64 = 3.0;
const NOISE_STD: f64 = 0.5;
const FALL_SIGNATURE: f64 = 1.5;
const CONFUSER_RATE: f64 = 0.6;
const MIN_IMPULSE: f64 = 0.5;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synth: {m}")));
        let m = &self.class_mix;
        for (name, v) in [("Supported", m.supported), ("Trunk", m.trunk), ("Head", m.head)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("class_mix.{name} = {v} outside [0, 1]"));
            }
        }
        if (m.supported + m.trunk + m.head - 1.0).abs() > 1e-9 {
            return bad("class_mix must sum to 1".into());
        }
        if self.num_trajectories == 0 {
            return bad("num_trajectories must be positive".into());
        }
        if self.window_len == 0 || self.window_stride == 0 {
            return bad("window_len and window_stride must be positive".into());
        }
        if self.window_len > self.frames_per_trajectory {
            return bad("window_len exceeds frames_per_trajectory".into());
        }
        if self.frames_per_trajectory < 16 {
            return bad("frames_per_trajectory must be at least 16".into());
        }
        if self.feature_dim < NUM_DIRECTIONS {
            return bad(format!("feature_dim must be at least {NUM_DIRECTIONS}"));
        }
        for (name, v) in [("signal_strength", self.signal_strength), ("confuser_strength", self.confuser_strength)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if self.val_fraction < 0.0 || self.test_fraction < 0.0 || self.val_fraction + self.test_fraction >= 1.0 {
            return bad("val_fraction and test_fraction must be >= 0 and sum below 1".into());
        }
        Ok(())
    }

    fn window_starts(&self) -> Vec<u32> {
        (0..)
            .map(|i| i * self.window_stride)
            .take_while(|t0| t0 + self.window_len <= self.frames_per_trajectory)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedWindow {
    pub window_id: String,
    pub traj_id: String,
    pub label: PhysicsLabel,
    pub fall_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlantedTruth {
    pub windows: Vec<PlantedWindow>,
}

impl PlantedTruth {
    pub fn labels(&self) -> Vec<PhysicsLabel> {
        self.windows.iter().map(|w| w.label).collect()
    }
}

pub fn write_planted(path: &Path, truth: &PlantedTruth) -> Result<()> {
    write_jsonl(path, &truth.windows)
}

pub fn read_planted(path: &Path) -> Result<PlantedTruth> {
    Ok(PlantedTruth { windows: read_jsonl(path)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub planted: PlantedTruth,
}

#[derive(Debug, Clone, Copy)]
struct FallPlan {
    t_imp: u32,
    trunk_end: u32,
    head: Option<(u32, u32)>,
}

fn uniform_u32(rng: &mut Rng, lo: u32, hi_inclusive: u32) -> u32 {
    if hi_inclusive <= lo {
        lo
    } else {
        rng.random_range(lo..=hi_inclusive)
    }
}

fn plan_fall(cfg: &SynthConfig, head: bool, rng: &mut Rng) -> FallPlan {
    let t = cfg.frames_per_trajectory;
    let t_imp = uniform_u32(rng, t * 5 / 12, t * 3 / 4);
    let trunk_end = (t_imp + uniform_u32(rng, t / 8, t * 7 / 24)).min(t);
    let head = head.then(|| {
        let start = (t_imp + uniform_u32(rng, 0, t / 8)).min(t - 1);
        let end = (start + uniform_u32(rng, 4.min(t / 16).max(1), 12)).min(t);
        (start, end.max(start + 1))
    });
    FallPlan { t_imp, trunk_end, head }
}

#[derive(Debug, Clone, Copy, Default)]
struct Evidence {
    trunk_in: bool,
    trunk_cont: bool,
    head_in: bool,
    head_cont: bool,
}

impl Evidence {
    fn of(plan: Option<&FallPlan>, t0: u32, t1: u32, horizon: u32) -> Self {
        let Some(p) = plan else { return Evidence::default() };
        let inside = |s: u32, e: u32| s < t1 && e > t0;
        let ahead = |s: u32| s >= t1 && s - t1 < horizon;
        Evidence {
            trunk_in: inside(p.t_imp, p.trunk_end),
            trunk_cont: ahead(p.t_imp),
            head_in: p.head.is_some_and(|(s, e)| inside(s, e)),
            head_cont: p.head.is_some_and(|(s, _)| ahead(s)),
        }
    }

    fn label(&self) -> PhysicsLabel {
        if self.head_in || self.head_cont {
            PhysicsLabel::Head
        } else if self.trunk_in || self.trunk_cont {
            PhysicsLabel::Trunk
        } else {
            PhysicsLabel::Supported
        }
    }

    fn continuation_only(&self) -> bool {
        let l = self.label();
        match l {
            PhysicsLabel::Head => !self.head_in,
            PhysicsLabel::Trunk => !self.trunk_in,
            PhysicsLabel::Supported => false,
        }
    }
}

/// Expected contact windows per non-head fall, contact windows per head fall,
/// and Head windows per head fall, by Monte Carlo over the fall plan.
fn window_yields(cfg: &SynthConfig) -> (f64, f64, f64) {
    const DRAWS: usize = 2000;
    let mut rng = substream(cfg.seed, "synth-calibrate", 0);
    let starts = cfg.window_starts();
    let count = |plan: &FallPlan, pred: &dyn Fn(PhysicsLabel) -> bool| {
        starts
            .iter()
            .filter(|&&t0| pred(Evidence::of(Some(plan), t0, t0 + cfg.window_len, cfg.continuation_horizon).label()))
            .count() as f64
    };
    let (mut c0, mut c1, mut h1) = (0.0, 0.0, 0.0);
    for _ in 0..DRAWS {
        let p = plan_fall(cfg, false, &mut rng);
        c0 += count(&p, &|l| l.is_contact());
        let q = plan_fall(cfg, true, &mut rng);
        c1 += count(&q, &|l| l.is_contact());
        h1 += count(&q, &|l| l == PhysicsLabel::Head);
    }
    let n = DRAWS as f64;
    (c0 / n, c1 / n, h1 / n)
}

/// Fall count and head-fall count that hit the class mix in expectation.
fn calibrate_counts(cfg: &SynthConfig) -> Result<(usize, usize)> {
    let w = cfg.window_starts().len() as f64;
    let mix = cfg.class_mix;
    let (c0, c1, h1) = window_yields(cfg);
    let infeasible = |why: &str| {
        Err(Error::Config(format!(
            "synth: infeasible class_mix {}/{}/{}: {why}",
            mix.supported, mix.trunk, mix.head
        )))
    };
    if mix.head > 0.0 && h1 == 0.0 {
        return infeasible("window geometry admits no Head windows");
    }
    if mix.trunk + mix.head > 0.0 && c0 == 0.0 {
        return infeasible("window geometry admits no contact windows");
    }
    // f * h * h1 = head * w and f * ((1 - h) c0 + h c1) = (trunk + head) * w
    let fall_head = if mix.head > 0.0 { mix.head * w / h1 } else { 0.0 };
    let fall = if c0 > 0.0 { ((mix.trunk + mix.head) * w - fall_head * (c1 - c0)) / c0 } else { 0.0 };
    if !(-1e-9..=1.0 + 1e-9).contains(&fall) || fall_head > fall + 1e-9 {
        return infeasible("needs more contact windows than the trajectories can hold");
    }
    let n = cfg.num_trajectories as f64;
    let n_fall = (fall * n).round() as usize;
    let n_head = ((fall_head * n).round() as usize).min(n_fall);
    if mix.head > 0.0 && n_head == 0 {
        return infeasible("Head share rounds to zero head-contact trajectories");
    }
    Ok((n_fall.min(cfg.num_trajectories), n_head))
}

fn impulse(rng: &mut Rng, scale: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    MIN_IMPULSE + scale * e
}

fn descriptor(traj: &str, region: BodyRegion, t_s: u32, t_e: u32, imp: f64, source: ContactSource) -> ContactDescriptor {
    ContactDescriptor { traj_id: traj.to_string(), region, t_s, t_e, impulse: imp, source }
}

fn supported_contacts(traj: &str, until: u32, rng: &mut Rng, out: &mut Vec<ContactDescriptor>) {
    let mut t = uniform_u32(rng, 0, 8);
    while t + 1 < until {
        let end = (t + uniform_u32(rng, 4, 8)).min(until);
        let region = if rng.random_bool(0.85) { BodyRegion::Foot } else { BodyRegion::Hand };
        let imp = impulse(rng, 1.0);
        out.push(descriptor(traj, region, t, end.max(t + 1), imp, ContactSource::InWindow));
        t += uniform_u32(rng, 12, 20);
    }
}

fn fall_contacts(traj: &str, plan: &FallPlan, cfg: &SynthConfig, rng: &mut Rng, out: &mut Vec<ContactDescriptor>) {
    let t = cfg.frames_per_trajectory;
    supported_contacts(traj, plan.t_imp, rng, out);
    let brace_s = plan.t_imp.saturating_sub(4);
    let brace_region = if rng.random_bool(0.5) { BodyRegion::Hand } else { BodyRegion::Arm };
    let brace_imp = impulse(rng, 2.0);
    out.push(descriptor(traj, brace_region, brace_s, (plan.t_imp + 4).min(t).max(brace_s + 1), brace_imp, ContactSource::InWindow));
    let trunk_region = if rng.random_bool(0.5) { BodyRegion::Torso } else { BodyRegion::Hip };
    let trunk_imp = impulse(rng, 6.0);
    out.push(descriptor(traj, trunk_region, plan.t_imp, plan.trunk_end, trunk_imp, ContactSource::InWindow));
    let rollout_imp = impulse(rng, 6.0);
    out.push(descriptor(traj, trunk_region, plan.t_imp, plan.t_imp + 8, rollout_imp, ContactSource::Continuation));
    if let Some((s, e)) = plan.head {
        let head_imp = impulse(rng, 4.0);
        out.push(descriptor(traj, BodyRegion::Head, s, e, head_imp, ContactSource::InWindow));
        let rollout_imp = impulse(rng, 4.0);
        out.push(descriptor(traj, BodyRegion::Head, s, e, rollout_imp, ContactSource::Continuation));
    }
}

/// Orthonormal planted directions: trunk, head, continuation-only, post-impact
/// motion, fall signature.
fn directions(cfg: &SynthConfig) -> Vec<Vec<f64>> {
    let mut rng = substream(cfg.seed, "synth-directions", 0);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(NUM_DIRECTIONS);
    while basis.len() < NUM_DIRECTIONS {
        let mut v: Vec<f64> = (0..cfg.feature_dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

fn assign_splits(cfg: &SynthConfig, groups: [Vec<usize>; 3], rng: &mut Rng) -> Vec<Split> {
    let mut splits = vec![Split::Train; cfg.num_trajectories];
    for (g, mut members) in groups.into_iter().enumerate() {
        members.shuffle(rng);
        let n = members.len();
        let mut n_val = (cfg.val_fraction * n as f64).round() as usize;
        let mut n_test = (cfg.test_fraction * n as f64).round() as usize;
        // head-contact trajectories reach every split once there are three
        if g == 0 && n >= 3 {
            n_val = n_val.max(1);
            n_test = n_test.max(1);
        }
        while n_val + n_test >= n && n_val + n_test > 0 {
            if n_test >= n_val {
                n_test -= 1;
            } else {
                n_val -= 1;
            }
        }
        for (k, &i) in members.iter().enumerate() {
            splits[i] = if k < n_test {
                Split::Test
            } else if k < n_test + n_val {
                Split::Val
            } else {
                Split::Train
            };
        }
    }
    splits
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let (n_fall, n_head) = calibrate_counts(cfg)?;
    let n = cfg.num_trajectories;

    let mut roles: Vec<u8> = (0..n).map(|i| if i < n_head { 2 } else if i < n_fall { 1 } else { 0 }).collect();
    roles.shuffle(&mut substream(cfg.seed, "synth-roles", 0));
    let mut groups: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, r) in roles.iter().enumerate() {
        groups[2 - *r as usize].push(i);
    }
    let splits = assign_splits(cfg, groups, &mut substream(cfg.seed, "synth-splits", 0));

    let dirs = directions(cfg);
    let (u_trunk, u_head, u_cont, u_motion, u_fall) = (&dirs[0], &dirs[1], &dirs[2], &dirs[3], &dirs[4]);
    let amp = SIGNAL_AMPLITUDE * cfg.signal_strength;
    let confuser_p = (CONFUSER_RATE * cfg.confuser_strength).min(1.0);
    let starts = cfg.window_starts();
    let t_total = cfg.frames_per_trajectory;

    let mut ds = Dataset::default();
    let mut planted = PlantedTruth::default();
    for (i, (&role, &split)) in roles.iter().zip(&splits).enumerate() {
        let mut rng = substream(cfg.seed, "synth-trajectory", i as u64);
        let traj_id = format!("t{i:04}");
        let fall = role > 0;
        let plan = fall.then(|| plan_fall(cfg, role == 2, &mut rng));
        match &plan {
            Some(p) => fall_contacts(&traj_id, p, cfg, &mut rng, &mut ds.contacts),
            None => supported_contacts(&traj_id, t_total, &mut rng, &mut ds.contacts),
        }
        ds.trajectories.push(TrajectoryRecord { traj_id: traj_id.clone(), fall_flag: fall, num_frames: t_total, split });

        let signature: Vec<f64> = (0..cfg.feature_dim).map(|_| rng.sample(StandardNormal)).collect();
        for (k, &t0) in starts.iter().enumerate() {
            let t1 = t0 + cfg.window_len;
            let ev = Evidence::of(plan.as_ref(), t0, t1, cfg.continuation_horizon);
            let label = ev.label();
            let mut x: Vec<f64> =
                signature.iter().map(|g| g + NOISE_STD * rng.sample::<f64, _>(StandardNormal)).collect();
            let mut add = |dir: &[f64], w: f64| x.iter_mut().zip(dir).for_each(|(a, d)| *a += w * d);
            let weight = |inside: bool, ahead: bool| if inside { 1.0 } else if ahead { 0.5 } else { 0.0 };
            add(u_trunk, amp * weight(ev.trunk_in, ev.trunk_cont));
            add(u_head, amp * weight(ev.head_in, ev.head_cont));
            if ev.continuation_only() {
                add(u_cont, amp);
            }
            if let Some(p) = &plan {
                let after = t1.saturating_sub(t0.max(p.t_imp)) as f64 / cfg.window_len as f64;
                add(u_motion, 0.8 * amp * after);
                add(u_fall, FALL_SIGNATURE);
            }
            // confuser draw happens for every window so the stream layout does
            // not depend on labels
            let confuse = rng.random_bool(confuser_p);
            if confuse && label == PhysicsLabel::Supported {
                add(u_trunk, amp);
            }
            let window_id = format!("{traj_id}_w{k:02}");
            ds.windows.push(WindowRecord {
                window_id: window_id.clone(),
                traj_id: traj_id.clone(),
                t0,
                t1,
                features: x,
                fall_flag: fall,
                phys_label: None,
            });
            planted.windows.push(PlantedWindow { window_id, traj_id: traj_id.clone(), label, fall_flag: fall });
        }
    }
    ds.validate()?;
    Ok(SynthOutput { dataset: ds, planted })
}

/// Share of planted contact windows whose dominant category is backed only by
/// continuation descriptors.
pub fn continuation_only_share(ds: &Dataset, planted: &PlantedTruth) -> f64 {
    let mut contact = 0usize;
    let mut only = 0usize;
    for (w, p) in ds.windows.iter().zip(&planted.windows) {
        if !p.label.is_contact() {
            continue;
        }
        contact += 1;
        let in_window = ds.contacts.iter().any(|d| {
            d.traj_id == w.traj_id
                && d.source == ContactSource::InWindow
                && d.region.category() == p.label
                && d.t_s < w.t1
                && d.t_e > w.t0
        });
        if !in_window {
            only += 1;
        }
    }
    if contact == 0 {
        0.0
    } else {
        only as f64 / contact as f64
    }
}
