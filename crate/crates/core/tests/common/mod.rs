//! Brute-force oracles and random fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::Rng as _;
use rand_distr::StandardNormal;

use physreg_core::data::{BodyRegion, ContactDescriptor, ContactSource, PhysicsLabel};
use physreg_core::labeling::LabelingConfig;
use physreg_core::relations::PoolItem;
use physreg_core::rng::Rng;
use physreg_core::Matrix;

pub const LABELS: [PhysicsLabel; 3] = [PhysicsLabel::Supported, PhysicsLabel::Trunk, PhysicsLabel::Head];

// ---------------------------------------------------------------- labeling

pub struct LabelCase {
    pub t0: u32,
    pub t1: u32,
    pub descriptors: Vec<ContactDescriptor>,
    pub cfg: LabelingConfig,
}

pub fn random_label_case(rng: &mut Rng) -> LabelCase {
    let t0: u32 = rng.random_range(0..60);
    let t1 = t0 + rng.random_range(1..40);
    let horizon = rng.random_range(1..40);
    let impulses = [0.0, 0.5, 1.0, 2.5, 7.0];
    let n = rng.random_range(0..9);
    let mut descriptors = Vec::with_capacity(n);
    for _ in 0..n {
        // starts cluster around the window edges and the horizon end
        let anchor = [t0, t1, t1 + horizon, t0.saturating_sub(5), rng.random_range(0..140)][rng.random_range(0..5)];
        let t_s = (anchor as i64 + rng.random_range(-3..=3)).max(0) as u32;
        let t_e = t_s + rng.random_range(1..25);
        let impulse = if rng.random_bool(0.5) { impulses[rng.random_range(0..impulses.len())] } else { rng.random_range(0.0..8.0) };
        descriptors.push(ContactDescriptor {
            traj_id: "T".into(),
            region: BodyRegion::ALL[rng.random_range(0..BodyRegion::ALL.len())],
            t_s,
            t_e,
            impulse,
            source: if rng.random_bool(0.5) { ContactSource::InWindow } else { ContactSource::Continuation },
        });
    }
    let (use_window_source, use_continuation_source) = match rng.random_range(0..3) {
        0 => (true, false),
        1 => (false, true),
        _ => (true, true),
    };
    let min_impulse = if rng.random_bool(0.5) { impulses[rng.random_range(0..impulses.len())] } else { rng.random_range(0.0..8.0) };
    LabelCase {
        t0,
        t1,
        descriptors,
        cfg: LabelingConfig { min_impulse, use_window_source, use_continuation_source, continuation_horizon: horizon },
    }
}

fn admitted(c: &LabelCase, d: &ContactDescriptor) -> bool {
    let aligned = match d.source {
        ContactSource::InWindow => c.cfg.use_window_source && d.t_s < c.t1 && d.t_e > c.t0,
        ContactSource::Continuation => {
            c.cfg.use_continuation_source && d.t_s >= c.t1 && d.t_s < c.t1 + c.cfg.continuation_horizon
        }
    };
    aligned && d.impulse >= c.cfg.min_impulse
}

/// Scans every descriptor and takes the first dominance case that matches.
pub fn label_oracle(c: &LabelCase) -> PhysicsLabel {
    let any = |regions: &[BodyRegion]| c.descriptors.iter().any(|d| admitted(c, d) && regions.contains(&d.region));
    if any(&[BodyRegion::Head]) {
        PhysicsLabel::Head
    } else if any(&[BodyRegion::Torso, BodyRegion::Hip]) {
        PhysicsLabel::Trunk
    } else {
        PhysicsLabel::Supported
    }
}

/// Per-category maximum impulse over admitted descriptors.
pub fn evidence_oracle(c: &LabelCase) -> [Option<f64>; 3] {
    let mut out = [None, None, None];
    for d in c.descriptors.iter().filter(|d| admitted(c, d)) {
        let slot = match d.region {
            BodyRegion::Head => 2,
            BodyRegion::Torso | BodyRegion::Hip => 1,
            _ => 0,
        };
        out[slot] = Some(out[slot].map_or(d.impulse, |m: f64| m.max(d.impulse)));
    }
    out
}

// --------------------------------------------------------------- relations

/// Random batch of at most 12 windows over at most 4 trajectories, followed
/// by up to 6 bank rows, some of which snapshot batch windows.
pub fn random_pool(rng: &mut Rng) -> (Vec<PoolItem>, usize) {
    let batch = rng.random_range(1..=12);
    let trajs = rng.random_range(1..=4);
    let mut pool: Vec<PoolItem> = (0..batch)
        .map(|k| PoolItem { key: k, traj: rng.random_range(0..trajs), label: LABELS[rng.random_range(0..3)] })
        .collect();
    for b in 0..rng.random_range(0..=6) {
        if rng.random_bool(0.3) {
            let src = pool[rng.random_range(0..batch)];
            pool.push(src);
        } else {
            pool.push(PoolItem { key: 100 + b, traj: rng.random_range(0..trajs + 1), label: LABELS[rng.random_range(0..3)] });
        }
    }
    (pool, batch)
}

pub struct RelationOracle {
    pub traj_positives: Vec<usize>,
    pub candidates: Vec<usize>,
    pub mask: Vec<usize>,
    pub phys_positives: Vec<usize>,
    pub cross_traj_candidates: Vec<usize>,
}

pub fn relation_oracle(pool: &[PoolItem], i: usize, masking: bool) -> RelationOracle {
    let contact = |l: PhysicsLabel| matches!(l, PhysicsLabel::Head | PhysicsLabel::Trunk);
    let me = pool[i];
    let cand: Vec<usize> = (0..pool.len()).filter(|&k| k != i && pool[k].key != me.key).collect();
    let pick = |f: &dyn Fn(&PoolItem) -> bool| cand.iter().copied().filter(|&k| f(&pool[k])).collect::<Vec<_>>();
    RelationOracle {
        traj_positives: pick(&|p| p.traj == me.traj),
        mask: pick(&|p| masking && contact(me.label) && contact(p.label) && p.traj != me.traj),
        phys_positives: pick(&|p| p.label == me.label && contact(me.label) && p.traj != me.traj),
        cross_traj_candidates: pick(&|p| p.traj != me.traj),
        candidates: cand,
    }
}

// ------------------------------------------------------------------ loss

pub fn random_unit_rows(rng: &mut Rng, n: usize, d: usize) -> (Matrix, Matrix) {
    let h = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    let z = Matrix::from_rows(
        d,
        h.iter_rows().map(|r| {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter().map(|x| x / n).collect::<Vec<_>>()
        }),
    );
    (z, h)
}

/// Unmasked-or-masked motion loss of anchor `i` by direct exponent sums.
pub fn motion_oracle(z: &Matrix, i: usize, pos: &[usize], den: &[usize], tau: f64) -> f64 {
    let s = |k: usize| (z.row(i).iter().zip(z.row(k)).map(|(a, b)| a * b).sum::<f64>() / tau).exp();
    let num: f64 = pos.iter().map(|&k| s(k)).sum();
    let den: f64 = den.iter().map(|&k| s(k)).sum();
    -(num / den).ln()
}

// ---------------------------------------------------------------- metrics

/// Scores with heavy ties in about half of the fixtures.
pub fn random_scores(rng: &mut Rng, n: usize) -> Vec<f64> {
    if rng.random_bool(0.5) {
        let levels = rng.random_range(1..5);
        (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.25).collect()
    } else {
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }
}

pub fn random_labels(rng: &mut Rng, n: usize) -> Vec<PhysicsLabel> {
    let weights = [rng.random_range(1..10), rng.random_range(1..10), rng.random_range(0..10)];
    let total: u32 = weights.iter().sum();
    (0..n)
        .map(|_| {
            let mut r = rng.random_range(0..total);
            for (k, &w) in weights.iter().enumerate() {
                if r < w {
                    return LABELS[k];
                }
                r -= w;
            }
            LABELS[2]
        })
        .collect()
}

fn count_rank(v: &[f64], i: usize) -> f64 {
    let less = v.iter().filter(|&&x| x < v[i]).count() as f64;
    let equal = v.iter().filter(|&&x| x == v[i]).count() as f64;
    1.0 + less + (equal - 1.0) / 2.0
}

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let rx: Vec<f64> = (0..x.len()).map(|i| count_rank(x, i)).collect();
    let ry: Vec<f64> = (0..y.len()).map(|i| count_rank(y, i)).collect();
    let (sx, sy) = (rx.iter().sum::<f64>(), ry.iter().sum::<f64>());
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    let sxx: f64 = rx.iter().map(|a| a * a).sum();
    let syy: f64 = ry.iter().map(|a| a * a).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / (vx * vy).sqrt())
}

pub fn kendall_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let a = x[i].partial_cmp(&x[j]).unwrap() as i32;
            let b = y[i].partial_cmp(&y[j]).unwrap() as i32;
            if a == 0 {
                tx += 1;
            }
            if b == 0 {
                ty += 1;
            }
            match (a * b).signum() {
                1 => c += 1,
                -1 => d += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if n0 == tx || n0 == ty {
        return None;
    }
    Some((c - d) as f64 / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt())
}

pub fn auc_oracle(labels: &[bool], s: &[f64]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0u64);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if labels[i] && !labels[j] {
                pairs += 1;
                wins += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

/// Item `j` ranks at or above item `i` when its score is higher, or equal
/// with an index no larger.
pub fn ap_oracle(labels: &[bool], s: &[f64]) -> Option<f64> {
    let above = |j: usize, i: usize| s[j] > s[i] || (s[j] == s[i] && j <= i);
    let pos: Vec<usize> = (0..s.len()).filter(|&i| labels[i]).collect();
    if pos.is_empty() {
        return None;
    }
    let sum: f64 = pos
        .iter()
        .map(|&i| {
            let hits = pos.iter().filter(|&&j| above(j, i)).count() as f64;
            let seen = (0..s.len()).filter(|&j| above(j, i)).count() as f64;
            hits / seen
        })
        .sum();
    Some(sum / pos.len() as f64)
}

pub fn poa_oracle(labels: &[PhysicsLabel], s: &[f64]) -> Option<f64> {
    let mut per_pair = Vec::new();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let (mut acc, mut cnt) = (0.0, 0u64);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if labels[i] == LABELS[a] && labels[j] == LABELS[b] {
                    cnt += 1;
                    acc += if s[j] > s[i] { 1.0 } else if s[j] == s[i] { 0.5 } else { 0.0 };
                }
            }
        }
        if cnt > 0 {
            per_pair.push(acc / cnt as f64);
        }
    }
    (!per_pair.is_empty()).then(|| per_pair.iter().sum::<f64>() / per_pair.len() as f64)
}

pub fn pcr_oracle(z: &Matrix, labels: &[PhysicsLabel]) -> Option<f64> {
    let n = z.rows();
    let dist = |i: usize, j: usize| z.row(i).iter().zip(z.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let mut inter = Vec::new();
    let mut intra = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i < j {
                if labels[i] == labels[j] {
                    intra.push(dist(i, j));
                } else {
                    inter.push(dist(i, j));
                }
            }
        }
    }
    if inter.is_empty() || intra.is_empty() {
        return None;
    }
    let mi = intra.iter().sum::<f64>() / intra.len() as f64;
    Some((inter.iter().sum::<f64>() / inter.len() as f64) / mi.max(1e-12))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
