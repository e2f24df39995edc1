//! Composite objective: masked trajectory-contrastive loss, exact-class
//! physics attraction, and a variance hinge against collapse.
//!
//! ```text
//! total   = motion + lambda_phys * physics + lambda_var * variance
//! motion  = mean_i  -log( sum_{j in P_i} e^{s_ij/tau}   / sum_{k in A_i \ M_i} e^{s_ik/tau} )
//! physics = mean_i  -log( sum_{j in R_i} e^{s_ij/tau_p} / sum_{k in Q_i}       e^{s_ik/tau_p} )
//! variance = mean_d max(0, gamma - sqrt(Var_d(h) + eps))
//! ```
//!
//! `s_ij = z_i . z_j` on unit-norm embeddings. Branch means run over the
//! anchors that are not skipped for that branch. The variance term uses the
//! pre-normalization outputs `h` of the batch rows (population variance).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, log_sum_exp, norm, softmax, Matrix};
use crate::relations::AnchorRelations;

/// Unit-norm tolerance accepted at the public boundary.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub tau: f64,
    pub tau_p: f64,
    pub lambda_phys: f64,
    pub lambda_var: f64,
    pub var_gamma: f64,
    pub var_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            tau: 0.2,
            tau_p: 0.2,
            lambda_phys: 1.0,
            lambda_var: 0.1,
            var_gamma: 1.0,
            var_eps: 1e-4,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("loss.{name} must be positive, got {v}")))
            }
        };
        let nonneg = |v: f64, name: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("loss.{name} must be non-negative, got {v}")))
            }
        };
        pos(self.tau, "tau")?;
        pos(self.tau_p, "tau_p")?;
        pos(self.var_gamma, "var_gamma")?;
        pos(self.var_eps, "var_eps")?;
        nonneg(self.lambda_phys, "lambda_phys")?;
        nonneg(self.lambda_var, "lambda_var")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub motion: f64,
    pub physics: f64,
    pub variance: f64,
    pub total: f64,
    pub skipped_motion_anchors: usize,
    pub skipped_physics_anchors: usize,
}

/// Partial derivatives of the total loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    /// d total / d z, one row per pool row, treating the embeddings as free
    /// variables (bank rows included; callers treat them as constants).
    pub embeddings: Matrix,
    /// d total / d h, one row per anchor, from the variance term only.
    pub pre_projection: Matrix,
}

fn check_unit(v: &[f64]) -> Result<()> {
    let n = norm(v);
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm: n });
    }
    Ok(())
}

pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    check_unit(a)?;
    check_unit(b)?;
    Ok(dot(a, b))
}

/// `-log(sum_pos e^{s/t} / sum_den e^{s/t})` for anchor row `a`, plus the
/// softmax weights over the two index sets.
fn contrastive_term(z: &Matrix, a: usize, pos: &[usize], den: &[usize], temp: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let za = z.row(a);
    let sp: Vec<f64> = pos.iter().map(|&j| dot(za, z.row(j)) / temp).collect();
    let sd: Vec<f64> = den.iter().map(|&k| dot(za, z.row(k)) / temp).collect();
    let value = log_sum_exp(&sd) - log_sum_exp(&sp);
    (value, softmax(&sp), softmax(&sd))
}

/// Accumulates the gradient of one contrastive term, scaled by `scale`.
#[allow(clippy::too_many_arguments)]
fn contrastive_grad(
    z: &Matrix,
    grad: &mut Matrix,
    a: usize,
    pos: &[usize],
    p: &[f64],
    den: &[usize],
    q: &[f64],
    temp: f64,
    scale: f64,
) {
    let c = scale / temp;
    let za = z.row(a).to_vec();
    let mut ga = vec![0.0; z.cols()];
    for (&j, &w) in pos.iter().zip(p) {
        axpy(&mut ga, -c * w, z.row(j));
        axpy(grad.row_mut(j), -c * w, &za);
    }
    for (&k, &w) in den.iter().zip(q) {
        axpy(&mut ga, c * w, z.row(k));
        axpy(grad.row_mut(k), c * w, &za);
    }
    axpy(grad.row_mut(a), 1.0, &ga);
}

/// Masked trajectory loss of one anchor; `None` when it has no trajectory
/// positives and is skipped.
pub fn motion_loss(rel: &AnchorRelations, z: &Matrix, cfg: &LossConfig) -> Result<Option<f64>> {
    check_rows(z, rel)?;
    motion_raw(rel, z, cfg)
}

fn motion_raw(rel: &AnchorRelations, z: &Matrix, cfg: &LossConfig) -> Result<Option<f64>> {
    if rel.skip_motion() {
        return Ok(None);
    }
    let den = rel.denominator();
    if den.is_empty() {
        return Err(Error::EmptyDenominator { anchor: rel.anchor });
    }
    Ok(Some(contrastive_term(z, rel.anchor, &rel.traj_positives, &den, cfg.tau).0))
}

/// Physics attraction loss of one anchor; `None` for Supported anchors and
/// anchors without a cross-trajectory partner of their class.
pub fn physics_loss(rel: &AnchorRelations, z: &Matrix, cfg: &LossConfig) -> Result<Option<f64>> {
    check_rows(z, rel)?;
    physics_raw(rel, z, cfg)
}

fn physics_raw(rel: &AnchorRelations, z: &Matrix, cfg: &LossConfig) -> Result<Option<f64>> {
    if rel.skip_physics() {
        return Ok(None);
    }
    if rel.cross_traj_candidates.is_empty() {
        return Err(Error::EmptyDenominator { anchor: rel.anchor });
    }
    Ok(Some(
        contrastive_term(z, rel.anchor, &rel.phys_positives, &rel.cross_traj_candidates, cfg.tau_p).0,
    ))
}

fn check_rows(z: &Matrix, rel: &AnchorRelations) -> Result<()> {
    check_unit(z.row(rel.anchor))?;
    for &k in &rel.candidates {
        check_unit(z.row(k))?;
    }
    Ok(())
}

fn column_stats(h: &Matrix, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let n = h.rows() as f64;
    let d = h.cols();
    let mut mean = vec![0.0; d];
    for r in h.iter_rows() {
        axpy(&mut mean, 1.0 / n, r);
    }
    let mut var = vec![0.0; d];
    for r in h.iter_rows() {
        for (v, (x, m)) in var.iter_mut().zip(r.iter().zip(&mean)) {
            *v += (x - m) * (x - m) / n;
        }
    }
    let std = var.iter().map(|v| (v + eps).sqrt()).collect();
    (mean, std)
}

/// Variance hinge over the columns of the pre-normalization batch outputs.
pub fn variance_loss(h: &Matrix, cfg: &LossConfig) -> Result<f64> {
    if h.rows() < 2 {
        return Err(Error::Undefined(format!("variance loss needs >= 2 rows, got {}", h.rows())));
    }
    let (_, std) = column_stats(h, cfg.var_eps);
    Ok(std.iter().map(|s| (cfg.var_gamma - s).max(0.0)).sum::<f64>() / h.cols() as f64)
}

fn variance_grad(h: &Matrix, cfg: &LossConfig, scale: f64) -> Matrix {
    let (mean, std) = column_stats(h, cfg.var_eps);
    let n = h.rows() as f64;
    let d = h.cols() as f64;
    let mut g = Matrix::zeros(h.rows(), h.cols());
    for i in 0..h.rows() {
        for c in 0..h.cols() {
            if cfg.var_gamma > std[c] {
                g.set(i, c, -scale * (h.get(i, c) - mean[c]) / (d * n * std[c]));
            }
        }
    }
    g
}

/// Everything `composite_loss` and `loss_gradient` share.
fn evaluate(rels: &[AnchorRelations], z: &Matrix, h: &Matrix, cfg: &LossConfig, want_grad: bool) -> Result<(LossBreakdown, Option<LossGradient>)> {
    cfg.validate()?;
    if h.rows() != rels.len() {
        return Err(Error::DimensionMismatch {
            what: "pre-projection rows vs anchors".into(),
            expected: rels.len(),
            got: h.rows(),
        });
    }
    let mut out = LossBreakdown::default();
    let mut motion_terms = Vec::new();
    let mut physics_terms = Vec::new();

    for rel in rels {
        match motion_raw(rel, z, cfg)? {
            Some(_) => motion_terms.push(rel),
            None => out.skipped_motion_anchors += 1,
        }
        match physics_raw(rel, z, cfg)? {
            Some(_) => physics_terms.push(rel),
            None => out.skipped_physics_anchors += 1,
        }
    }
    if motion_terms.is_empty() {
        return Err(Error::AllAnchorsSkipped { branch: "motion" });
    }

    let mut grad_z = want_grad.then(|| Matrix::zeros(z.rows(), z.cols()));

    let scale_m = 1.0 / motion_terms.len() as f64;
    for rel in &motion_terms {
        let den = rel.denominator();
        let (v, p, q) = contrastive_term(z, rel.anchor, &rel.traj_positives, &den, cfg.tau);
        out.motion += v * scale_m;
        if let Some(g) = grad_z.as_mut() {
            contrastive_grad(z, g, rel.anchor, &rel.traj_positives, &p, &den, &q, cfg.tau, scale_m);
        }
    }

    if !physics_terms.is_empty() {
        let scale_p = 1.0 / physics_terms.len() as f64;
        for rel in &physics_terms {
            let (v, p, q) =
                contrastive_term(z, rel.anchor, &rel.phys_positives, &rel.cross_traj_candidates, cfg.tau_p);
            out.physics += v * scale_p;
            if cfg.lambda_phys != 0.0 {
                if let Some(g) = grad_z.as_mut() {
                    contrastive_grad(
                        z,
                        g,
                        rel.anchor,
                        &rel.phys_positives,
                        &p,
                        &rel.cross_traj_candidates,
                        &q,
                        cfg.tau_p,
                        cfg.lambda_phys * scale_p,
                    );
                }
            }
        }
    }

    out.variance = if h.rows() >= 2 { variance_loss(h, cfg)? } else { 0.0 };
    out.total = out.motion + cfg.lambda_phys * out.physics + cfg.lambda_var * out.variance;

    let grad = grad_z.map(|embeddings| {
        let pre_projection = if cfg.lambda_var != 0.0 && h.rows() >= 2 {
            variance_grad(h, cfg, cfg.lambda_var)
        } else {
            Matrix::zeros(h.rows(), h.cols())
        };
        LossGradient { embeddings, pre_projection }
    });
    Ok((out, grad))
}

fn check_all_unit(z: &Matrix) -> Result<()> {
    z.iter_rows().try_for_each(check_unit)
}

/// Composite loss over all anchors. `z` holds the pool embeddings (batch rows
/// first), `h` the pre-normalization outputs of the anchors.
pub fn composite_loss(rels: &[AnchorRelations], z: &Matrix, h: &Matrix, cfg: &LossConfig) -> Result<LossBreakdown> {
    check_all_unit(z)?;
    Ok(evaluate(rels, z, h, cfg, false)?.0)
}

/// [`composite_loss`] without the unit-norm check on `z`, for probing the
/// objective at perturbed embeddings.
pub fn composite_loss_raw(rels: &[AnchorRelations], z: &Matrix, h: &Matrix, cfg: &LossConfig) -> Result<LossBreakdown> {
    Ok(evaluate(rels, z, h, cfg, false)?.0)
}

/// Loss value and its exact gradient.
pub fn loss_gradient(
    rels: &[AnchorRelations],
    z: &Matrix,
    h: &Matrix,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, LossGradient)> {
    check_all_unit(z)?;
    let (b, g) = evaluate(rels, z, h, cfg, true)?;
    Ok((b, g.expect("gradient requested")))
}

/// Pulls an embedding gradient back through `z = h / |h|` for one row.
pub fn normalize_backward(h: &[f64], dz: &[f64]) -> Vec<f64> {
    let n = norm(h).max(1e-12);
    let z: Vec<f64> = h.iter().map(|x| x / n).collect();
    let proj = dot(&z, dz);
    dz.iter().zip(&z).map(|(g, zi)| (g - zi * proj) / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PhysicsLabel::{self, *};
    use crate::relations::{build_relations, PoolItem, RelationOptions};
    use crate::rng::substream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn unit_rows(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows[0].len(), rows.iter().map(|r| {
            let n = norm(r);
            r.iter().map(|x| x / n).collect::<Vec<_>>()
        }))
    }

    fn pool(layout: &[(usize, PhysicsLabel)]) -> Vec<PoolItem> {
        layout.iter().enumerate().map(|(k, &(traj, label))| PoolItem { key: k, traj, label }).collect()
    }

    fn random_unit(rng: &mut crate::rng::Rng, n: usize, d: usize) -> (Matrix, Matrix) {
        let h = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
        let z = Matrix::from_rows(d, h.iter_rows().map(|r| {
            let nr = norm(r);
            r.iter().map(|x| x / nr).collect::<Vec<_>>()
        }));
        (z, h)
    }

    #[test]
    fn cosine_sim_cases() {
        assert_eq!(cosine_sim(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(cosine_sim(&[2.0, 0.0], &[1.0, 0.0]), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn identical_embeddings_give_count_ratio() {
        // anchor + 2 trajectory positives + 3 others, no contact labels
        let p = pool(&[(0, Supported), (0, Supported), (0, Supported), (1, Supported), (2, Supported), (3, Supported)]);
        let rels = build_relations(&p, 1, RelationOptions::default());
        let z = unit_rows(&vec![vec![1.0, 1.0]; 6]);
        let v = motion_loss(&rels[0], &z, &LossConfig::default()).unwrap().unwrap();
        assert!((v - 2.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn three_window_hand_case() {
        let p = pool(&[(0, Supported), (0, Supported), (1, Supported)]);
        let rels = build_relations(&p, 1, RelationOptions::default());
        let z = Matrix::from_rows(2, [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let v = motion_loss(&rels[0], &z, &LossConfig::default()).unwrap().unwrap();
        let expected = -(5f64.exp() / (5f64.exp() + 1.0)).ln();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - (1.0 + (-5f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn masking_removes_dissimilar_denominator_term() {
        // Contact anchor; the only cross-trajectory window is a contact window
        // pointing away from the anchor.
        let p = pool(&[(0, Trunk), (0, Supported), (1, Trunk)]);
        let z = Matrix::from_rows(2, [[1.0, 0.0], [0.6, 0.8], [-1.0, 0.0]]);
        let cfg = LossConfig::default();
        let masked = motion_loss(&build_relations(&p, 1, RelationOptions::default())[0], &z, &cfg).unwrap().unwrap();
        let plain = motion_loss(&build_relations(&p, 1, RelationOptions { masking: false, ..Default::default() })[0], &z, &cfg)
            .unwrap()
            .unwrap();
        assert!(masked < plain);
        assert!(masked.abs() < 1e-12); // only the positive remains in the denominator
    }

    #[test]
    fn physics_closed_forms() {
        // Head anchor, one Head partner and three other cross-trajectory windows.
        let p = pool(&[(0, Head), (1, Head), (2, Supported), (3, Trunk), (4, Supported)]);
        let rel = &build_relations(&p, 1, RelationOptions::default())[0];
        let cfg = LossConfig::default();
        let same = unit_rows(&vec![vec![0.3, -0.4]; 5]);
        assert!((physics_loss(rel, &same, &cfg).unwrap().unwrap() - 4f64.ln()).abs() < 1e-12);

        let z = Matrix::from_rows(2, [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, -1.0]]);
        let expected = -(5f64.exp() / (5f64.exp() + 3.0)).ln();
        assert!((physics_loss(rel, &z, &cfg).unwrap().unwrap() - expected).abs() < 1e-12);

        let sup = &build_relations(&p, 3, RelationOptions::default())[2];
        assert_eq!(physics_loss(sup, &z, &cfg).unwrap(), None);
    }

    #[test]
    fn variance_cases() {
        let cfg = LossConfig::default();
        let same = Matrix::from_rows(3, [[1.0, 2.0, 3.0]; 4]);
        assert!((variance_loss(&same, &cfg).unwrap() - (1.0 - 1e-2)).abs() < 1e-12);

        let spread = Matrix::from_rows(2, [[-3.0, 5.0], [3.0, -5.0]]);
        assert_eq!(variance_loss(&spread, &cfg).unwrap(), 0.0);

        let cfg0 = LossConfig { var_eps: f64::MIN_POSITIVE, ..cfg.clone() };
        let two = Matrix::from_rows(1, [[0.0], [2.0]]);
        assert!(variance_loss(&two, &cfg0).unwrap().abs() < 1e-12);

        assert!(variance_loss(&Matrix::from_rows(1, [[0.0]]), &cfg).is_err());
    }

    #[test]
    fn total_is_weighted_sum_and_zero_weights_reduce_to_motion() {
        let mut rng = substream(1, "test", 0);
        let p = pool(&[(0, Head), (0, Trunk), (1, Head), (1, Supported), (2, Trunk), (2, Trunk)]);
        let rels = build_relations(&p, 6, RelationOptions::default());
        let (z, h) = random_unit(&mut rng, 6, 5);
        let cfg = LossConfig { lambda_phys: 0.7, lambda_var: 0.3, ..Default::default() };
        let b = composite_loss(&rels, &z, &h, &cfg).unwrap();
        assert_eq!(b.total, b.motion + 0.7 * b.physics + 0.3 * b.variance);

        let mut m = Vec::new();
        let mut ph = Vec::new();
        for r in &rels {
            m.extend(motion_loss(r, &z, &cfg).unwrap());
            ph.extend(physics_loss(r, &z, &cfg).unwrap());
        }
        assert!((b.motion - m.iter().sum::<f64>() / m.len() as f64).abs() < 1e-12);
        assert!((b.physics - ph.iter().sum::<f64>() / ph.len() as f64).abs() < 1e-12);
        assert_eq!(b.skipped_physics_anchors, 6 - ph.len());

        let zero = LossConfig { lambda_phys: 0.0, lambda_var: 0.0, ..Default::default() };
        let b0 = composite_loss(&rels, &z, &h, &zero).unwrap();
        assert_eq!(b0.total, b0.motion);
    }

    #[test]
    fn temperature_scaling_consistency() {
        let mut rng = substream(2, "test", 0);
        let p = pool(&[(0, Head), (0, Trunk), (1, Head), (2, Supported)]);
        let rels = build_relations(&p, 4, RelationOptions::default());
        let (z, _) = random_unit(&mut rng, 4, 3);
        let c: f64 = 0.5;
        // Scaling every similarity by c: scale the anchor rows by c (z_i . z_j -> c z_i . z_j).
        let scaled = Matrix::from_rows(3, z.iter_rows().enumerate().map(|(i, r)| {
            if i == 0 { r.iter().map(|x| x * c).collect::<Vec<_>>() } else { r.to_vec() }
        }));
        let cfg = LossConfig::default();
        let cfg_c = LossConfig { tau: cfg.tau * c, tau_p: cfg.tau_p * c, ..cfg.clone() };
        let a = motion_raw(&rels[0], &z, &cfg).unwrap().unwrap();
        let b = motion_raw(&rels[0], &scaled, &cfg_c).unwrap().unwrap();
        assert!((a - b).abs() < 1e-12);
        let a = physics_raw(&rels[0], &z, &cfg).unwrap().unwrap();
        let b = physics_raw(&rels[0], &scaled, &cfg_c).unwrap().unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn all_motion_skipped_is_an_error() {
        let p = pool(&[(0, Head), (1, Head)]);
        let rels = build_relations(&p, 2, RelationOptions::default());
        let z = unit_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let h = z.clone();
        assert!(matches!(composite_loss(&rels, &z, &h, &LossConfig::default()), Err(Error::AllAnchorsSkipped { branch: "motion" })));
    }

    fn fd_check(seed: u64) -> f64 {
        let mut rng = substream(seed, "fd", 0);
        let labels = [Supported, Trunk, Head];
        let n = rng.random_range(3..=6);
        let layout: Vec<(usize, PhysicsLabel)> =
            (0..n).map(|_| (rng.random_range(0..3), labels[rng.random_range(0..3)])).collect();
        let p = pool(&layout);
        let rels = build_relations(&p, n, RelationOptions::default());
        if rels.iter().all(|r| r.skip_motion()) {
            return 0.0;
        }
        let (z, h) = random_unit(&mut rng, n, 4);
        let cfg = LossConfig { lambda_phys: 0.8, lambda_var: 0.5, var_gamma: 2.0, ..Default::default() };
        let (_, g) = loss_gradient(&rels, &z, &h, &cfg).unwrap();
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for c in 0..4 {
                let mut zp = z.clone();
                zp.set(i, c, z.get(i, c) + eps);
                let mut zm = z.clone();
                zm.set(i, c, z.get(i, c) - eps);
                let fd = (composite_loss_raw(&rels, &zp, &h, &cfg).unwrap().total
                    - composite_loss_raw(&rels, &zm, &h, &cfg).unwrap().total)
                    / (2.0 * eps);
                let an = g.embeddings.get(i, c);
                worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));

                let mut hp = h.clone();
                hp.set(i, c, h.get(i, c) + eps);
                let mut hm = h.clone();
                hm.set(i, c, h.get(i, c) - eps);
                let fd = (composite_loss_raw(&rels, &z, &hp, &cfg).unwrap().total
                    - composite_loss_raw(&rels, &z, &hm, &cfg).unwrap().total)
                    / (2.0 * eps);
                let an = g.pre_projection.get(i, c);
                worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
            }
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..20 {
            let err = fd_check(seed);
            assert!(err < 1e-4, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn zero_weights_give_zero_branch_gradients() {
        let mut rng = substream(4, "test", 0);
        let p = pool(&[(0, Head), (0, Head), (1, Head), (1, Head)]);
        let rels = build_relations(&p, 4, RelationOptions::default());
        let (z, h) = random_unit(&mut rng, 4, 3);
        let only_motion = LossConfig { lambda_phys: 0.0, lambda_var: 0.0, ..Default::default() };
        let (_, g0) = loss_gradient(&rels, &z, &h, &only_motion).unwrap();
        assert!(g0.pre_projection.as_slice().iter().all(|&x| x == 0.0));
        let with_phys = LossConfig { lambda_phys: 1.0, lambda_var: 0.0, ..Default::default() };
        let (_, g1) = loss_gradient(&rels, &z, &h, &with_phys).unwrap();
        assert_ne!(g0.embeddings, g1.embeddings);
    }

    #[test]
    fn skipped_anchor_contributes_no_gradient() {
        // Anchor 2 is alone in its trajectory and Supported: skipped in both
        // branches. Nothing else references it except as a denominator term,
        // so remove it from everyone's view by checking its own-term rows.
        let p = pool(&[(0, Supported), (0, Supported), (1, Supported)]);
        let rels = build_relations(&p, 3, RelationOptions::default());
        let z = unit_rows(&[vec![1.0, 0.2], vec![0.3, 1.0], vec![-1.0, 0.5]]);
        let h = z.clone();
        let cfg = LossConfig { lambda_var: 0.0, ..Default::default() };
        let (_, g_all) = loss_gradient(&rels, &z, &h, &cfg).unwrap();
        let (_, g_two) = loss_gradient(&rels[..2], &z, &h.select_rows(&[0, 1]), &cfg).unwrap();
        assert_eq!(g_all.embeddings, g_two.embeddings);
    }

    #[test]
    fn normalize_backward_matches_fd() {
        let h = [0.4, -1.3, 2.0];
        let dz = [0.7, 0.1, -0.5];
        let f = |h: &[f64]| {
            let n = norm(h);
            h.iter().zip(&dz).map(|(x, g)| x / n * g).sum::<f64>()
        };
        let an = normalize_backward(&h, &dz);
        for c in 0..3 {
            let mut hp = h;
            hp[c] += 1e-6;
            let mut hm = h;
            hm[c] -= 1e-6;
            assert!(((f(&hp) - f(&hm)) / 2e-6 - an[c]).abs() < 1e-8);
        }
    }
}
