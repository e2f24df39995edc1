//! Full diagnostic suite for one split, plus the plot-data exports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PhysicsLabel, Split};
use crate::encoder::{embed, EncoderParams};
use crate::error::{Error, Result};
use crate::eval::binary::{auc, average_precision};
use crate::eval::geometry::{category_mean_projection, pcr, project, severity_axis, PerClass};
use crate::eval::neighborhood::{neighborhood_consistency, ClassCount};
use crate::eval::poa::{poa_macro, DEFAULT_PAIR_CAP};
use crate::eval::probe::{linear_probe_scores, ProbeConfig};
use crate::eval::rank::{kendall_tau_b, spearman};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub split: Split,
    pub pair_cap: usize,
    pub k: usize,
    pub seed: u64,
    pub probe: ProbeConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { split: Split::Test, pair_cap: DEFAULT_PAIR_CAP, k: 10, seed: 0, probe: ProbeConfig::default() }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pair_cap == 0 {
            return Err(Error::Config("eval.pair_cap must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("eval.k must be at least 1".into()));
        }
        if self.probe.steps == 0 || self.probe.l2.is_nan() || self.probe.l2 < 0.0 {
            return Err(Error::Config("eval.probe needs steps >= 1 and l2 >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub spearman_rho: f64,
    pub poa_macro: f64,
    pub contact_ap: f64,
    pub contact_auc: f64,
    pub fall_auc: f64,
    pub pcr: f64,
    pub pcr_degenerate: bool,
    pub kendall_tau: f64,
    pub category_mean_projection: PerClass,
    pub neighborhood_diagonal: PerClass,
}

impl MetricsReport {
    pub fn check_ranges(&self) -> Result<()> {
        let unit = [
            ("poa_macro", self.poa_macro),
            ("contact_ap", self.contact_ap),
            ("contact_auc", self.contact_auc),
            ("fall_auc", self.fall_auc),
            ("neighborhood_diagonal.Supported", self.neighborhood_diagonal.supported),
            ("neighborhood_diagonal.Trunk", self.neighborhood_diagonal.trunk),
            ("neighborhood_diagonal.Head", self.neighborhood_diagonal.head),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Invariant(format!("{name} = {v} outside [0, 1]")));
            }
        }
        for (name, v) in [("spearman_rho", self.spearman_rho), ("kendall_tau", self.kendall_tau)] {
            if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::Invariant(format!("{name} = {v} outside [-1, 1]")));
            }
        }
        if self.pcr.is_nan() || self.pcr <= 0.0 || !self.pcr.is_finite() {
            return Err(Error::Invariant(format!("pcr = {} is not a positive real", self.pcr)));
        }
        Ok(())
    }

    /// Plain text table, highest-priority metric first.
    pub fn render_table(&self) -> String {
        let rows = [
            ("Spearman rho", self.spearman_rho),
            ("POA (macro)", self.poa_macro),
            ("Binary Contact AP", self.contact_ap),
            ("Binary Contact AUC", self.contact_auc),
            ("Fall Detection AUC", self.fall_auc),
            ("PCR", self.pcr),
            ("Kendall tau", self.kendall_tau),
        ];
        let mut out = String::new();
        let _ = writeln!(out, "{:<22} {:>10}", "metric", "value");
        for (name, v) in rows {
            let _ = writeln!(out, "{name:<22} {v:>10.4}");
        }
        for c in PhysicsLabel::ALL {
            let _ = writeln!(out, "{:<22} {:>10.4}", format!("mean proj {}", c.as_str()), self.category_mean_projection.get(c));
        }
        for c in PhysicsLabel::ALL {
            let _ = writeln!(out, "{:<22} {:>10.4}", format!("nbr diag {}", c.as_str()), self.neighborhood_diagonal.get(c));
        }
        if self.pcr_degenerate {
            out.push_str("note: within-class distances vanished; PCR is epsilon-guarded\n");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub window_id: String,
    pub label: PhysicsLabel,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub metrics: MetricsReport,
    /// Eval-split projections grouped by label, then by window order.
    pub projections: Vec<ProjectionRow>,
    pub skipped_queries: ClassCount,
}

/// Embeds the dataset with `params`, fits the severity axis and both probes
/// on the train split, and scores the configured split. `labels` is aligned
/// with `ds.windows`.
pub fn full_report(params: &EncoderParams, ds: &Dataset, labels: &[PhysicsLabel], cfg: &EvalConfig) -> Result<ReportOutput> {
    cfg.validate()?;
    if labels.len() != ds.windows.len() {
        return Err(Error::DimensionMismatch { what: "eval labels".into(), expected: ds.windows.len(), got: labels.len() });
    }
    let train_idx = ds.window_indices(Split::Train);
    let eval_idx = ds.window_indices(cfg.split);
    if eval_idx.is_empty() {
        return Err(Error::Undefined(format!("split {} has no windows", cfg.split.as_str())));
    }
    let rows = |idx: &[usize]| idx.iter().map(|&i| &ds.windows[i]).collect::<Vec<_>>();
    let train = embed(params, &rows(&train_idx))?;
    let eval = embed(params, &rows(&eval_idx))?;
    let train_labels: Vec<PhysicsLabel> = train_idx.iter().map(|&i| labels[i]).collect();
    let eval_labels: Vec<PhysicsLabel> = eval_idx.iter().map(|&i| labels[i]).collect();

    let axis = severity_axis(&train.z, &train_labels)?;
    let scores = project(&eval.z, &axis)?;
    let ordinals: Vec<f64> = eval_labels.iter().map(|l| l.ordinal() as f64).collect();

    let train_contact: Vec<bool> = train_labels.iter().map(|l| l.is_contact()).collect();
    let eval_contact: Vec<bool> = eval_labels.iter().map(|l| l.is_contact()).collect();
    let contact_scores = linear_probe_scores(&train.z, &train_contact, &eval.z, &cfg.probe)?;
    let train_fall: Vec<bool> = train_idx.iter().map(|&i| ds.windows[i].fall_flag).collect();
    let eval_fall: Vec<bool> = eval_idx.iter().map(|&i| ds.windows[i].fall_flag).collect();
    let fall_scores = linear_probe_scores(&train.z, &train_fall, &eval.z, &cfg.probe)?;

    let p = pcr(&eval.z, &eval_labels)?;
    let videos: Vec<&str> = eval_idx.iter().map(|&i| ds.windows[i].traj_id.as_str()).collect();
    let nbr = neighborhood_consistency(&eval.z, &eval_labels, &videos, cfg.k, cfg.seed)?;

    let metrics = MetricsReport {
        spearman_rho: spearman(&ordinals, &scores)?,
        poa_macro: poa_macro(&eval_labels, &scores, cfg.seed, cfg.pair_cap)?,
        contact_ap: average_precision(&eval_contact, &contact_scores)?,
        contact_auc: auc(&eval_contact, &contact_scores)?,
        fall_auc: auc(&eval_fall, &fall_scores)?,
        pcr: p.ratio,
        pcr_degenerate: p.degenerate,
        kendall_tau: kendall_tau_b(&ordinals, &scores)?,
        category_mean_projection: category_mean_projection(&scores, &eval_labels)?,
        neighborhood_diagonal: nbr.diagonal,
    };
    metrics.check_ranges()?;

    let mut projections: Vec<ProjectionRow> = eval
        .window_ids
        .iter()
        .zip(&eval_labels)
        .zip(&scores)
        .map(|((id, &label), &score)| ProjectionRow { window_id: id.clone(), label, score })
        .collect();
    projections.sort_by_key(|r| r.label.ordinal());
    Ok(ReportOutput { metrics, projections, skipped_queries: nbr.skipped_queries })
}

pub fn write_metrics_json(path: &Path, m: &MetricsReport) -> Result<()> {
    let mut s = serde_json::to_string_pretty(m).map_err(|e| Error::Invariant(e.to_string()))?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_metrics_json(path: &Path) -> Result<MetricsReport> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Malformed { file: path.to_path_buf(), line: e.line(), message: e.to_string() })
}

pub fn projections_csv(rows: &[ProjectionRow]) -> String {
    let mut out = String::from("window_id,label,score\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.window_id, r.label.as_str(), r.score);
    }
    out
}

pub fn neighborhood_csv(diag: &PerClass, skipped: &ClassCount) -> String {
    let mut out = String::from("class,diagonal_rate,skipped_queries\n");
    for c in PhysicsLabel::ALL {
        let _ = writeln!(out, "{},{},{}", c.as_str(), diag.get(c), skipped.get(c));
    }
    out
}
