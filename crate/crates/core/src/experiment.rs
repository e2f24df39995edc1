//! Training runs for the variant comparison and the component ablation grid.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::{Dataset, PhysicsLabel};
use crate::encoder::{train, TrainConfig, TrainOutcome, TrainingData, Variant};
use crate::error::Result;
use crate::eval::{full_report, MetricsReport};
use crate::labeling::{broadcast_trajectory_labels, label_dataset, LabelingConfig};
use crate::relations::PhysicsGrouping;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationRow {
    /// Trajectory-level labels broadcast to every window.
    NoDenoising,
    /// Head and Trunk attract each other as one contact class.
    BinaryAttraction,
    ContinuationOnly,
    WindowOnly,
    Full,
    /// Unmasked trajectory contrast only.
    Vanilla,
}

impl AblationRow {
    pub const ALL: [AblationRow; 6] = [
        AblationRow::NoDenoising,
        AblationRow::BinaryAttraction,
        AblationRow::ContinuationOnly,
        AblationRow::WindowOnly,
        AblationRow::Full,
        AblationRow::Vanilla,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationRow::NoDenoising => "no_denoising",
            AblationRow::BinaryAttraction => "binary_attraction",
            AblationRow::ContinuationOnly => "continuation_only",
            AblationRow::WindowOnly => "window_only",
            AblationRow::Full => "full",
            AblationRow::Vanilla => "vanilla",
        }
    }

    /// (denoising, multi-class, window source, continuation source); `None`
    /// for the vanilla control, which uses no physics information.
    pub fn components(self) -> Option<[bool; 4]> {
        match self {
            AblationRow::NoDenoising => Some([false, true, true, true]),
            AblationRow::BinaryAttraction => Some([true, false, true, true]),
            AblationRow::ContinuationOnly => Some([true, true, false, true]),
            AblationRow::WindowOnly => Some([true, true, true, false]),
            AblationRow::Full => Some([true, true, true, true]),
            AblationRow::Vanilla => None,
        }
    }

    pub fn train_config(self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        match self {
            AblationRow::Vanilla => cfg.variant = Variant::Vanilla,
            AblationRow::BinaryAttraction => {
                cfg.variant = Variant::Regularized;
                cfg.grouping = PhysicsGrouping::Binary;
            }
            _ => {
                cfg.variant = Variant::Regularized;
                cfg.grouping = PhysicsGrouping::Exact;
            }
        }
        cfg
    }
}

fn labels_of(windows: &[crate::data::WindowRecord]) -> Vec<PhysicsLabel> {
    windows.iter().map(|w| w.phys_label.unwrap_or(PhysicsLabel::Supported)).collect()
}

/// Window labels under `cfg`, one per dataset window.
pub fn window_labels(ds: &Dataset, cfg: &LabelingConfig) -> Result<Vec<PhysicsLabel>> {
    Ok(labels_of(&label_dataset(&ds.windows, &ds.contacts, cfg)?))
}

/// Labels the row trains with. Evaluation always uses the full labels.
pub fn training_labels(row: AblationRow, ds: &Dataset, base: &LabelingConfig) -> Result<Vec<PhysicsLabel>> {
    match row {
        AblationRow::NoDenoising => Ok(broadcast_trajectory_labels(&ds.trajectories, &ds.windows, &ds.contacts)),
        AblationRow::ContinuationOnly => {
            window_labels(ds, &LabelingConfig { use_window_source: false, use_continuation_source: true, ..base.clone() })
        }
        AblationRow::WindowOnly => {
            window_labels(ds, &LabelingConfig { use_window_source: true, use_continuation_source: false, ..base.clone() })
        }
        _ => window_labels(ds, base),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub row: AblationRow,
    pub seed: u64,
    pub best: MetricsReport,
    #[serde(rename = "final")]
    pub final_metrics: MetricsReport,
    #[serde(skip)]
    pub outcome: TrainOutcome,
}

/// Trains one grid row on `ds` (unlabeled windows are fine) with the given
/// training seed and reports both checkpoints on the configured split.
pub fn run_row(ds: &Dataset, cfg: &ExperimentConfig, row: AblationRow, seed: u64) -> Result<RunResult> {
    let eval_labels = window_labels(ds, &cfg.labeling)?;
    let train_labels = training_labels(row, ds, &cfg.labeling)?;
    let data = TrainingData::from_dataset(ds, &train_labels)?;
    let tcfg = TrainConfig { seed, ..row.train_config(&cfg.train) };
    let outcome = train(&data, &tcfg)?;
    let best = full_report(&outcome.best.params, ds, &eval_labels, &cfg.eval)?.metrics;
    let final_metrics = full_report(&outcome.final_checkpoint.params, ds, &eval_labels, &cfg.eval)?.metrics;
    Ok(RunResult { row, seed, best, final_metrics, outcome })
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
