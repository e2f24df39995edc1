//! Post-hoc diagnostics on frozen embeddings.

pub mod binary;
pub mod geometry;
pub mod neighborhood;
pub mod poa;
pub mod probe;
pub mod rank;
pub mod report;

pub use binary::{auc, average_precision};
pub use geometry::{category_mean_projection, pcr, project, severity_axis, Pcr, PerClass, SeverityAxis, PCR_EPSILON};
pub use neighborhood::{neighborhood_consistency, ClassCount, NeighborhoodResult};
pub use poa::{poa_macro, DEFAULT_PAIR_CAP};
pub use probe::{linear_probe_scores, ProbeConfig};
pub use rank::{average_ranks, kendall_tau_b, spearman};
pub use report::{
    full_report, neighborhood_csv, projections_csv, read_metrics_json, write_metrics_json, EvalConfig, MetricsReport,
    ProjectionRow, ReportOutput,
};
