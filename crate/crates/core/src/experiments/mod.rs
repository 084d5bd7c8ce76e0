//! Tuning, sweeps, ablations and significance tests.

mod ablation;
mod grid;
mod methods;
mod report;
mod significance;
mod sweep;

pub use ablation::{ablation_rep, AblationRow};
pub use grid::{grid_search, GridResult, GridRow, GridSpec, SelectionMetric, TrexGrid, TunedParams, ValidationSet};
pub use methods::{build_policy, recommend, Method};
pub use report::{
    read_per_user_csv, write_json, write_per_user_csv, write_report_csv, write_significance_csv, PerUser,
};
pub use significance::{compare_methods, paired_ttest, SignificanceResult};
pub use sweep::{quantile_thresholds, sweep_threshold, write_frontiers, FrontierPoint, FRONTIER_METRICS};
