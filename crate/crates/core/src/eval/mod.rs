//! Classification metrics, ROC/AUC, interval estimates, hypothesis tests
//! and the hyperparameter grid.

mod grid;
mod metrics;
mod report;
mod stats;

pub use grid::{grid_search, write_grid_csv, GridCellResult, GridSpec, GRID_CSV_HEADER};
pub use metrics::{binary_auc, compute_metrics, roc_auc, ClassMetrics, ConfusionMatrix, Metrics};
pub use report::{EvalReport, RunSummary};
pub use stats::{independent_t_test, mean_ci, TTest, SIGNIFICANCE_LEVEL};
