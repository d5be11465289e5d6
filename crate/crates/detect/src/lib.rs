//! Clip-level aggregation of frame probabilities, the three-threshold event
//! decision, and score-set evaluation (rates, F1, ROC, AUC).

pub mod aggregate;
pub mod decide;
pub mod error;
pub mod metrics;

pub use aggregate::{aggregate, Aggregation};
pub use decide::{decide, decide_matrix, write_decisions_csv, Thresholds};
pub use error::{DetectError, Result};
pub use metrics::{auc_exact, auc_trapezoid, f1, f1_from_counts, rates, roc_points, write_roc_csv, Rates, ScoredSet, TiePolicy};
