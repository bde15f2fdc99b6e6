//! Detection metrics, partition quality and distribution diagnostics.

mod curves;
mod diagnostics;
mod partition;
mod report;

pub use curves::{aupr, auroc, mann_whitney_u};
pub use diagnostics::{orthogonality_diag, shift_stats, BankPairDiag, ShiftStats};
pub use partition::{partition_accuracy, PartitionAccuracy, HUNGARIAN_LIMIT};
pub use report::{fmt_f64, ClassEval, EvalReport, EVAL_COLUMNS};
