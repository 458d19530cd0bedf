//! Sliding-window inference, detection metrics and the coverage experiment.

mod coverage;
mod metrics;
mod sliding;

pub use coverage::{coverage_matrix, coverage_row, evaluate_slices, row_seed, CoverageCell, CoverageSetup, COVER_THRESHOLD};
pub use metrics::{auroc, best_f1_search, confusion, f1, label_segments, point_adjust, threshold, MetricReport};
pub use sliding::{sliding_scores, window_starts, AnomalyScores, WindowScorer, DEFAULT_STRIDE};
