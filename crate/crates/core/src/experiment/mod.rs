//! High-temperature limit experiments: configuration, the per-temperature
//! convergence run, the self-check suite and report files.

mod config;
mod convergence;
mod report;
mod selfcheck;

pub use config::{ExperimentConfig, OutputPaths};
pub use convergence::{
    free_first_order_distance, rescaled_reduced_matrices, run_convergence, ClassicalReference, ConvergenceReport,
    DistanceMetric, PropertyCheck, ReportRow, BL_GAP_TOL, MONOTONE_SLACK_SE, VARIATIONAL_TOL,
};
pub use report::{emit_convergence, emit_report, write_report_csv, OracleValues, Summary, CSV_HEADER};
pub use selfcheck::{
    geometric_log_z, quartic_single_mode_z_r, run_selfchecks, CheckOutcome, SelfCheckOptions, SelfCheckReport,
    OVERLAP_PAIRS, RANDOM_STATES,
};
