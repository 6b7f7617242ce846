//! Scoring: simulation of candidates, pass@k, run statistics and reports.

mod check;
mod report;
mod stats;

use thiserror::Error;

pub use check::{candidate_source, check_sample, check_trace, check_traces, SampleOutcome, SimulatorConfig, SimulatorKind, DEFAULT_MISMATCH_REGEX};
pub use report::{
    config_label, render_comparison_table, render_summary, score_run, EvalReport, KSummary, ProblemRow, RunCounts, RunScore, TokenStats, Totals,
    REPORT_SCHEMA_VERSION,
};
pub use stats::{mean_sd, pass_at_k, MeanSd};

#[derive(Debug, Error)]
pub enum EvalError {
    /// The evaluation cannot run at all, e.g. the simulator is missing.
    #[error("environment error: {0}")]
    Environment(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("I/O error: {0}")]
    Io(String),
}
