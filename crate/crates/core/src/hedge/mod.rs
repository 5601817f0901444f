//! Hedge (multiplicative weights) dynamics with weighted empirical averaging.

mod diagnostics;
mod dynamics;
mod entropy;
mod schedule;
mod trace_io;

pub use diagnostics::{
    contraction_violation, diagnose_entropy_bounds, diagnose_trajectory_bounds, diagnose_trajectory_identities,
    CheckResult, DiagnosticsReport, ACCUMULATED_TOL, POINTWISE_TOL,
};
pub use dynamics::{
    hedge_step, run_trajectory, RunSummary, Snapshot, Trace, TrajectoryRunner, TrajectoryState, WeightedAverage,
};
pub use entropy::{relative_entropy, relative_entropy_log};
pub use schedule::{validate_schedule, LearningRateSchedule, ScheduleValidity, DEFAULT_POWER};
pub use trace_io::{header as trace_header, load_trace, read_trace, TraceFormat, TraceRow, TraceWriter};
