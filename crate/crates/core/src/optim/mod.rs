//! Optimizer loops, step schedules and iteration traces.

mod problem;
mod runner;
mod schedule;
mod trace;

pub use problem::{Objective, Program, ProblemSpec, Projector};
pub use runner::{
    igd_run, igd_run_observed, pigd_run, pigd_run_observed, RunOptions, RunOutcome, StepEvent,
};
pub use schedule::{admissible_step, AdmissibleInterval, StepSchedule};
pub use trace::{IterationTrace, Status, TraceRow};
