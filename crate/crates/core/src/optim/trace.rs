use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    Diverged,
    StepSolveFailed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Diverged => "diverged",
            Status::StepSolveFailed => "step_solve_failed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow<T: Real> {
    pub iter: usize,
    pub objective: T,
    pub grad_norm: T,
    pub step_norm: T,
    pub elapsed_ms: f64,
}

/// Per-iteration record of a run. Row 0 describes the starting point.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace<T: Real> {
    pub rows: Vec<TraceRow<T>>,
    pub status: Status,
    /// Why the run stopped early, for `diverged` and `step_solve_failed`.
    pub message: Option<String>,
    /// Iteration whose step could not be completed.
    pub failed_iteration: Option<usize>,
}

impl<T: Real> IterationTrace<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> &TraceRow<T> {
        self.rows.last().expect("traces always hold the starting row")
    }

    pub fn final_objective(&self) -> T {
        self.last().objective
    }

    pub fn objectives(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    /// First iteration whose objective is at or below `threshold`.
    pub fn iterations_to(&self, threshold: T) -> Option<usize> {
        self.rows.iter().find(|r| r.objective <= threshold).map(|r| r.iter)
    }

    pub fn succeeded(&self) -> bool {
        matches!(self.status, Status::Converged)
    }
}
