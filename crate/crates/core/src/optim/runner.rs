use std::time::Instant;

use super::problem::Program;
use super::schedule::StepSchedule;
use super::trace::{IterationTrace, Status, TraceRow};
use crate::error::RunError;
use crate::point::Point;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions<T: Real> {
    pub max_iter: usize,
    pub grad_tol: T,
    /// Objectives above this value (or non-finite) end the run as diverged.
    pub divergence_threshold: T,
    /// Optional early stop once the objective reaches this value.
    pub objective_target: Option<T>,
    /// Tolerance for the feasibility audit of projected iterates.
    pub feasibility_tol: T,
    /// Re-check every projected iterate with the projector's own test.
    pub audit_feasibility: bool,
}

impl<T: Real> Default for RunOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            grad_tol: T::lit(1e-8),
            divergence_threshold: T::lit(1e12),
            objective_target: None,
            feasibility_tol: T::lit(1e-8),
            audit_feasibility: true,
        }
    }
}

impl<T: Real> RunOptions<T> {
    pub fn new(max_iter: usize, grad_tol: T) -> Self {
        Self { max_iter, grad_tol, ..Self::default() }
    }

    pub fn with_target(mut self, target: T) -> Self {
        self.objective_target = Some(target);
        self
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome<T: Real> {
    pub trace: IterationTrace<T>,
    /// Last accepted iterate.
    pub point: Point<T>,
}

/// Passed to observers after every accepted step.
pub struct StepEvent<'a, T: Real> {
    pub iter: usize,
    pub prev: &'a Point<T>,
    /// Step-equation solution before projection.
    pub unprojected: &'a Point<T>,
    pub next: &'a Point<T>,
}

/// Invex gradient descent: `x_{k+1}` solves `eta(x_{k+1}, x_k) = -alpha grad f(x_k)`.
pub fn igd_run<T: Real, P: Program<T> + ?Sized>(
    problem: &P,
    x0: &Point<T>,
    schedule: &StepSchedule<T>,
    options: &RunOptions<T>,
) -> Result<RunOutcome<T>, RunError> {
    run(problem, x0, schedule, options, false, &mut |_: &StepEvent<'_, T>| {})
}

pub fn igd_run_observed<T: Real, P: Program<T> + ?Sized>(
    problem: &P,
    x0: &Point<T>,
    schedule: &StepSchedule<T>,
    options: &RunOptions<T>,
    observer: &mut dyn FnMut(&StepEvent<'_, T>),
) -> Result<RunOutcome<T>, RunError> {
    run(problem, x0, schedule, options, false, observer)
}

/// Projected invex gradient descent: the step-equation solution is passed
/// through the problem's projector.
///
/// Besides the gradient test, a run also counts as converged once the
/// projected step stalls, `||x_{k+1} - x_k|| <= grad_tol * alpha` with
/// `alpha > 0`, since on a constrained problem the gradient need not vanish
/// at the solution. That final null step is not recorded.
pub fn pigd_run<T: Real, P: Program<T> + ?Sized>(
    problem: &P,
    x0: &Point<T>,
    schedule: &StepSchedule<T>,
    options: &RunOptions<T>,
) -> Result<RunOutcome<T>, RunError> {
    run(problem, x0, schedule, options, true, &mut |_: &StepEvent<'_, T>| {})
}

pub fn pigd_run_observed<T: Real, P: Program<T> + ?Sized>(
    problem: &P,
    x0: &Point<T>,
    schedule: &StepSchedule<T>,
    options: &RunOptions<T>,
    observer: &mut dyn FnMut(&StepEvent<'_, T>),
) -> Result<RunOutcome<T>, RunError> {
    run(problem, x0, schedule, options, true, observer)
}

fn finite_or_inf<T: Real>(v: T) -> T {
    if v.is_finite_value() { v } else { T::infinity() }
}

fn run<T: Real, P: Program<T> + ?Sized>(
    problem: &P,
    x0: &Point<T>,
    schedule: &StepSchedule<T>,
    options: &RunOptions<T>,
    projected: bool,
    observer: &mut dyn FnMut(&StepEvent<'_, T>),
) -> Result<RunOutcome<T>, RunError> {
    problem.check_shape(x0)?;
    if !x0.is_finite() {
        return Err(RunError::NonFiniteStart);
    }
    let projector = if projected {
        let p = problem.projector().ok_or(RunError::MissingProjector)?;
        match p.is_feasible(x0, options.feasibility_tol) {
            Ok(true) => Some(p),
            _ => return Err(RunError::InfeasibleStart),
        }
    } else {
        None
    };
    let alpha = schedule.alpha();
    let start = Instant::now();
    let elapsed = || start.elapsed().as_secs_f64() * 1e3;
    let diverged = |f: T| !f.is_finite_value() || f > options.divergence_threshold;

    let mut trace = IterationTrace { rows: Vec::new(), status: Status::MaxIter, message: None, failed_iteration: None };
    let mut x = x0.clone();
    let (mut f, mut g) = match evaluate(problem, &x) {
        Ok(fg) => fg,
        Err(msg) => {
            trace.rows.push(TraceRow { iter: 0, objective: T::infinity(), grad_norm: T::infinity(), step_norm: T::zero(), elapsed_ms: elapsed() });
            trace.status = Status::Diverged;
            trace.message = Some(msg);
            return Ok(RunOutcome { trace, point: x });
        }
    };
    let mut grad_norm = finite_or_inf(g.norm());
    trace.rows.push(TraceRow { iter: 0, objective: finite_or_inf(f), grad_norm, step_norm: T::zero(), elapsed_ms: elapsed() });
    if diverged(f) {
        trace.status = Status::Diverged;
        return Ok(RunOutcome { trace, point: x });
    }

    for k in 0..options.max_iter {
        if grad_norm <= options.grad_tol || options.objective_target.is_some_and(|t| f <= t) {
            trace.status = Status::Converged;
            return Ok(RunOutcome { trace, point: x });
        }
        let iter = k + 1;
        let y = match problem.update(&x, &g, alpha) {
            Ok(y) => y,
            Err(e) => return Ok(fail(trace, x, iter, e.to_string())),
        };
        let next = match projector {
            Some(p) => match p.project(&y) {
                Ok(z) => z,
                Err(e) => return Ok(fail(trace, x, iter, format!("projection failed: {e}"))),
            },
            None => y.clone(),
        };
        if !next.is_finite() {
            trace.rows.push(TraceRow { iter, objective: T::infinity(), grad_norm: T::infinity(), step_norm: T::infinity(), elapsed_ms: elapsed() });
            trace.status = Status::Diverged;
            trace.message = Some("iterate became non-finite".into());
            return Ok(RunOutcome { trace, point: x });
        }
        if let Some(p) = projector.filter(|_| options.audit_feasibility) {
            if !matches!(p.is_feasible(&next, options.feasibility_tol), Ok(true)) {
                return Ok(fail(trace, x, iter, "projection returned an infeasible point".into()));
            }
        }
        let step_norm = next.sub(&x).map(|d| d.norm()).unwrap_or_else(|_| T::infinity());
        if projected && alpha > T::zero() && step_norm <= options.grad_tol * alpha {
            trace.status = Status::Converged;
            return Ok(RunOutcome { trace, point: x });
        }
        let (nf, ng) = match evaluate(problem, &next) {
            Ok(fg) => fg,
            Err(msg) => {
                trace.rows.push(TraceRow { iter, objective: T::infinity(), grad_norm: T::infinity(), step_norm: finite_or_inf(step_norm), elapsed_ms: elapsed() });
                trace.status = Status::Diverged;
                trace.message = Some(msg);
                return Ok(RunOutcome { trace, point: next });
            }
        };
        grad_norm = finite_or_inf(ng.norm());
        trace.rows.push(TraceRow { iter, objective: finite_or_inf(nf), grad_norm, step_norm: finite_or_inf(step_norm), elapsed_ms: elapsed() });
        observer(&StepEvent { iter, prev: &x, unprojected: &y, next: &next });
        x = next;
        f = nf;
        g = ng;
        if diverged(f) {
            trace.status = Status::Diverged;
            return Ok(RunOutcome { trace, point: x });
        }
    }
    trace.status = if grad_norm <= options.grad_tol || options.objective_target.is_some_and(|t| f <= t) {
        Status::Converged
    } else {
        Status::MaxIter
    };
    Ok(RunOutcome { trace, point: x })
}

fn evaluate<T: Real, P: Program<T> + ?Sized>(problem: &P, x: &Point<T>) -> Result<(T, Point<T>), String> {
    let f = problem.value(x).map_err(|e| e.to_string())?;
    let g = problem.gradient(x).map_err(|e| e.to_string())?;
    Ok((f, g))
}

fn fail<T: Real>(mut trace: IterationTrace<T>, x: Point<T>, iter: usize, message: String) -> RunOutcome<T> {
    trace.status = Status::StepSolveFailed;
    trace.failed_iteration = Some(iter);
    trace.message = Some(message);
    RunOutcome { trace, point: x }
}
