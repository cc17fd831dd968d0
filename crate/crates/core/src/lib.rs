//! Invex gradient descent and projected invex gradient descent.
//!
//! The optimizer loops in [`optim`] are written against a pluggable
//! [`Geometry`]: a kernel `eta(y, x)` together with a solver for the step
//! equation `eta(y, x) = v`. Euclidean geometry recovers plain gradient
//! descent. The [`problems`] module ships three applications with their own
//! geometries (log-determinant acyclicity, fair sparse regression and mixed
//! linear regression), and [`verify`] provides sampled probes for the
//! assumptions the convergence theory relies on.
//!
//! Everything is generic over the scalar type through [`Real`]; the `*64`
//! aliases below fix it to `f64`.

pub mod error;
pub mod geometry;
pub mod kernels;
pub mod optim;
pub mod point;
pub mod problems;
pub mod scalar;
pub mod verify;

pub use error::{GeometryError, KernelError, ProblemError, RunError, ShapeError, VerifyError};
pub use geometry::Geometry;
pub use optim::{
    admissible_step, igd_run, pigd_run, IterationTrace, Objective, Program, ProblemSpec, Projector,
    RunOptions, RunOutcome, Status, StepSchedule,
};
pub use point::{Block, BlockShape, Point};
pub use scalar::Real;

pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;
pub type Trace64 = IterationTrace<f64>;
pub type Schedule64 = StepSchedule<f64>;
pub type RunOptions64 = RunOptions<f64>;
pub type ProblemSpec64 = ProblemSpec<f64>;
pub type DagProblem64 = problems::dag::DagProblem<f64>;
pub type FairLasso64 = problems::fair::FairLassoInstance<f64>;
pub type Mlr64 = problems::mlr::MlrInstance<f64>;
