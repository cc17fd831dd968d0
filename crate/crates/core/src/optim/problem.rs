use std::sync::Arc;

use crate::error::{ProblemError, ShapeError};
use crate::geometry::Geometry;
use crate::point::Point;
use crate::scalar::Real;

/// A differentiable objective.
pub trait Objective<T: Real>: Send + Sync {
    fn value(&self, x: &Point<T>) -> Result<T, ProblemError>;

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, ProblemError>;

    /// Rejects points whose block layout the objective cannot evaluate.
    fn check_shape(&self, _x: &Point<T>) -> Result<(), ShapeError> {
        Ok(())
    }
}

/// Projection onto a feasible set.
pub trait Projector<T: Real>: Send + Sync {
    fn project(&self, y: &Point<T>) -> Result<Point<T>, ProblemError>;

    fn is_feasible(&self, x: &Point<T>, tol: T) -> Result<bool, ProblemError>;
}

/// What the optimizer loops need from a problem.
///
/// `update` returns the unprojected next iterate `y` solving the step
/// equation for the direction `-alpha * grad`. Problems with a nonsmooth
/// regularizer fold its proximal map into this direction, so `value` may
/// include the regularizer while `gradient` covers only the smooth part.
pub trait Program<T: Real>: Send + Sync {
    fn value(&self, x: &Point<T>) -> Result<T, ProblemError>;

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, ProblemError>;

    fn update(&self, x: &Point<T>, grad: &Point<T>, alpha: T) -> Result<Point<T>, ProblemError>;

    fn projector(&self) -> Option<&dyn Projector<T>> {
        None
    }

    fn check_shape(&self, _x: &Point<T>) -> Result<(), ShapeError> {
        Ok(())
    }
}

/// Objective, geometry and optional projector assembled into a program.
#[derive(Clone)]
pub struct ProblemSpec<T: Real> {
    pub objective: Arc<dyn Objective<T>>,
    pub geometry: Arc<dyn Geometry<T>>,
    pub projector: Option<Arc<dyn Projector<T>>>,
}

impl<T: Real> ProblemSpec<T> {
    pub fn new(objective: Arc<dyn Objective<T>>, geometry: Arc<dyn Geometry<T>>) -> Self {
        Self { objective, geometry, projector: None }
    }

    pub fn with_projector(mut self, projector: Arc<dyn Projector<T>>) -> Self {
        self.projector = Some(projector);
        self
    }
}

impl<T: Real> Program<T> for ProblemSpec<T> {
    fn value(&self, x: &Point<T>) -> Result<T, ProblemError> {
        self.objective.value(x)
    }

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, ProblemError> {
        self.objective.gradient(x)
    }

    fn update(&self, x: &Point<T>, grad: &Point<T>, alpha: T) -> Result<Point<T>, ProblemError> {
        Ok(self.geometry.step(x, &grad.scale(-alpha))?)
    }

    fn projector(&self) -> Option<&dyn Projector<T>> {
        self.projector.as_deref()
    }

    fn check_shape(&self, x: &Point<T>) -> Result<(), ShapeError> {
        self.objective.check_shape(x)
    }
}
