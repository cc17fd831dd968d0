//! Smooth test objectives on a single vector block named `x`.

use nalgebra::{DMatrix, DVector};

use crate::error::{ProblemError, ShapeError};
use crate::optim::Objective;
use crate::point::{BlockShape, Point};
use crate::scalar::Real;

fn vector_arg<T: Real>(x: &Point<T>, n: usize) -> Result<&DVector<T>, ShapeError> {
    let v = x.vector("x")?;
    if v.len() != n || x.num_blocks() != 1 {
        return Err(ShapeError::new(format!("x:{}", BlockShape::Vector(n)), format!("{:?}", x.shapes())));
    }
    Ok(v)
}

/// `f(x) = x^T A x / 2 - b^T x` with symmetric `A`.
#[derive(Clone, Debug)]
pub struct Quadratic<T: Real> {
    pub a: DMatrix<T>,
    pub b: DVector<T>,
}

impl<T: Real> Quadratic<T> {
    pub fn new(a: DMatrix<T>, b: DVector<T>) -> Result<Self, ProblemError> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(ShapeError::new(format!("{0}x{0} and {0}", b.len()), format!("{}x{}", a.nrows(), a.ncols())).into());
        }
        if (&a - a.transpose()).norm() > T::lit(1e-12) * T::one().max(a.norm()) {
            return Err(ProblemError::Invalid("quadratic form must be symmetric".into()));
        }
        Ok(Self { a, b })
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self { a: DMatrix::from_diagonal(&DVector::from_column_slice(diag)), b: DVector::zeros(n) }
    }

    pub fn isotropic(n: usize, curvature: T) -> Self {
        Self::diagonal(&vec![curvature; n])
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Largest and smallest eigenvalues of `A`.
    pub fn curvature_bounds(&self) -> Result<(T, T), ProblemError> {
        let vals = T::symmetric_eigenvalues(&self.a)?;
        Ok((vals[vals.len() - 1], vals[0]))
    }

    pub fn minimizer(&self) -> Result<DVector<T>, ProblemError> {
        self.a
            .clone()
            .cholesky()
            .map(|c| c.solve(&self.b))
            .ok_or_else(|| ProblemError::Invalid("quadratic form is not positive definite".into()))
    }

    pub fn min_value(&self) -> Result<T, ProblemError> {
        let xs = self.minimizer()?;
        Ok(-self.b.dot(&xs) * T::lit(0.5))
    }
}

impl<T: Real> Objective<T> for Quadratic<T> {
    fn value(&self, x: &Point<T>) -> Result<T, ProblemError> {
        let v = vector_arg(x, self.dim())?;
        Ok((&self.a * v).dot(v) * T::lit(0.5) - self.b.dot(v))
    }

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, ProblemError> {
        let v = vector_arg(x, self.dim())?;
        Ok(Point::from_vector(&self.a * v - &self.b))
    }

    fn check_shape(&self, x: &Point<T>) -> Result<(), ShapeError> {
        vector_arg(x, self.dim()).map(|_| ())
    }
}

/// `f(x) = sum_i x_i^2 + 3 sin^2 x_i`: nonconvex, invex, global minimum 0 at
/// the origin and 8-smooth.
#[derive(Clone, Copy, Debug)]
pub struct SineBowl {
    pub dim: usize,
}

impl SineBowl {
    pub const SMOOTHNESS: f64 = 8.0;
}

impl<T: Real> Objective<T> for SineBowl {
    fn value(&self, x: &Point<T>) -> Result<T, ProblemError> {
        let v = vector_arg(x, self.dim)?;
        let three = T::lit(3.0);
        Ok(v.iter().fold(T::zero(), |acc, &t| {
            let s = t.sin();
            acc + t * t + three * s * s
        }))
    }

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, ProblemError> {
        let v = vector_arg(x, self.dim)?;
        let (two, three) = (T::lit(2.0), T::lit(3.0));
        Ok(Point::from_vector(v.map(|t| two * t + three * (two * t).sin())))
    }

    fn check_shape(&self, x: &Point<T>) -> Result<(), ShapeError> {
        vector_arg(x, self.dim).map(|_| ())
    }
}
