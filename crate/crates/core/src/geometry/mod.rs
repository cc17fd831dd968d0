//! Eta-geometries: a kernel `eta(y, x)` and a solver for `eta(y, x) = v`.

mod block;
mod bregman;
mod euclidean;
mod inverse;
mod pl;
mod quasar;

pub use block::{block_step, BlockGeometry, BlockMetric};
pub use bregman::{bregman_step, BregmanGeometry, InnerSolve, MirrorMap, NegativeEntropy, SquaredNorm};
pub use euclidean::{euclidean_step, Euclidean};
pub use inverse::{generic_inverse_step, InverseGeometry, InverseSettings, VectorMap};
pub use pl::{pl_eta, pl_step_solve, PlGeometry};
pub use quasar::{quasar_beta_search, quasar_step, QuasarGeometry};

use crate::error::GeometryError;
use crate::point::Point;
use crate::scalar::Real;

pub trait Geometry<T: Real>: Send + Sync {
    fn name(&self) -> &'static str;

    fn eta(&self, y: &Point<T>, x: &Point<T>) -> Result<Point<T>, GeometryError>;

    /// Returns some `y` with `eta(y, x) = v`.
    fn step(&self, x: &Point<T>, v: &Point<T>) -> Result<Point<T>, GeometryError>;

    /// Length of a direction at `x`. Euclidean for every shipped geometry.
    fn norm_at(&self, _x: &Point<T>, v: &Point<T>) -> T {
        v.norm()
    }

    /// Whether `eta(x, x) = 0` holds for this geometry.
    fn eta_vanishes_on_diagonal(&self) -> bool {
        true
    }
}

/// Relative residual used by the numeric step solvers: `||r|| / (1 + ||v||)`.
pub(crate) fn relative_residual<T: Real>(r: T, v: T) -> T {
    r / (T::one() + v)
}
