use std::sync::Arc;

use super::inverse::{generic_inverse_step, InverseSettings};
use super::{relative_residual, Geometry};
use crate::error::GeometryError;
use crate::optim::Objective;
use crate::point::Point;
use crate::scalar::Real;

const FIXED_POINT_ITERS: usize = 500;
const STEP_TOL: f64 = 1e-10;

/// Kernel for an `L`-smooth function satisfying the PL inequality with
/// constant `mu`:
///
/// `eta(y, x) = -(1/mu) (grad f(y) + L ||y - x|| / ||grad f(x)|| grad f(x))`.
///
/// The leading minus sign is what makes `f(y) - f(x) >= <eta(y, x), grad f(x)>`
/// hold; with a plus sign the inequality already fails at `y = x*`. Note that
/// `eta(x, x) = -(1/mu) grad f(x)` is nonzero away from stationary points.
#[derive(Clone)]
pub struct PlGeometry<T: Real> {
    pub mu: T,
    pub l: T,
    objective: Arc<dyn Objective<T>>,
}

impl<T: Real> PlGeometry<T> {
    pub fn new(mu: T, l: T, objective: Arc<dyn Objective<T>>) -> Result<Self, GeometryError> {
        if !(mu > T::zero() && l > T::zero() && mu.is_finite_value() && l.is_finite_value()) {
            return Err(GeometryError::Precondition(format!("PL constants must be positive, got mu={mu}, L={l}")));
        }
        Ok(Self { mu, l, objective })
    }

    fn grad(&self, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        self.objective.gradient(x).map_err(|e| GeometryError::Oracle(e.to_string()))
    }
}

/// The PL kernel for a given gradient oracle. At a stationary `x` the
/// normalized term is taken to be zero.
pub fn pl_eta<T: Real>(
    grad: &dyn Fn(&Point<T>) -> Result<Point<T>, GeometryError>,
    mu: T,
    l: T,
    y: &Point<T>,
    x: &Point<T>,
) -> Result<Point<T>, GeometryError> {
    let gy = grad(y)?;
    let gx = grad(x)?;
    let gxn = gx.norm();
    let mut out = gy;
    if gxn > T::zero() {
        let dist = y.sub(x)?.norm();
        out.axpy(l * dist / gxn, &gx)?;
    }
    Ok(out.scale(-T::one() / mu))
}

/// Solves `eta(y, x) = v` for the PL kernel.
///
/// Runs the damped fixed point `y <- y + s (eta(y, x) - v)` with
/// `s = mu / (2L)` from `y = x`; the update sign matches the kernel's
/// orientation, so the map contracts where the kernel is locally invertible.
/// Near the boundary of the kernel's range the contraction factor tends to
/// one, so an unconverged iterate is refined by damped Newton iteration
/// before giving up.
pub fn pl_step_solve<T: Real>(
    grad: &dyn Fn(&Point<T>) -> Result<Point<T>, GeometryError>,
    mu: T,
    l: T,
    x: &Point<T>,
    v: &Point<T>,
) -> Result<Point<T>, GeometryError> {
    x.check_congruent(v)?;
    let tol = T::lit(STEP_TOL);
    let vn = v.norm();
    let s = mu / (l + l);
    let mut y = x.clone();
    for _ in 0..FIXED_POINT_ITERS {
        let r = pl_eta(grad, mu, l, &y, x)?.sub(v)?;
        if relative_residual(r.norm(), vn) <= tol {
            return Ok(y);
        }
        y.axpy(s, &r)?;
        if !y.is_finite() {
            break;
        }
    }
    let start = if y.is_finite() { y.flatten() } else { x.flatten() };
    let map = |yf: &nalgebra::DVector<T>| -> Result<nalgebra::DVector<T>, GeometryError> {
        let yp = x.unflatten(yf)?;
        Ok(pl_eta(grad, mu, l, &yp, x)?.flatten())
    };
    let settings = InverseSettings { max_iter: FIXED_POINT_ITERS, ..InverseSettings::default() };
    let yf = generic_inverse_step(&map, &v.flatten(), &start, settings)?;
    Ok(x.unflatten(&yf)?)
}

impl<T: Real> Geometry<T> for PlGeometry<T> {
    fn name(&self) -> &'static str {
        "pl"
    }

    fn eta(&self, y: &Point<T>, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        pl_eta(&|p: &Point<T>| self.grad(p), self.mu, self.l, y, x)
    }

    fn step(&self, x: &Point<T>, v: &Point<T>) -> Result<Point<T>, GeometryError> {
        pl_step_solve(&|p: &Point<T>| self.grad(p), self.mu, self.l, x, v)
    }

    fn eta_vanishes_on_diagonal(&self) -> bool {
        false
    }
}
