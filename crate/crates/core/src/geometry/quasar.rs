use super::Geometry;
use crate::error::GeometryError;
use crate::optim::Objective;
use crate::point::Point;
use crate::scalar::Real;

const BISECTION_STEPS: usize = 60;
const SLACK: f64 = 1e-10;

/// `y = x + nu (1 - beta) / beta * v`.
pub fn quasar_step<T: Real>(x: &Point<T>, v: &Point<T>, nu: T, beta: T) -> Result<Point<T>, GeometryError> {
    check_params(nu, beta)?;
    let mut y = x.clone();
    y.axpy(nu * (T::one() - beta) / beta, v)?;
    Ok(y)
}

fn check_params<T: Real>(nu: T, beta: T) -> Result<(), GeometryError> {
    if !(nu > T::zero() && nu.is_finite_value()) {
        return Err(GeometryError::Precondition(format!("nu must be positive, got {nu}")));
    }
    if !(beta > T::zero() && beta <= T::one()) {
        return Err(GeometryError::Precondition(format!("beta must lie in (0, 1], got {beta}")));
    }
    Ok(())
}

/// Largest `beta` in `(0, 1]` with
/// `beta grad f(x)^T (y - (x - beta y)/(1 - beta)) <= nu (f(y) - f(x)) + 1e-10`.
///
/// The left side simplifies to `beta/(1-beta) g` with `g = grad f(x)^T (y - x)`,
/// so a descent pair (`g < 0`) admits `beta = 1` and an ascent pair is
/// bisected.
pub fn quasar_beta_search<T: Real>(
    f: &dyn Objective<T>,
    x: &Point<T>,
    y: &Point<T>,
    nu: T,
) -> Result<T, GeometryError> {
    if !(nu > T::zero()) {
        return Err(GeometryError::Precondition(format!("nu must be positive, got {nu}")));
    }
    let oracle = |e: crate::error::ProblemError| GeometryError::Oracle(e.to_string());
    let grad = f.gradient(x).map_err(oracle)?;
    let g = grad.dot(&y.sub(x)?)?;
    let rhs = nu * (f.value(y).map_err(oracle)? - f.value(x).map_err(oracle)?) + T::lit(SLACK);
    let admissible = |beta: T| -> bool {
        if beta >= T::one() {
            return g < T::zero() || (g == T::zero() && rhs >= T::zero());
        }
        // Evaluated in the original form so callers re-checking the
        // inequality see the same rounding.
        let mut w = x.scale(-T::one() / (T::one() - beta));
        if w.axpy(T::one() + beta / (T::one() - beta), y).is_err() {
            return false;
        }
        match grad.dot(&w) {
            Ok(lhs) => beta * lhs <= rhs,
            Err(_) => false,
        }
    };
    if admissible(T::one()) {
        return Ok(T::one());
    }
    if g <= T::zero() || rhs <= T::zero() {
        return Err(GeometryError::Precondition("no admissible beta in (0, 1]".into()));
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..BISECTION_STEPS {
        let mid = (lo + hi) * T::lit(0.5);
        if admissible(mid) { lo = mid } else { hi = mid }
    }
    // Back off slightly so a re-evaluation with different rounding still
    // finds the inequality satisfied.
    let lo = lo * (T::one() - T::lit(1e-9).max(T::eps() * T::lit(64.0)));
    if lo > T::zero() && admissible(lo) {
        Ok(lo)
    } else {
        Err(GeometryError::Precondition("no admissible beta in (0, 1]".into()))
    }
}

/// `eta(y, x) = beta / (nu (1 - beta)) (y - x)` with a fixed `beta`.
///
/// `beta` is attached to the geometry rather than recomputed at every step:
/// for a descent direction the search always accepts `beta = 1`, whose
/// step is zero.
#[derive(Clone, Copy, Debug)]
pub struct QuasarGeometry<T: Real> {
    pub nu: T,
    pub beta: T,
}

impl<T: Real> QuasarGeometry<T> {
    pub fn new(nu: T, beta: T) -> Result<Self, GeometryError> {
        check_params(nu, beta)?;
        Ok(Self { nu, beta })
    }

    /// Uses the searched `beta` for the pair, falling back to `beta = 1`.
    pub fn from_search(f: &dyn Objective<T>, x: &Point<T>, y: &Point<T>, nu: T) -> Result<Self, GeometryError> {
        let beta = quasar_beta_search(f, x, y, nu).unwrap_or(T::one());
        Self::new(nu, beta)
    }
}

impl<T: Real> Geometry<T> for QuasarGeometry<T> {
    fn name(&self) -> &'static str {
        "quasar"
    }

    fn eta(&self, y: &Point<T>, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        let d = y.sub(x)?;
        if self.beta >= T::one() {
            return if d.norm() == T::zero() {
                Ok(d)
            } else {
                Err(GeometryError::Precondition("eta is unbounded at beta = 1 for y != x".into()))
            };
        }
        Ok(d.scale(self.beta / (self.nu * (T::one() - self.beta))))
    }

    fn step(&self, x: &Point<T>, v: &Point<T>) -> Result<Point<T>, GeometryError> {
        quasar_step(x, v, self.nu, self.beta)
    }
}
