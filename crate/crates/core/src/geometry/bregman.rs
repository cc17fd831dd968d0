use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{relative_residual, Geometry};
use crate::error::GeometryError;
use crate::point::Point;
use crate::scalar::Real;

/// Strongly convex, differentiable mirror map `psi`.
pub trait MirrorMap<T: Real>: Send + Sync {
    fn value(&self, x: &Point<T>) -> Result<T, GeometryError>;

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, GeometryError>;

    /// Closed-form solution of `grad psi(y) = theta`, when known.
    fn inverse_gradient(&self, _theta: &Point<T>) -> Option<Result<Point<T>, GeometryError>> {
        None
    }
}

/// `psi(x) = ||x||^2 / 2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SquaredNorm;

impl<T: Real> MirrorMap<T> for SquaredNorm {
    fn value(&self, x: &Point<T>) -> Result<T, GeometryError> {
        Ok(x.norm_squared() * T::lit(0.5))
    }

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        Ok(x.clone())
    }

    fn inverse_gradient(&self, theta: &Point<T>) -> Option<Result<Point<T>, GeometryError>> {
        Some(Ok(theta.clone()))
    }
}

/// `psi(x) = sum x_i ln x_i` on the positive orthant.
#[derive(Clone, Copy, Debug, Default)]
pub struct NegativeEntropy;

fn check_positive<T: Real>(x: &Point<T>) -> Result<(), GeometryError> {
    if x.flatten().iter().all(|&t| t > T::zero()) {
        Ok(())
    } else {
        Err(GeometryError::Precondition("negative entropy needs strictly positive entries".into()))
    }
}

impl<T: Real> MirrorMap<T> for NegativeEntropy {
    fn value(&self, x: &Point<T>) -> Result<T, GeometryError> {
        check_positive(x)?;
        Ok(x.flatten().iter().fold(T::zero(), |acc, &t| acc + t * t.ln()))
    }

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        check_positive(x)?;
        Ok(x.map(|t| T::one() + t.ln()))
    }

    fn inverse_gradient(&self, theta: &Point<T>) -> Option<Result<Point<T>, GeometryError>> {
        Some(Ok(theta.map(|t| (t - T::one()).exp())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerSolve {
    /// Accept once `||grad psi(y) - theta|| <= tol * (1 + ||v||)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Use closed-form inverses when the mirror map provides one.
    pub closed_form: bool,
}

impl Default for InnerSolve {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, closed_form: true }
    }
}

/// Minimizes `psi(u) - <theta, u>` by Newton's method with a finite-difference
/// Hessian and Armijo backtracking, starting from `x`.
fn solve_mirror<T: Real>(
    psi: &dyn MirrorMap<T>,
    x: &Point<T>,
    theta: &Point<T>,
    vnorm: T,
    inner: InnerSolve,
) -> Result<Point<T>, GeometryError> {
    let phi = |u: &Point<T>| -> Option<T> {
        let v = psi.value(u).ok()? - theta.dot(u).ok()?;
        v.is_finite_value().then_some(v)
    };
    let tol = T::lit(inner.tol);
    let n = x.dim();
    let mut u = x.clone();
    let mut fu = phi(&u).ok_or_else(|| GeometryError::Precondition("start outside the mirror map domain".into()))?;
    let h_base = T::eps().powf(T::lit(1.0 / 3.0));
    let mut res = T::infinity();
    for _ in 0..inner.max_iter {
        let grad = psi.gradient(&u)?.sub(theta)?;
        res = grad.norm();
        if relative_residual(res, vnorm) <= tol {
            return Ok(u);
        }
        let uf = u.flatten();
        let mut hess = DMatrix::<T>::zeros(n, n);
        for j in 0..n {
            let h = h_base * uf[j].abs().max(h_base);
            let mut up = uf.clone();
            let mut um = uf.clone();
            up[j] += h;
            um[j] -= h;
            let gp = psi.gradient(&u.unflatten(&up)?).map(|g| g.flatten());
            let gm = psi.gradient(&u.unflatten(&um)?).map(|g| g.flatten());
            let col = match (gp, gm) {
                (Ok(gp), Ok(gm)) => (gp - gm) / (h + h),
                (Ok(gp), Err(_)) => (gp - psi.gradient(&u)?.flatten()) / h,
                _ => return Err(GeometryError::Precondition("finite difference left the domain".into())),
            };
            hess.set_column(j, &col);
        }
        let hess = (&hess + hess.transpose()) * T::lit(0.5);
        let g = grad.flatten();
        let dir: DVector<T> = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -&g,
        };
        let slope = g.dot(&dir);
        let mut t = T::one();
        let mut moved = false;
        for _ in 0..60 {
            let trial = u.unflatten(&(&uf + &dir * t))?;
            if let Some(ft) = phi(&trial) {
                if ft <= fu + T::lit(1e-4) * t * slope || (ft - fu).abs() <= T::eps() * fu.abs() {
                    u = trial;
                    fu = ft;
                    moved = true;
                    break;
                }
            }
            t *= T::lit(0.5);
        }
        if !moved {
            break;
        }
    }
    let grad = psi.gradient(&u)?.sub(theta)?;
    res = res.min(grad.norm());
    if relative_residual(grad.norm(), vnorm) <= tol {
        Ok(u)
    } else {
        Err(GeometryError::StepSolveFailed { iterations: inner.max_iter, residual: relative_residual(res, vnorm).as_f64() })
    }
}

/// Mirror descent step `argmin_u B_psi(u, x) + alpha <grad, u - x>`, i.e. the
/// solution of `grad psi(y) = grad psi(x) - alpha grad`.
pub fn bregman_step<T: Real>(
    psi: &dyn MirrorMap<T>,
    x: &Point<T>,
    grad: &Point<T>,
    alpha: T,
    inner: InnerSolve,
) -> Result<Point<T>, GeometryError> {
    mirror_step(psi, x, &grad.scale(-alpha), inner)
}

fn mirror_step<T: Real>(
    psi: &dyn MirrorMap<T>,
    x: &Point<T>,
    v: &Point<T>,
    inner: InnerSolve,
) -> Result<Point<T>, GeometryError> {
    x.check_congruent(v)?;
    let theta = psi.gradient(x)?.add(v)?;
    if inner.closed_form {
        if let Some(y) = psi.inverse_gradient(&theta) {
            return y;
        }
    }
    solve_mirror(psi, x, &theta, v.norm(), inner)
}

/// `eta(y, x) = grad psi(y) - grad psi(x)`.
#[derive(Clone)]
pub struct BregmanGeometry<T: Real> {
    psi: Arc<dyn MirrorMap<T>>,
    pub inner: InnerSolve,
}

impl<T: Real> BregmanGeometry<T> {
    pub fn new(psi: Arc<dyn MirrorMap<T>>) -> Self {
        Self { psi, inner: InnerSolve::default() }
    }

    pub fn with_inner(mut self, inner: InnerSolve) -> Self {
        self.inner = inner;
        self
    }

    pub fn mirror_map(&self) -> &dyn MirrorMap<T> {
        self.psi.as_ref()
    }
}

impl<T: Real> Geometry<T> for BregmanGeometry<T> {
    fn name(&self) -> &'static str {
        "bregman"
    }

    fn eta(&self, y: &Point<T>, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        Ok(self.psi.gradient(y)?.sub(&self.psi.gradient(x)?)?)
    }

    fn step(&self, x: &Point<T>, v: &Point<T>) -> Result<Point<T>, GeometryError> {
        mirror_step(self.psi.as_ref(), x, v, self.inner)
    }
}
