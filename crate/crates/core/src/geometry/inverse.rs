use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{relative_residual, Geometry};
use crate::error::GeometryError;
use crate::point::Point;
use crate::scalar::Real;

pub type VectorMap<T> = Arc<dyn Fn(&DVector<T>) -> Result<DVector<T>, GeometryError> + Send + Sync>;
type PairMap<T> = Arc<dyn Fn(&DVector<T>, &DVector<T>) -> Result<DVector<T>, GeometryError> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseSettings {
    /// Accept once `||g(y) - v|| <= tol * (1 + ||v||)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Step shrink factor applied while the residual fails to decrease.
    pub damping: f64,
    pub max_backtracks: usize,
}

impl Default for InverseSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, damping: 0.5, max_backtracks: 40 }
    }
}

/// Solves `g(y) = v` by damped Newton iteration with a central-difference
/// Jacobian, starting from `y0`. Any solution is accepted.
pub fn generic_inverse_step<T: Real>(
    g: &dyn Fn(&DVector<T>) -> Result<DVector<T>, GeometryError>,
    v: &DVector<T>,
    y0: &DVector<T>,
    settings: InverseSettings,
) -> Result<DVector<T>, GeometryError> {
    let n = y0.len();
    let vnorm = v.norm();
    let tol = T::lit(settings.tol);
    let mut y = y0.clone();
    let mut r = g(&y)? - v;
    if r.len() != v.len() {
        return Err(crate::error::ShapeError::new(format!("{} outputs", v.len()), format!("{} outputs", r.len())).into());
    }
    let mut rn = r.norm();
    let h_base = T::eps().powf(T::lit(1.0 / 3.0));
    for _ in 0..settings.max_iter {
        if relative_residual(rn, vnorm) <= tol {
            return Ok(y);
        }
        let mut jac = DMatrix::<T>::zeros(v.len(), n);
        for j in 0..n {
            let h = h_base * T::one().max(y[j].abs());
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += h;
            ym[j] -= h;
            let col = (g(&yp)? - g(&ym)?) / (h + h);
            jac.set_column(j, &col);
        }
        let rhs = -&r;
        let delta = match (v.len() == n).then(|| jac.clone().lu().solve(&rhs)).flatten() {
            Some(d) if d.iter().all(|x| x.is_finite_value()) => d,
            _ => jac.svd(true, true).solve(&rhs, T::eps()).map_err(|_| GeometryError::StepSolveFailed {
                iterations: 0,
                residual: rn.as_f64(),
            })?,
        };
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..settings.max_backtracks {
            let trial = &y + &delta * t;
            if let Ok(gt) = g(&trial) {
                let rt = gt - v;
                let rtn = rt.norm();
                if rtn.is_finite_value() && rtn < rn {
                    y = trial;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
            }
            t *= T::lit(settings.damping);
        }
        if !accepted {
            break;
        }
    }
    if relative_residual(rn, vnorm) <= tol {
        Ok(y)
    } else {
        Err(GeometryError::StepSolveFailed { iterations: settings.max_iter, residual: relative_residual(rn, vnorm).as_f64() })
    }
}

/// Geometry given by an arbitrary kernel on flattened points. Steps use the
/// closed-form inverse when one is supplied and the numeric solver otherwise.
#[derive(Clone)]
pub struct InverseGeometry<T: Real> {
    eta: PairMap<T>,
    inverse: Option<PairMap<T>>,
    pub settings: InverseSettings,
}

impl<T: Real> InverseGeometry<T> {
    /// `eta(y, x)` on flattened vectors.
    pub fn new(eta: impl Fn(&DVector<T>, &DVector<T>) -> Result<DVector<T>, GeometryError> + Send + Sync + 'static) -> Self {
        Self { eta: Arc::new(eta), inverse: None, settings: InverseSettings::default() }
    }

    /// Closed-form `y = inverse(x, v)`.
    pub fn with_inverse(
        mut self,
        inverse: impl Fn(&DVector<T>, &DVector<T>) -> Result<DVector<T>, GeometryError> + Send + Sync + 'static,
    ) -> Self {
        self.inverse = Some(Arc::new(inverse));
        self
    }
}

impl<T: Real> Geometry<T> for InverseGeometry<T> {
    fn name(&self) -> &'static str {
        "generic_inverse"
    }

    fn eta(&self, y: &Point<T>, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        x.check_congruent(y)?;
        let e = (self.eta)(&y.flatten(), &x.flatten())?;
        Ok(x.unflatten(&e)?)
    }

    fn step(&self, x: &Point<T>, v: &Point<T>) -> Result<Point<T>, GeometryError> {
        x.check_congruent(v)?;
        let xf = x.flatten();
        let vf = v.flatten();
        let y = match &self.inverse {
            Some(inv) => inv(&xf, &vf)?,
            None => generic_inverse_step(&|y: &DVector<T>| (self.eta)(y, &xf), &vf, &xf, self.settings)?,
        };
        Ok(x.unflatten(&y)?)
    }

    fn eta_vanishes_on_diagonal(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_solve(g: impl Fn(f64) -> f64 + 'static, v: f64, y0: f64) -> f64 {
        let map = move |y: &DVector<f64>| Ok(DVector::from_element(1, g(y[0])));
        generic_inverse_step(&map, &DVector::from_element(1, v), &DVector::from_element(1, y0), InverseSettings::default())
            .unwrap()[0]
    }

    #[test]
    fn linear_and_identity() {
        assert!((scalar_solve(|y| 2.0 * y, 6.0, 0.0) - 3.0).abs() < 1e-8);
        let v = DVector::from_vec(vec![0.3, -2.0, 5.0]);
        let id = |y: &DVector<f64>| Ok(y.clone());
        let y = generic_inverse_step(&id, &v, &DVector::zeros(3), InverseSettings::default()).unwrap();
        assert!((y - v).norm() < 1e-8);
    }

    #[test]
    fn monotone_cubic_matches_bisection() {
        let g = |y: f64| y * y * y + y;
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 2.0 { lo = mid } else { hi = mid }
        }
        let y = scalar_solve(g, 2.0, 0.0);
        assert!((y - 0.5 * (lo + hi)).abs() < 1e-8);
        assert!((y - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unreachable_target_fails() {
        let map = |y: &DVector<f64>| Ok(y.map(|t| t * t));
        let err = generic_inverse_step(&map, &DVector::from_element(1, -1.0), &DVector::from_element(1, 1.0), InverseSettings::default());
        assert!(matches!(err, Err(GeometryError::StepSolveFailed { .. })));
    }

    #[test]
    fn geometry_round_trip() {
        let geo = InverseGeometry::new(|y: &DVector<f64>, x: &DVector<f64>| Ok(y.map(|t| t * t * t + t) - x.map(|t| t * t * t + t)));
        let x = Point::from_slice(&[0.5, -1.0]);
        let v = Point::from_slice(&[1.0, 2.0]);
        let y = geo.step(&x, &v).unwrap();
        let back = geo.eta(&y, &x).unwrap();
        assert!(back.sub(&v).unwrap().norm() <= 1e-8 * (1.0 + v.norm()));
    }
}
