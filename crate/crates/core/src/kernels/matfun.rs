use nalgebra::DMatrix;

use super::{require_square, spectral_radius};
use crate::error::KernelError;
use crate::scalar::Real;

/// `matlog_near_identity` refuses inputs with `r(I - M) >= 1 - margin`.
pub const MATLOG_DOMAIN_MARGIN: f64 = 1e-6;
const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 200_000;

/// Logarithm of `M = I - A` with `r(A) < 1` via `log(I - A) = -sum A^k / k`.
///
/// The series is cut once a term's Frobenius norm drops below `1e-14`
/// relative to the partial sum (or `1e-14` absolute for tiny sums).
pub fn matlog_near_identity<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>, KernelError> {
    let n = require_square(m)?;
    let a = DMatrix::<T>::identity(n, n) - m;
    let radius = spectral_radius(&a)?;
    let limit = T::one() - T::lit(MATLOG_DOMAIN_MARGIN);
    if !(radius < limit) {
        return Err(KernelError::Domain { radius: radius.as_f64(), limit: limit.as_f64() });
    }
    let tol = T::lit(SERIES_TOL).max(T::eps());
    let mut sum = DMatrix::<T>::zeros(n, n);
    let mut power = a.clone();
    for k in 1..=SERIES_MAX_TERMS {
        let term = &power / T::lit(k as f64);
        let tn = term.norm();
        sum -= term;
        if tn <= tol * T::one().max(sum.norm()) {
            return Ok(sum);
        }
        power = &power * &a;
    }
    Err(KernelError::NotConverged {
        what: "mercator series",
        iterations: SERIES_MAX_TERMS,
        residual: (&power / T::lit(SERIES_MAX_TERMS as f64)).norm().as_f64(),
    })
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn matexp<T: Real>(x: &DMatrix<T>) -> Result<DMatrix<T>, KernelError> {
    let n = require_square(x)?;
    let norm = x.norm();
    if !norm.is_finite_value() {
        return Err(KernelError::Domain { radius: f64::INFINITY, limit: f64::MAX });
    }
    // Scale so the Frobenius norm is at most 1/2.
    let mut squarings = 0u32;
    let mut scale = T::one();
    let half = T::lit(0.5);
    while norm * scale > half {
        scale *= half;
        squarings += 1;
    }
    let xs = x * scale;
    let mut result = DMatrix::<T>::identity(n, n);
    let mut term = DMatrix::<T>::identity(n, n);
    for k in 1..=40 {
        term = &term * &xs / T::lit(k as f64);
        result += &term;
        if term.norm() <= T::eps() * result.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}
