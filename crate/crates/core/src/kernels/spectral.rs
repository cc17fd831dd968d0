use nalgebra::{DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::require_square;
use crate::error::KernelError;
use crate::scalar::Real;

/// Orders up to this size use a dense Schur decomposition directly.
const DENSE_LIMIT: usize = 64;
const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 10_000;
const POWER_RESTARTS: u64 = 3;

/// Largest eigenvalue modulus of a square matrix.
///
/// Small orders go through the real Schur form. Larger orders use a power
/// iteration that fits a degree-two minimal polynomial to consecutive Krylov
/// vectors, so a dominant complex-conjugate pair is resolved as well as a
/// dominant real eigenvalue. If that fails to settle from several random
/// starts, the dense path is used after all.
pub fn spectral_radius<T: Real>(a: &DMatrix<T>) -> Result<T, KernelError> {
    let n = require_square(a)?;
    if n == 0 {
        return Ok(T::zero());
    }
    if n <= DENSE_LIMIT {
        return dense_radius(a);
    }
    for restart in 0..POWER_RESTARTS {
        if let Some(r) = power_radius(a, 0x5eed_u64.wrapping_add(restart)) {
            return Ok(r);
        }
    }
    dense_radius(a)
}

fn dense_radius<T: Real>(a: &DMatrix<T>) -> Result<T, KernelError> {
    let schur = Schur::try_new(a.clone(), T::default_epsilon(), 100 * a.nrows().max(10))
        .ok_or(KernelError::NotConverged { what: "schur decomposition", iterations: 100 * a.nrows(), residual: f64::NAN })?;
    let eig = schur.complex_eigenvalues();
    Ok(eig.iter().fold(T::zero(), |acc, z| acc.max((z.re * z.re + z.im * z.im).sqrt())))
}

fn power_radius<T: Real>(a: &DMatrix<T>, seed: u64) -> Option<T> {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::<T>::from_fn(n, |_, _| T::lit(rng.random_range(-1.0..1.0)));
    let nv = v.norm();
    if nv == T::zero() {
        return None;
    }
    v /= nv;
    let tol = T::lit(POWER_TOL).max(T::eps() * T::lit(16.0));
    let mut prev: Option<T> = None;
    let mut stable = 0;
    for _ in 0..POWER_MAX_ITER {
        let w1 = a * &v;
        let n1 = w1.norm();
        if n1 == T::zero() {
            return Some(T::zero());
        }
        let w2 = a * &w1;
        let est = quadratic_fit_radius(&v, &w1, &w2).unwrap_or(n1);
        let est = if est.is_finite_value() { est } else { n1 };
        if let Some(p) = prev {
            if (est - p).abs() <= tol * est.max(T::eps()) {
                stable += 1;
                if stable >= 3 {
                    return Some(est);
                }
            } else {
                stable = 0;
            }
        }
        prev = Some(est);
        let n2 = w2.norm();
        if n2 == T::zero() {
            return Some(T::zero());
        }
        v = w2 / n2;
    }
    None
}

/// Least-squares fit of `w2 = c1 w1 + c0 v` and the larger root modulus of
/// `z^2 - c1 z - c0`.
fn quadratic_fit_radius<T: Real>(v: &DVector<T>, w1: &DVector<T>, w2: &DVector<T>) -> Option<T> {
    let g11 = w1.dot(w1);
    let g10 = w1.dot(v);
    let g00 = v.dot(v);
    let b1 = w1.dot(w2);
    let b0 = v.dot(w2);
    let det = g11 * g00 - g10 * g10;
    if det.abs() <= T::eps() * g11 * g00 * T::lit(1e4) {
        // Krylov vectors are parallel: a single dominant real eigenvalue.
        return Some((b1 / g11).abs());
    }
    let c1 = (b1 * g00 - b0 * g10) / det;
    let c0 = (g11 * b0 - g10 * b1) / det;
    let two = T::lit(2.0);
    let disc = c1 * c1 + T::lit(4.0) * c0;
    if disc >= T::zero() {
        let s = disc.sqrt();
        Some(((c1 + s) / two).abs().max(((c1 - s) / two).abs()))
    } else {
        // Complex pair: |z|^2 = -c0.
        Some((-c0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        assert_eq!(spectral_radius(&DMatrix::<f64>::zeros(3, 3)).unwrap(), 0.0);
        assert!((spectral_radius(&DMatrix::<f64>::identity(4, 4)).unwrap() - 1.0).abs() < 1e-12);
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert_eq!(spectral_radius(&nil).unwrap(), 0.0);
    }

    #[test]
    fn rotation_has_unit_radius() {
        let r = DMatrix::<f64>::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        assert!((spectral_radius(&r).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_path_matches_dense_on_large_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let a = DMatrix::<f64>::from_fn(90, 90, |_, _| rng.random_range(-1.0..1.0));
            let dense = dense_radius(&a).unwrap();
            let iter = spectral_radius(&a).unwrap();
            assert!((dense - iter).abs() <= 1e-8 * dense, "{dense} vs {iter}");
        }
        // Nonnegative matrices have a real dominant eigenvalue.
        let a = DMatrix::<f64>::from_fn(80, 80, |_, _| rng.random_range(0.0..1.0));
        let dense = dense_radius(&a).unwrap();
        assert!((spectral_radius(&a).unwrap() - dense).abs() <= 1e-8 * dense);
    }

    #[test]
    fn rejects_rectangular() {
        assert!(spectral_radius(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }
}
