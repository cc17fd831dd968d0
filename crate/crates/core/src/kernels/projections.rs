use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::require_square;
use crate::error::KernelError;
use crate::scalar::Real;

pub fn symmetrize<T: Real>(s: &DMatrix<T>) -> DMatrix<T> {
    (s + s.transpose()) * T::lit(0.5)
}

pub fn min_eigenvalue<T: Real>(s: &DMatrix<T>) -> Result<T, KernelError> {
    require_square(s)?;
    let vals = T::symmetric_eigenvalues(&symmetrize(s))?;
    Ok(vals.iter().copied().fold(T::infinity(), |a, b| a.min(b)))
}

/// Frobenius-nearest positive semidefinite matrix. The input is symmetrized
/// first.
///
/// The result is formed from whichever eigenspace is smaller: the positive
/// part directly, or the input minus its negative part.
pub fn psd_project<T: Real>(s: &DMatrix<T>) -> Result<DMatrix<T>, KernelError> {
    let n = require_square(s)?;
    let sym = symmetrize(s);
    let (vals, vecs) = T::symmetric_eigen(&sym)?;
    let negative = vals.iter().take_while(|&&l| l < T::zero()).count();
    if negative == 0 {
        return Ok(sym);
    }
    let low_rank = |start: usize, count: usize| {
        let v = vecs.columns(start, count);
        let mut scaled = v.clone_owned();
        for j in 0..count {
            scaled.column_mut(j).scale_mut(vals[start + j]);
        }
        scaled * v.transpose()
    };
    let out = if n - negative <= negative { low_rank(negative, n - negative) } else { sym - low_rank(0, negative) };
    Ok(symmetrize(&out))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DykstraSettings {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Anderson memory on the diagonal correction. Zero runs the plain
    /// alternating iteration.
    pub anderson: usize,
}

impl DykstraSettings {
    pub fn new(tol: f64, max_sweeps: usize) -> Self {
        Self { tol, max_sweeps, anderson: 0 }
    }

    pub fn with_anderson(mut self, memory: usize) -> Self {
        self.anderson = memory;
        self
    }
}

impl Default for DykstraSettings {
    fn default() -> Self {
        Self::new(1e-8, 5000)
    }
}

/// Dykstra's algorithm ran out of sweeps. Carries the best iterate found.
#[derive(Debug, Clone, Error)]
#[error("dykstra projection did not converge in {sweeps} sweeps (residual {residual:e})")]
pub struct DykstraFailure<T: Real> {
    pub best: DMatrix<T>,
    pub sweeps: usize,
    pub residual: f64,
}

impl<T: Real> From<DykstraFailure<T>> for KernelError {
    fn from(e: DykstraFailure<T>) -> Self {
        KernelError::NotConverged { what: "dykstra projection", iterations: e.sweeps, residual: e.residual }
    }
}

/// Nearest point of `{Z PSD, diag(Z) = 1}` (the nearest correlation matrix).
pub fn dykstra_psd_unitdiag<T: Real>(
    s: &DMatrix<T>,
    settings: DykstraSettings,
) -> Result<DMatrix<T>, DykstraFailure<T>> {
    let all: Vec<usize> = (0..s.nrows()).collect();
    dykstra_psd_fixed_diagonal(s, &all, settings)
}

/// Nearest point of `{Z PSD, Z_ii = 1 for i in fixed}`.
///
/// Alternates the PSD projection (with Dykstra's correction) and the affine
/// reset of the listed diagonal entries. The affine set needs no correction
/// term. Stops once the PSD iterate is within `tol` of the affine set and
/// successive affine iterates move by at most `tol` relative to their
/// Frobenius norm (absolute below norm one); the
/// returned matrix satisfies the affine constraint exactly and, because it
/// differs from a PSD matrix by a diagonal of magnitude at most `tol`, has
/// smallest eigenvalue at least `-tol`.
pub fn dykstra_psd_fixed_diagonal<T: Real>(
    s: &DMatrix<T>,
    fixed: &[usize],
    settings: DykstraSettings,
) -> Result<DMatrix<T>, DykstraFailure<T>> {
    let mut shift = vec![T::zero(); fixed.len()];
    dykstra_psd_fixed_diagonal_warm(s, fixed, &mut shift, settings).map(|(z, _)| z)
}

/// [`dykstra_psd_fixed_diagonal`] with an explicit starting correction.
///
/// With only diagonal entries pinned, Dykstra's correction after `k` sweeps
/// is a diagonal matrix, and the PSD step is applied to
/// `reset(S) + diag(shift)`. `shift` carries that diagonal in and out: zeros
/// give the cold-start iteration, and the final value of one solve is a good
/// start for a nearby input. The fixed point does not depend on the start.
/// Returns the projection and the number of sweeps used.
///
/// With `settings.anderson > 0` the shift update `shift += 1 - diag(P(r))` is
/// replaced by an Anderson-mixed step, restarted whenever the gap grows. The
/// fixed point and the stopping rule are unchanged.
pub fn dykstra_psd_fixed_diagonal_warm<T: Real>(
    s: &DMatrix<T>,
    fixed: &[usize],
    shift: &mut Vec<T>,
    settings: DykstraSettings,
) -> Result<(DMatrix<T>, usize), DykstraFailure<T>> {
    let fail = |best: DMatrix<T>, sweeps: usize, residual: f64| DykstraFailure { best, sweeps, residual };
    let n = s.nrows();
    if !s.is_square() || fixed.iter().any(|&i| i >= n) {
        return Err(fail(s.clone(), 0, f64::NAN));
    }
    if shift.len() != fixed.len() || shift.iter().any(|v| !v.is_finite_value()) {
        *shift = vec![T::zero(); fixed.len()];
    }
    let tol = T::lit(settings.tol);
    let reset = |m: &mut DMatrix<T>| {
        for &i in fixed {
            m[(i, i)] = T::one();
        }
    };
    let mut base = symmetrize(s);
    reset(&mut base);
    let mut y = base.clone();
    let mut r = base.clone();
    let mut best = y.clone();
    let mut best_residual = T::infinity();
    let mut mixer = Anderson::new(settings.anderson);
    for sweep in 1..=settings.max_sweeps {
        for (k, &i) in fixed.iter().enumerate() {
            r[(i, i)] = base[(i, i)] + shift[k];
        }
        let x = match psd_project(&r) {
            Ok(x) => x,
            Err(_) => return Err(fail(best, sweep, best_residual.as_f64())),
        };
        let mut deviation = T::zero();
        let gaps: Vec<f64> = fixed
            .iter()
            .map(|&i| {
                let gap = T::one() - x[(i, i)];
                deviation = deviation.max(gap.abs());
                gap.as_f64()
            })
            .collect();
        let current: Vec<f64> = shift.iter().map(|v| v.as_f64()).collect();
        for (k, v) in mixer.step(&current, &gaps).into_iter().enumerate() {
            shift[k] = T::lit(v);
        }
        let mut next = x;
        reset(&mut next);
        let change = (&next - &y).norm();
        y = next;
        let residual = deviation.max(change);
        if residual < best_residual {
            best_residual = residual;
            best = y.clone();
        }
        if deviation <= tol && change <= tol * T::one().max(y.norm()) {
            return Ok((y, sweep));
        }
    }
    Err(fail(best, settings.max_sweeps, best_residual.as_f64()))
}

/// Type-II Anderson mixing for the fixed-point map `s -> s + g(s)`.
struct Anderson {
    memory: usize,
    prev: Option<(Vec<f64>, Vec<f64>)>,
    ds: Vec<Vec<f64>>,
    dg: Vec<Vec<f64>>,
    last_gap: f64,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self { memory, prev: None, ds: Vec::new(), dg: Vec::new(), last_gap: f64::INFINITY }
    }

    fn step(&mut self, s: &[f64], g: &[f64]) -> Vec<f64> {
        let plain: Vec<f64> = s.iter().zip(g).map(|(a, b)| a + b).collect();
        if self.memory == 0 {
            return plain;
        }
        let gap = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gap > self.last_gap {
            self.ds.clear();
            self.dg.clear();
        } else if let Some((ps, pg)) = &self.prev {
            self.ds.push(s.iter().zip(ps).map(|(a, b)| a - b).collect());
            self.dg.push(g.iter().zip(pg).map(|(a, b)| a - b).collect());
            if self.ds.len() > self.memory {
                self.ds.remove(0);
                self.dg.remove(0);
            }
        }
        self.last_gap = gap;
        self.prev = Some((s.to_vec(), g.to_vec()));
        let m = self.dg.len();
        if m == 0 {
            return plain;
        }
        let n = g.len();
        let f = DMatrix::from_fn(n, m, |i, j| self.dg[j][i]);
        let rhs = DVector::from_column_slice(g);
        let Ok(gamma) = f.svd(true, true).solve(&rhs, 1e-12 * gap.max(f64::MIN_POSITIVE)) else {
            return plain;
        };
        let mut out = plain;
        for j in 0..m {
            for i in 0..n {
                out[i] -= gamma[j] * (self.ds[j][i] + self.dg[j][i]);
            }
        }
        if out.iter().all(|v| v.is_finite()) {
            out
        } else {
            s.iter().zip(g).map(|(a, b)| a + b).collect()
        }
    }
}

/// Proximal map of `theta * ||.||_1`.
pub fn soft_threshold<T: Real>(v: &DVector<T>, theta: T) -> DVector<T> {
    v.map(|x| shrink(x, theta))
}

pub fn soft_threshold_matrix<T: Real>(m: &DMatrix<T>, theta: T) -> DMatrix<T> {
    m.map(|x| shrink(x, theta))
}

#[inline]
fn shrink<T: Real>(x: T, theta: T) -> T {
    let a = x.abs() - theta;
    if a > T::zero() {
        if x > T::zero() { a } else { -a }
    } else {
        T::zero()
    }
}

/// Euclidean projection onto `{t : ||t||_inf <= radius}`.
pub fn box_project_linf<T: Real>(t: &DVector<T>, radius: T) -> DVector<T> {
    t.map(|x| x.max(-radius).min(radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warm_start_reaches_the_cold_answer() {
        let s = symmetrize(&DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0));
        let all: Vec<usize> = (0..6).collect();
        let settings = DykstraSettings::new(1e-12, 20000);
        let (cold, cold_sweeps) = dykstra_psd_fixed_diagonal_warm(&s, &all, &mut vec![0.0; 6], settings).unwrap();
        assert_eq!(cold, dykstra_psd_fixed_diagonal(&s, &all, settings).unwrap());
        let mut shift = vec![0.3, -1.0, 2.0, 0.0, 0.5, -0.2];
        let (warm, _) = dykstra_psd_fixed_diagonal_warm(&s, &all, &mut shift, settings).unwrap();
        assert!((&warm - &cold).norm() < 1e-9);
        let (again, sweeps) = dykstra_psd_fixed_diagonal_warm(&s, &all, &mut shift, settings).unwrap();
        assert!((again - cold).norm() < 1e-9);
        assert!(sweeps < cold_sweeps);
    }

    #[test]
    fn anderson_mixing_matches_plain_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3, 8, 20] {
            let s = rand_sym(&mut rng, n) * 3.0;
            let plain = DykstraSettings::new(1e-12, 20000);
            let all: Vec<usize> = (0..n).collect();
            let (a, plain_sweeps) = dykstra_psd_fixed_diagonal_warm(&s, &all, &mut Vec::new(), plain).unwrap();
            let (b, mixed_sweeps) =
                dykstra_psd_fixed_diagonal_warm(&s, &all, &mut Vec::new(), plain.with_anderson(5)).unwrap();
            assert!((&a - &b).norm() < 1e-9, "n={n}");
            assert!(mixed_sweeps <= plain_sweeps, "n={n}: {mixed_sweeps} > {plain_sweeps}");
        }
    }

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        symmetrize(&a)
    }

    #[test]
    fn psd_examples() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((psd_project(&p).unwrap() - &p).norm() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let out = psd_project(&d).unwrap();
        assert!((out - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).norm() < 1e-14);
    }

    #[test]
    fn psd_optimality_certificate() {
        // Z = P(S) iff Z and Z - S are PSD and orthogonal.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let s = rand_sym(&mut rng, 5);
            let z = psd_project(&s).unwrap();
            assert!(min_eigenvalue(&z).unwrap() >= -1e-10);
            assert!(min_eigenvalue(&(&z - &s)).unwrap() >= -1e-10);
            assert!(z.dot(&(&z - &s)).abs() < 1e-10);
        }
    }

    #[test]
    fn dykstra_examples() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.3, 1.0, 0.1, -0.2, 0.1, 1.0]);
        let out = dykstra_psd_unitdiag(&c, DykstraSettings::default()).unwrap();
        assert!((out - &c).norm() < 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        let out = dykstra_psd_unitdiag(&d, DykstraSettings::default()).unwrap();
        assert!((out - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn dykstra_two_by_two_closed_form() {
        // For [[a, b], [b, c]] the nearest correlation matrix is
        // [[1, clamp(b)], [clamp(b), 1]].
        for &(a, b, c) in &[(3.0, 2.5, 0.5), (0.2, -1.7, 4.0), (1.0, 0.4, 1.0)] {
            let s = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
            let out = dykstra_psd_unitdiag(&s, DykstraSettings::new(1e-12, 5000)).unwrap();
            let off: f64 = f64::clamp(b, -1.0, 1.0);
            assert!((out[(0, 1)] - off).abs() < 1e-8, "{out}");
            assert_eq!(out[(0, 0)], 1.0);
        }
    }

    #[test]
    fn dykstra_reports_failure_with_best_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = rand_sym(&mut rng, 6) * 10.0;
        let err = dykstra_psd_unitdiag(&s, DykstraSettings::new(1e-14, 2)).unwrap_err();
        assert_eq!(err.sweeps, 2);
        assert_eq!(err.best.nrows(), 6);
    }

    #[test]
    fn dykstra_feasibility_and_sanity_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let s = rand_sym(&mut rng, 6) * 3.0;
            let z = dykstra_psd_unitdiag(&s, DykstraSettings::default()).unwrap();
            for i in 0..6 {
                assert_eq!(z[(i, i)], 1.0);
            }
            assert!(min_eigenvalue(&z).unwrap() >= -1e-8);
            // Any feasible point bounds the distance, e.g. the identity.
            assert!((&z - &s).norm() <= (DMatrix::identity(6, 6) - &s).norm() + 1e-8);
            // PSD projection with its diagonal reset is feasible whenever it
            // stays PSD, and then bounds the distance as well.
            let mut q = psd_project(&s).unwrap();
            for i in 0..6 {
                q[(i, i)] = 1.0;
            }
            if min_eigenvalue(&q).unwrap() >= 0.0 {
                assert!((&z - &s).norm() <= (&q - &s).norm() + 1e-8);
            }
        }
    }

    #[test]
    fn corner_constraint_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = rand_sym(&mut rng, 4);
        let z = dykstra_psd_fixed_diagonal(&s, &[3], DykstraSettings::default()).unwrap();
        assert_eq!(z[(3, 3)], 1.0);
        assert!(min_eigenvalue(&z).unwrap() >= -1e-8);
    }

    #[test]
    fn soft_threshold_examples() {
        let v = DVector::from_vec(vec![0.5, -2.0]);
        assert_eq!(soft_threshold(&v, 0.0), v);
        assert_eq!(soft_threshold(&v, 1.0), DVector::from_vec(vec![0.0, -1.0]));
    }

    #[test]
    fn box_examples() {
        let t = DVector::from_vec(vec![3.0, -0.5]);
        assert_eq!(box_project_linf(&t, 1.0), DVector::from_vec(vec![1.0, -0.5]));
        let inner = DVector::from_vec(vec![0.2, -0.9]);
        assert_eq!(box_project_linf(&inner, 1.0), inner);
    }

    proptest! {
        #[test]
        fn shrinkage_bound(v in proptest::collection::vec(-10.0f64..10.0, 1..8), theta in 0.0f64..5.0) {
            let v = DVector::from_vec(v);
            let out = soft_threshold(&v, theta);
            prop_assert!(out.amax() <= (v.amax() - theta).max(0.0) + 1e-15);
        }

        #[test]
        fn clamp_idempotent(v in proptest::collection::vec(-10.0f64..10.0, 1..8), r in 0.1f64..5.0) {
            let v = DVector::from_vec(v);
            let once = box_project_linf(&v, r);
            prop_assert_eq!(box_project_linf(&once, r), once);
        }

        #[test]
        fn psd_idempotent_and_nonexpansive(a in proptest::collection::vec(-2.0f64..2.0, 16),
                                           b in proptest::collection::vec(-2.0f64..2.0, 16)) {
            let a = symmetrize(&DMatrix::from_row_slice(4, 4, &a));
            let b = symmetrize(&DMatrix::from_row_slice(4, 4, &b));
            let pa = psd_project(&a).unwrap();
            let pb = psd_project(&b).unwrap();
            prop_assert!((psd_project(&pa).unwrap() - &pa).norm() < 1e-12);
            prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-12);
        }
    }
}
