//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::{DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

use crate::error::KernelError;

/// Floating point scalar the optimizers and kernels are written against.
///
/// Implemented for `f32` and `f64`. The symmetric eigensolver is routed
/// through faer, which is considerably faster than the pure nalgebra path
/// for the matrix orders the semidefinite projections run at.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Default + Send + Sync + 'static
{
    /// Converts a literal. Panics only if the literal is not representable,
    /// which cannot happen for the finite constants used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon.
    fn eps() -> Self;

    fn infinity() -> Self;

    fn is_finite_value(self) -> bool;

    /// Eigendecomposition of a symmetric matrix. Only the lower triangle is
    /// read. Eigenvalues are returned in nondecreasing order with the
    /// matching eigenvectors as columns.
    fn symmetric_eigen(m: &DMatrix<Self>) -> Result<(DVector<Self>, DMatrix<Self>), KernelError>;

    /// Eigenvalues of a symmetric matrix in nondecreasing order.
    fn symmetric_eigenvalues(m: &DMatrix<Self>) -> Result<DVector<Self>, KernelError>;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn eps() -> Self {
                <$t>::EPSILON
            }

            #[inline]
            fn infinity() -> Self {
                <$t>::INFINITY
            }

            #[inline]
            fn is_finite_value(self) -> bool {
                self.is_finite()
            }

            fn symmetric_eigen(
                m: &DMatrix<Self>,
            ) -> Result<(DVector<Self>, DMatrix<Self>), KernelError> {
                let n = m.nrows();
                if n != m.ncols() {
                    return Err(KernelError::NotSquare { rows: n, cols: m.ncols() });
                }
                if n == 0 {
                    return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
                }
                let f = faer::Mat::<$t>::from_fn(n, n, |i, j| m[(i, j)]);
                let evd = f
                    .self_adjoint_eigen(faer::Side::Lower)
                    .map_err(|_| KernelError::EigenFailed)?;
                let s = evd.S().column_vector();
                let u = evd.U();
                let values = DVector::from_fn(n, |i, _| s[i]);
                let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
                Ok((values, vectors))
            }

            fn symmetric_eigenvalues(m: &DMatrix<Self>) -> Result<DVector<Self>, KernelError> {
                let n = m.nrows();
                if n != m.ncols() {
                    return Err(KernelError::NotSquare { rows: n, cols: m.ncols() });
                }
                if n == 0 {
                    return Ok(DVector::zeros(0));
                }
                let f = faer::Mat::<$t>::from_fn(n, n, |i, j| m[(i, j)]);
                let values = f
                    .self_adjoint_eigenvalues(faer::Side::Lower)
                    .map_err(|_| KernelError::EigenFailed)?;
                Ok(DVector::from_vec(values))
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Caps the thread count used by the dense eigensolver. `0` or `1` selects
/// sequential execution.
pub fn set_linalg_threads(threads: usize) {
    let par = match std::num::NonZeroUsize::new(threads) {
        Some(n) if n.get() > 1 => faer::Par::Rayon(n),
        _ => faer::Par::Seq,
    };
    faer::set_global_parallelism(par);
}

/// Reads `INVEXOPT_THREADS` and applies it, if set and parseable.
pub fn apply_thread_env() -> Option<usize> {
    let threads = std::env::var("INVEXOPT_THREADS").ok()?.trim().parse::<usize>().ok()?;
    set_linalg_threads(threads);
    Some(threads)
}
