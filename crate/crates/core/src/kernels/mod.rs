//! Dense matrix primitives used by the application problems.

mod hadamard;
mod matfun;
mod projections;
mod spectral;

pub use hadamard::{hadamard_div, hadamard_prod};
pub use matfun::{matexp, matlog_near_identity, MATLOG_DOMAIN_MARGIN};
pub use projections::{
    box_project_linf, dykstra_psd_fixed_diagonal, dykstra_psd_fixed_diagonal_warm, dykstra_psd_unitdiag, min_eigenvalue,
    psd_project, soft_threshold, soft_threshold_matrix, symmetrize, DykstraFailure,
    DykstraSettings,
};
pub use spectral::spectral_radius;

use nalgebra::DMatrix;

use crate::error::{KernelError, ShapeError};
use crate::scalar::Real;

pub(crate) fn require_square<T: Real>(m: &DMatrix<T>) -> Result<usize, KernelError> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(KernelError::NotSquare { rows: m.nrows(), cols: m.ncols() })
    }
}

pub(crate) fn require_same_shape<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<(), KernelError> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(ShapeError::new(
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        )
        .into())
    }
}
