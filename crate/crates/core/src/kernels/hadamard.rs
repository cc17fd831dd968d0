use nalgebra::DMatrix;

use super::require_same_shape;
use crate::error::KernelError;
use crate::scalar::Real;

pub fn hadamard_prod<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>, KernelError> {
    require_same_shape(a, b)?;
    Ok(a.component_mul(b))
}

/// Entrywise quotient with the convention `a / 0 = 0`.
pub fn hadamard_div<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>, KernelError> {
    require_same_shape(a, b)?;
    Ok(a.zip_map(b, |x, y| if y == T::zero() { T::zero() } else { x / y }))
}
