//! Projectors onto the feasible sets used by the problems.

use nalgebra::DVector;

use crate::error::ProblemError;
use crate::kernels::{box_project_linf, dykstra_psd_fixed_diagonal, min_eigenvalue, psd_project, DykstraSettings};
use crate::optim::Projector;
use crate::point::{Block, Point};
use crate::scalar::Real;

/// Componentwise box `[lo, hi]` applied to every vector block.
#[derive(Clone, Copy, Debug)]
pub struct BoxProjector<T: Real> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> BoxProjector<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, ProblemError> {
        if lo > hi {
            return Err(ProblemError::Invalid(format!("empty box [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn clamp(&self, v: &DVector<T>) -> DVector<T> {
        v.map(|t| t.max(self.lo).min(self.hi))
    }
}

impl<T: Real> Projector<T> for BoxProjector<T> {
    fn project(&self, y: &Point<T>) -> Result<Point<T>, ProblemError> {
        Ok(y.map(|t| t.max(self.lo).min(self.hi)))
    }

    fn is_feasible(&self, x: &Point<T>, tol: T) -> Result<bool, ProblemError> {
        Ok(x.flatten().iter().all(|&t| t >= self.lo - tol && t <= self.hi + tol))
    }
}

/// Euclidean ball of the max norm, `||t||_inf <= radius`, on every vector block.
#[derive(Clone, Copy, Debug)]
pub struct LinfBall<T: Real> {
    pub radius: T,
}

impl<T: Real> Projector<T> for LinfBall<T> {
    fn project(&self, y: &Point<T>) -> Result<Point<T>, ProblemError> {
        let mut out = y.clone();
        for name in y.names().map(str::to_owned).collect::<Vec<_>>() {
            if let Some(Block::Vector(v)) = out.block_mut(&name) {
                *v = box_project_linf(v, self.radius);
            }
        }
        Ok(out)
    }

    fn is_feasible(&self, x: &Point<T>, tol: T) -> Result<bool, ProblemError> {
        Ok(x.blocks().all(|(_, b)| match b {
            Block::Vector(v) => v.amax() <= self.radius + tol,
            Block::Matrix(_) => true,
        }))
    }
}

/// Which diagonal entries a semidefinite constraint pins to one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PinnedDiagonal {
    None,
    All,
    Last,
}

impl PinnedDiagonal {
    pub fn indices(&self, n: usize) -> Vec<usize> {
        match self {
            PinnedDiagonal::None => Vec::new(),
            PinnedDiagonal::All => (0..n).collect(),
            PinnedDiagonal::Last => n.checked_sub(1).into_iter().collect(),
        }
    }
}

/// `{Z PSD}` intersected with pinned diagonal entries, on the named matrix
/// blocks. Other blocks pass through unchanged.
#[derive(Clone, Debug)]
pub struct PsdProjector {
    pub blocks: Vec<String>,
    pub pinned: PinnedDiagonal,
    pub settings: DykstraSettings,
}

impl PsdProjector {
    pub fn new(blocks: &[&str], pinned: PinnedDiagonal) -> Self {
        Self { blocks: blocks.iter().map(|s| s.to_string()).collect(), pinned, settings: DykstraSettings::default() }
    }

    pub fn with_settings(mut self, settings: DykstraSettings) -> Self {
        self.settings = settings;
        self
    }
}

pub(crate) fn project_psd_block<T: Real>(
    m: &nalgebra::DMatrix<T>,
    pinned: &PinnedDiagonal,
    settings: DykstraSettings,
) -> Result<nalgebra::DMatrix<T>, ProblemError> {
    match pinned {
        PinnedDiagonal::None => Ok(psd_project(m)?),
        p => Ok(dykstra_psd_fixed_diagonal(m, &p.indices(m.nrows()), settings).map_err(crate::error::KernelError::from)?),
    }
}

pub(crate) fn psd_block_feasible<T: Real>(
    m: &nalgebra::DMatrix<T>,
    pinned: &PinnedDiagonal,
    tol: T,
) -> Result<bool, ProblemError> {
    let diag_ok = pinned.indices(m.nrows()).iter().all(|&i| (m[(i, i)] - T::one()).abs() <= tol);
    let sym_ok = (m - m.transpose()).amax() <= tol;
    if !(diag_ok && sym_ok) {
        return Ok(false);
    }
    // A Cholesky factor of `M + tol I` certifies `lambda_min >= -tol` at a
    // fraction of the eigensolver's cost; only a failed factorisation needs
    // the exact test.
    let mut shifted = crate::kernels::symmetrize(m);
    for i in 0..m.nrows() {
        shifted[(i, i)] += tol;
    }
    if tol > T::zero() && shifted.cholesky().is_some() {
        return Ok(true);
    }
    Ok(min_eigenvalue(m)? >= -tol)
}

impl<T: Real> Projector<T> for PsdProjector {
    fn project(&self, y: &Point<T>) -> Result<Point<T>, ProblemError> {
        let mut out = y.clone();
        for name in &self.blocks {
            let m = out.matrix_mut(name)?;
            *m = project_psd_block(m, &self.pinned, self.settings)?;
        }
        Ok(out)
    }

    fn is_feasible(&self, x: &Point<T>, tol: T) -> Result<bool, ProblemError> {
        for name in &self.blocks {
            if !psd_block_feasible(x.matrix(name)?, &self.pinned, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn box_projection() {
        let b = BoxProjector::new(1.0, 2.0).unwrap();
        let p = Point::from_slice(&[0.5, 1.5, 3.0]);
        assert_eq!(b.project(&p).unwrap(), Point::from_slice(&[1.0, 1.5, 2.0]));
        assert!(!b.is_feasible(&p, 1e-8).unwrap());
        assert!(BoxProjector::new(2.0, 1.0).is_err());
    }

    #[test]
    fn psd_projector_on_named_block() {
        let p = Point::new()
            .with_vector("w", DVector::from_vec(vec![5.0]))
            .with_matrix("Z", DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0])));
        let proj = PsdProjector::new(&["Z"], PinnedDiagonal::All);
        let out = proj.project(&p).unwrap();
        assert_eq!(out.vector("w").unwrap()[0], 5.0);
        assert!((out.matrix("Z").unwrap() - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!(proj.is_feasible(&out, 1e-8).unwrap());
        assert!(!proj.is_feasible(&p, 1e-8).unwrap());
    }

    #[test]
    fn semidefinite_test_matches_smallest_eigenvalue() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let tol = 1e-8;
        for _ in 0..300 {
            let n = rng.random_range(2..7);
            let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let base = &g * g.transpose();
            let lmin = min_eigenvalue(&base).unwrap();
            // Shift so the smallest eigenvalue lands just either side of -tol.
            let target = -tol * rng.random_range(0.5..1.5);
            let m = base + DMatrix::identity(n, n) * (target - lmin);
            let exact = min_eigenvalue(&m).unwrap() >= -tol;
            assert_eq!(psd_block_feasible(&m, &PinnedDiagonal::None, tol).unwrap(), exact, "target {target:e}");
        }
    }
}
