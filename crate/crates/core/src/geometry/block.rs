use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::Geometry;
use crate::error::{GeometryError, ShapeError};
use crate::point::Point;
use crate::scalar::Real;

/// `A(y1, x1)`, required to be symmetric positive definite.
pub type BlockMetric<T> = Arc<dyn Fn(&DVector<T>, &DVector<T>) -> DMatrix<T> + Send + Sync>;

/// `eta(y, x) = [y1 - x1; A(y1, x1)(y2 - x2)]` on the flattened point split
/// after the first `n1` entries.
#[derive(Clone)]
pub struct BlockGeometry<T: Real> {
    pub n1: usize,
    pub n2: usize,
    metric: BlockMetric<T>,
}

impl<T: Real> BlockGeometry<T> {
    pub fn new(n1: usize, n2: usize, metric: BlockMetric<T>) -> Self {
        Self { n1, n2, metric }
    }

    fn split(&self, p: &Point<T>) -> Result<(DVector<T>, DVector<T>), ShapeError> {
        let f = p.flatten();
        if f.len() != self.n1 + self.n2 {
            return Err(ShapeError::new(format!("{} entries", self.n1 + self.n2), format!("{} entries", f.len())));
        }
        Ok((f.rows(0, self.n1).into_owned(), f.rows(self.n1, self.n2).into_owned()))
    }

    fn metric_at(&self, y1: &DVector<T>, x1: &DVector<T>) -> Result<DMatrix<T>, GeometryError> {
        let a = (self.metric)(y1, x1);
        if a.shape() != (self.n2, self.n2) {
            return Err(ShapeError::new(format!("{0}x{0} metric", self.n2), format!("{}x{}", a.nrows(), a.ncols())).into());
        }
        Ok(a)
    }
}

fn join<T: Real>(a: DVector<T>, b: DVector<T>) -> DVector<T> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(&a);
    out.rows_mut(a.len(), b.len()).copy_from(&b);
    out
}

/// `y1 = x1 + v1`, `y2 = x2 + A(y1, x1)^{-1} v2` through a Cholesky solve.
pub fn block_step<T: Real>(
    x1: &DVector<T>,
    x2: &DVector<T>,
    v1: &DVector<T>,
    v2: &DVector<T>,
    metric: &dyn Fn(&DVector<T>, &DVector<T>) -> DMatrix<T>,
) -> Result<(DVector<T>, DVector<T>), GeometryError> {
    if x1.len() != v1.len() || x2.len() != v2.len() {
        return Err(ShapeError::new(format!("({}, {})", x1.len(), x2.len()), format!("({}, {})", v1.len(), v2.len())).into());
    }
    let y1 = x1 + v1;
    let a = metric(&y1, x1);
    let asym = (&a - a.transpose()).norm();
    if asym > T::lit(1e-12) * T::one().max(a.norm()) {
        return Err(GeometryError::Precondition("block metric is not symmetric".into()));
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| GeometryError::Precondition("block metric is not positive definite".into()))?;
    let y2 = x2 + chol.solve(v2);
    Ok((y1, y2))
}

impl<T: Real> Geometry<T> for BlockGeometry<T> {
    fn name(&self) -> &'static str {
        "block"
    }

    fn eta(&self, y: &Point<T>, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        x.check_congruent(y)?;
        let (y1, y2) = self.split(y)?;
        let (x1, x2) = self.split(x)?;
        let a = self.metric_at(&y1, &x1)?;
        let e2 = a * (y2 - x2);
        Ok(x.unflatten(&join(y1 - x1, e2))?)
    }

    fn step(&self, x: &Point<T>, v: &Point<T>) -> Result<Point<T>, GeometryError> {
        x.check_congruent(v)?;
        let (x1, x2) = self.split(x)?;
        let (v1, v2) = self.split(v)?;
        self.metric_at(&(&x1 + &v1), &x1)?;
        let (y1, y2) = block_step(&x1, &x2, &v1, &v2, self.metric.as_ref())?;
        Ok(x.unflatten(&join(y1, y2))?)
    }
}
