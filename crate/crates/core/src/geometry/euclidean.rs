use super::Geometry;
use crate::error::{GeometryError, ShapeError};
use crate::point::Point;
use crate::scalar::Real;

/// `eta(y, x) = y - x`; the step equation gives plain gradient descent.
#[derive(Clone, Copy, Debug, Default)]
pub struct Euclidean;

pub fn euclidean_step<T: Real>(x: &Point<T>, v: &Point<T>) -> Result<Point<T>, ShapeError> {
    x.add(v)
}

impl<T: Real> Geometry<T> for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn eta(&self, y: &Point<T>, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        Ok(y.sub(x)?)
    }

    fn step(&self, x: &Point<T>, v: &Point<T>) -> Result<Point<T>, GeometryError> {
        Ok(euclidean_step(x, v)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn examples() {
        let x = Point::from_slice(&[1.0, 2.0]);
        assert_eq!(euclidean_step(&x, &Point::from_slice(&[0.0, 0.0])).unwrap(), x);
        assert_eq!(euclidean_step(&x, &Point::from_slice(&[-1.0, 3.0])).unwrap(), Point::from_slice(&[0.0, 5.0]));
        assert!(euclidean_step(&x, &Point::from_slice(&[1.0])).is_err());
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (x, v) = (Point::from_slice(&x), Point::from_slice(&v));
            let y = Euclidean.step(&x, &v).unwrap();
            let back = Euclidean.eta(&y, &x).unwrap();
            assert!(back.sub(&v).unwrap().norm() <= 1e-12 * (1.0 + v.norm()));
        }
        let x = Point::from_slice(&[0.3, -0.7]);
        assert_eq!(Euclidean.eta(&x, &x).unwrap().norm(), 0.0);
    }
}
