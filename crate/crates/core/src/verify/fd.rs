use crate::error::VerifyError;
use crate::optim::Objective;
use crate::point::Point;
use crate::scalar::Real;

/// Worst per-coordinate error of the analytic gradient against central
/// differences, measured as `|fd - g| / max(1, |g|)`.
///
/// The step for coordinate `i` is `epsilon * max(1, |x_i|)`.
pub fn gradient_fd_check<T: Real>(f: &dyn Objective<T>, x: &Point<T>, epsilon: f64) -> Result<f64, VerifyError> {
    if !(1e-8..=1e-3).contains(&epsilon) {
        return Err(VerifyError::Epsilon(epsilon));
    }
    let g = f.gradient(x)?.flatten();
    let base = x.flatten();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let h = T::lit(epsilon) * T::one().max(base[i].abs());
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[i] += h;
        minus[i] -= h;
        let fp = f.value(&x.unflatten(&plus).map_err(crate::error::ProblemError::from)?)?;
        let fm = f.value(&x.unflatten(&minus).map_err(crate::error::ProblemError::from)?)?;
        let fd = ((fp - fm) / (h + h)).as_f64();
        let gi = g[i].as_f64();
        worst = worst.max((fd - gi).abs() / gi.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::problems::dag::{scale_to_radius, DagProblem};
    use crate::problems::quadratic::Quadratic;

    #[test]
    fn quadratic_is_exact() {
        let q = Quadratic::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), nalgebra::DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let err = gradient_fd_check(&q, &Point::from_slice(&[0.3, -1.2]), 1e-5).unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn dag_gradient_audit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = scale_to_radius(&DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0)), 0.6).unwrap();
        let err = gradient_fd_check(&DagProblem::new(4), &Point::from_matrix(w), 1e-5).unwrap();
        assert!(err <= 1e-5, "{err}");
    }

    #[test]
    fn rejects_bad_epsilon() {
        let q = Quadratic::<f64>::isotropic(1, 1.0);
        assert!(matches!(gradient_fd_check(&q, &Point::from_slice(&[0.0]), 1e-2), Err(VerifyError::Epsilon(_))));
    }
}
