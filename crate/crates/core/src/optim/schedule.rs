use serde::Serialize;

use crate::error::RunError;
use crate::scalar::Real;

/// Open interval `(0, upper)` of step sizes covered by the convergence
/// theorems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmissibleInterval<T: Real> {
    pub upper: T,
}

impl<T: Real> AdmissibleInterval<T> {
    pub fn contains(&self, alpha: T) -> bool {
        alpha > T::zero() && alpha < self.upper
    }

    pub fn midpoint(&self) -> T {
        self.upper * T::lit(0.5)
    }
}

fn positive<T: Real>(name: &str, v: T) -> Result<(), RunError> {
    if v > T::zero() && v.is_finite_value() {
        Ok(())
    } else {
        Err(RunError::Schedule(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `(0, 2/L)` for plain smoothness. With both `mu` and `r` supplied the
/// linear-rate interval `(0, min(2/(R mu c), c/(2 b L)))` is returned.
pub fn admissible_step<T: Real>(
    l: T,
    mu: Option<T>,
    b: T,
    c: T,
    r: Option<T>,
) -> Result<AdmissibleInterval<T>, RunError> {
    positive("L", l)?;
    positive("b", b)?;
    positive("c", c)?;
    if let Some(mu) = mu {
        positive("mu", mu)?;
    }
    if let Some(r) = r {
        positive("R", r)?;
    }
    let two = T::lit(2.0);
    let upper = match (mu, r) {
        (Some(mu), Some(r)) => (two / (r * mu * c)).min(c / (two * b * l)),
        _ => two / l,
    };
    Ok(AdmissibleInterval { upper })
}

/// Constant step size with optional declared constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSchedule<T: Real> {
    alpha: T,
    interval: Option<AdmissibleInterval<T>>,
}

impl<T: Real> StepSchedule<T> {
    /// Accepts any finite `alpha >= 0`. A zero step is allowed and leaves the
    /// iterate in place.
    pub fn constant(alpha: T) -> Result<Self, RunError> {
        if !alpha.is_finite_value() || alpha < T::zero() {
            return Err(RunError::Schedule(format!("alpha must be finite and nonnegative, got {alpha}")));
        }
        Ok(Self { alpha, interval: None })
    }

    /// Like [`StepSchedule::constant`] but also checks `alpha` against the
    /// interval implied by the declared constants.
    pub fn with_constants(alpha: T, l: T, mu: Option<T>, b: T, c: T, r: Option<T>) -> Result<Self, RunError> {
        let mut s = Self::constant(alpha)?;
        let interval = admissible_step(l, mu, b, c, r)?;
        if !interval.contains(alpha) {
            return Err(RunError::Schedule(format!(
                "alpha {alpha} outside the admissible interval (0, {})",
                interval.upper
            )));
        }
        s.interval = Some(interval);
        Ok(s)
    }

    /// `alpha = 1/L`, the centre of `(0, 2/L)`.
    pub fn from_smoothness(l: T) -> Result<Self, RunError> {
        let interval = admissible_step(l, None, T::one(), T::lit(2.0), None)?;
        Ok(Self { alpha: interval.midpoint(), interval: Some(interval) })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn interval(&self) -> Option<AdmissibleInterval<T>> {
        self.interval
    }
}
