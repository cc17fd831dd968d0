use serde::Serialize;

use crate::geometry::Geometry;
use crate::optim::{Objective, Projector};
use crate::point::Point;
use crate::scalar::Real;

/// Sample points attached to the worst violation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    /// Flattened sample points in the order the probe received them.
    pub points: Vec<Vec<f64>>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub samples_tested: usize,
    pub violations: usize,
    /// Largest amount by which a checked inequality failed (0 when none did),
    /// on the probe's own scale.
    pub worst_residual: f64,
    /// Largest `|lhs - rhs|` seen, violating or not.
    pub max_abs_residual: f64,
    pub witness: Option<Witness>,
    pub tolerance_used: f64,
    /// Samples that could not be evaluated (outside a domain, zero kernel).
    pub skipped: usize,
}

impl ProbeReport {
    fn new(tol: f64) -> Self {
        Self {
            samples_tested: 0,
            violations: 0,
            worst_residual: 0.0,
            max_abs_residual: 0.0,
            witness: None,
            tolerance_used: tol,
            skipped: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.samples_tested > 0
    }

    /// Records `deficit = lhs - rhs` of an inequality `lhs <= rhs + allowance`.
    fn record<T: Real>(&mut self, deficit: f64, allowance: f64, points: &[&Point<T>]) {
        self.samples_tested += 1;
        if !deficit.is_finite() {
            self.skipped += 1;
            self.samples_tested -= 1;
            return;
        }
        self.max_abs_residual = self.max_abs_residual.max(deficit.abs());
        if deficit > allowance {
            self.violations += 1;
        }
        if deficit > self.worst_residual {
            self.worst_residual = deficit;
            if deficit > allowance {
                let points = points.iter().map(|p| p.flatten().iter().map(|v| v.as_f64()).collect()).collect();
                self.witness = Some(Witness { points, residual: deficit });
            }
        }
    }
}

/// `f(y) - f(x) >= <eta(y, x), grad f(x)> - tol (1 + |f(x)|)`.
///
/// Residuals are reported divided by `1 + |f(x)|`, so `worst_residual`
/// compares directly against `tol`.
pub fn check_invexity<T: Real>(
    f: &dyn Objective<T>,
    eta: &dyn Geometry<T>,
    sampler: &mut dyn FnMut() -> (Point<T>, Point<T>),
    n_samples: usize,
    tol: f64,
) -> ProbeReport {
    let mut report = ProbeReport::new(tol);
    for _ in 0..n_samples {
        let (x, y) = sampler();
        let eval = || -> Option<f64> {
            let fx = f.value(&x).ok()?;
            let fy = f.value(&y).ok()?;
            let g = f.gradient(&x).ok()?;
            let e = eta.eta(&y, &x).ok()?;
            let lin = e.dot(&g).ok()?;
            Some((lin - (fy - fx)).as_f64() / (1.0 + fx.as_f64().abs()))
        };
        match eval() {
            Some(deficit) => report.record(deficit, tol, &[&x, &y]),
            None => report.skipped += 1,
        }
    }
    report
}

/// `|eta(y, z)|^2 <= |eta(x, z)|^2 + b |eta(y, x)|^2 - c <eta(y, x), eta(z, x)> + tol`.
pub fn check_triangle<T: Real>(
    eta: &dyn Geometry<T>,
    sampler: &mut dyn FnMut() -> (Point<T>, Point<T>, Point<T>),
    b: f64,
    c: f64,
    n_samples: usize,
    tol: f64,
) -> ProbeReport {
    let mut report = ProbeReport::new(tol);
    for _ in 0..n_samples {
        let (x, y, z) = sampler();
        let eval = || -> Option<f64> {
            let yz = eta.eta(&y, &z).ok()?;
            let xz = eta.eta(&x, &z).ok()?;
            let yx = eta.eta(&y, &x).ok()?;
            let zx = eta.eta(&z, &x).ok()?;
            let lhs = yz.norm_squared().as_f64();
            let rhs = xz.norm_squared().as_f64() + b * yx.norm_squared().as_f64() - c * yx.dot(&zx).ok()?.as_f64();
            Some(lhs - rhs)
        };
        match eval() {
            Some(deficit) => report.record(deficit, tol, &[&x, &y, &z]),
            None => report.skipped += 1,
        }
    }
    report
}

/// `|eta(P y, P x)| <= |eta(y, x)| + tol` for the projection `P`.
pub fn check_contraction<T: Real>(
    projector: &dyn Projector<T>,
    eta: &dyn Geometry<T>,
    sampler: &mut dyn FnMut() -> (Point<T>, Point<T>),
    n_samples: usize,
    tol: f64,
) -> ProbeReport {
    let mut report = ProbeReport::new(tol);
    for _ in 0..n_samples {
        let (x, y) = sampler();
        let eval = || -> Option<f64> {
            let px = projector.project(&x).ok()?;
            let py = projector.project(&y).ok()?;
            let after = eta.eta(&py, &px).ok()?.norm().as_f64();
            let before = eta.eta(&y, &x).ok()?.norm().as_f64();
            Some(after - before)
        };
        match eval() {
            Some(deficit) => report.record(deficit, tol, &[&x, &y]),
            None => report.skipped += 1,
        }
    }
    report
}

/// `|grad f(x)|^2 >= mu (f(x) - f*) - tol (1 + |f(x)|)`.
pub fn check_pl<T: Real>(
    f: &dyn Objective<T>,
    f_star: f64,
    mu: f64,
    sampler: &mut dyn FnMut() -> Point<T>,
    n_samples: usize,
    tol: f64,
) -> ProbeReport {
    let mut report = ProbeReport::new(tol);
    for _ in 0..n_samples {
        let x = sampler();
        let eval = || -> Option<f64> {
            let fx = f.value(&x).ok()?.as_f64();
            let g2 = f.gradient(&x).ok()?.norm_squared().as_f64();
            Some((mu * (fx - f_star) - g2) / (1.0 + fx.abs()))
        };
        match eval() {
            Some(deficit) => report.record(deficit, tol, &[&x]),
            None => report.skipped += 1,
        }
    }
    report
}

/// Largest sampled `2 (f(y) - f(x) - <eta(y, x), grad f(x)>) / |eta(y, x)|^2`,
/// floored at zero. A lower bound on the smoothness constant; pairs with a
/// vanishing kernel are skipped.
pub fn estimate_smoothness<T: Real>(
    f: &dyn Objective<T>,
    eta: &dyn Geometry<T>,
    sampler: &mut dyn FnMut() -> (Point<T>, Point<T>),
    n_samples: usize,
) -> f64 {
    let mut best = 0.0f64;
    for _ in 0..n_samples {
        let (x, y) = sampler();
        let eval = || -> Option<f64> {
            let fx = f.value(&x).ok()?.as_f64();
            let fy = f.value(&y).ok()?.as_f64();
            let e = eta.eta(&y, &x).ok()?;
            let lin = e.dot(&f.gradient(&x).ok()?).ok()?.as_f64();
            let e2 = e.norm_squared().as_f64();
            (e2 > 0.0).then(|| 2.0 * (fy - fx - lin) / e2)
        };
        if let Some(v) = eval().filter(|v| v.is_finite()) {
            best = best.max(v);
        }
    }
    best
}

/// Largest sampled `|eta(y, x)|^2 / |eta(x, y)|^2`, the constant `R` of the
/// linear-rate theorem. Pairs with `eta(x, y) = 0` are skipped.
pub fn estimate_symmetry_ratio<T: Real>(
    eta: &dyn Geometry<T>,
    sampler: &mut dyn FnMut() -> (Point<T>, Point<T>),
    n_samples: usize,
) -> f64 {
    let mut best = 0.0f64;
    for _ in 0..n_samples {
        let (x, y) = sampler();
        let eval = || -> Option<f64> {
            let fwd = eta.eta(&y, &x).ok()?.norm_squared().as_f64();
            let back = eta.eta(&x, &y).ok()?.norm_squared().as_f64();
            (back > 0.0).then(|| fwd / back)
        };
        if let Some(v) = eval().filter(|v| v.is_finite()) {
            best = best.max(v);
        }
    }
    best
}
