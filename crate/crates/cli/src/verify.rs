//! Batched assumption probes for one problem family.

use std::collections::BTreeMap;
use std::sync::Arc;

use invexopt::geometry::Euclidean;
use invexopt::kernels::DykstraSettings;
use invexopt::problems::dag::{scale_to_radius, DagGeometry, DagProblem};
use invexopt::problems::fair::{fair_generate, fair_initial_point, FairGeometry, FairParams, FairProjector, FairSmooth};
use invexopt::problems::mlr::{mlr_generate, MlrGeometry, MlrParams, MlrProjector, MlrSmooth};
use invexopt::problems::quadratic::Quadratic;
use invexopt::verify::{check_contraction, check_invexity, check_triangle, gradient_fd_check, ProbeReport};
use invexopt::{Geometry, Objective, Point, Projector};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::ProblemKind;
use crate::error::CliError;

const INVEXITY_SAMPLES: usize = 1000;
const INVEXITY_TOL: f64 = 1e-8;
const TRIANGLE_SAMPLES: usize = 1000;
const CONTRACTION_SAMPLES: usize = 500;
const PROBE_TOL: f64 = 1e-9;
const FD_POINTS: usize = 10;
const FD_EPSILON: f64 = 1e-6;
const FD_TOL: f64 = 1e-5;

#[derive(Debug, Serialize)]
pub struct FdReport {
    pub points: usize,
    pub epsilon: f64,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub problem: &'static str,
    pub seed: u64,
    pub passed: bool,
    pub invexity: ProbeReport,
    pub triangle: ProbeReport,
    pub contraction: BTreeMap<String, ProbeReport>,
    pub gradient_fd: FdReport,
}

type Draw = Box<dyn FnMut(&mut ChaCha8Rng) -> Point<f64>>;
type DrawPair = Box<dyn FnMut(&mut ChaCha8Rng) -> (Point<f64>, Point<f64>)>;

fn gauss(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn sym(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| gauss(r));
    (&a + a.transpose()) * 0.5
}

fn uniform(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.random_range(lo..hi))
}

/// Full-support matrix inside the acyclicity domain; the log-det kernel
/// divides by `W` entrywise.
fn dag_point(r: &mut ChaCha8Rng, d: usize) -> Point<f64> {
    let radius = r.random_range(0.05..0.9);
    let w = DMatrix::from_fn(d, d, |_, _| {
        let g = gauss(r);
        g.signum() * (g.abs() + 0.1)
    });
    Point::from_matrix(scale_to_radius(&w, radius).expect("radius is positive"))
}

struct Family {
    objective: Arc<dyn Objective<f64>>,
    geometry: Arc<dyn Geometry<f64>>,
    /// Draws `(x, y)` for the invexity probe.
    pairs: DrawPair,
    points: Draw,
    projectors: Vec<(&'static str, Box<dyn Projector<f64>>)>,
}

fn family(problem: ProblemKind, seed: u64) -> Result<Family, CliError> {
    Ok(match problem {
        ProblemKind::Dag => {
            let d = 5;
            Family {
                objective: Arc::new(DagProblem::<f64>::new(d)),
                geometry: Arc::new(DagGeometry),
                pairs: Box::new(move |r| (dag_point(r, d), dag_point(r, d))),
                points: Box::new(move |r| dag_point(r, d)),
                projectors: Vec::new(),
            }
        }
        ProblemKind::FairLasso => {
            let inst = Arc::new(fair_generate::<f64>(FairParams { n: 8, d: 4, gamma: 1.0, sparsity: 2, noise_sigma: 0.1, seed })?);
            let (n, d) = (inst.n(), inst.d());
            let draw = move |r: &mut ChaCha8Rng| Point::new().with_vector("w", uniform(r, d, -1.0, 1.0)).with_matrix("Z", sym(r, n + 1));
            // The inequality needs `Z_11 >= 0` at the base point, which every
            // feasible point has; sample correlation matrices.
            let feasible = inst.clone();
            Family {
                objective: Arc::new(FairSmooth(inst.clone())),
                geometry: Arc::new(FairGeometry(inst)),
                pairs: Box::new(move |r| (fair_initial_point(&feasible, r.random()), fair_initial_point(&feasible, r.random()))),
                points: Box::new(draw),
                projectors: vec![("fair", Box::new(FairProjector::new(DykstraSettings::new(1e-12, 20_000).with_anderson(5))))],
            }
        }
        ProblemKind::Mlr => {
            let inst = Arc::new(mlr_generate::<f64>(MlrParams { n: 12, d: 3, separation: 1.0, noise_sigma: 0.1, seed })?);
            let (n, k) = (inst.n(), inst.order());
            let draw = move |r: &mut ChaCha8Rng| {
                Point::new().with_vector("t", uniform(r, n, -1.0, 1.0)).with_matrix("W", sym(r, k)).with_matrix("U", sym(r, k))
            };
            let probe_inst = inst.clone();
            // The kernel divides by <X_i, W - U>; keep base points away from
            // the singular set.
            let pairs = move |r: &mut ChaCha8Rng| loop {
                let (x, y) = (draw(r), draw(r));
                let den = probe_inst.inner_all(&(x.matrix("W").unwrap() - x.matrix("U").unwrap()));
                if den.iter().all(|v| v.abs() >= 1e-3) {
                    return (x, y);
                }
            };
            Family {
                objective: Arc::new(MlrSmooth(inst.clone())),
                geometry: Arc::new(MlrGeometry(inst)),
                pairs: Box::new(pairs),
                points: Box::new(draw),
                projectors: vec![("mlr", Box::new(MlrProjector { settings: DykstraSettings::new(1e-12, 20_000) }))],
            }
        }
        ProblemKind::CustomQuadratic => {
            let d = 5;
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let g = DMatrix::from_fn(d, d, |_, _| gauss(&mut r));
            let a = &g * g.transpose() + DMatrix::identity(d, d) * 0.1;
            let q = Quadratic::new((&a + a.transpose()) * 0.5, uniform(&mut r, d, -1.0, 1.0))?;
            let draw = move |r: &mut ChaCha8Rng| Point::from_vector(uniform(r, d, -5.0, 5.0));
            Family {
                objective: Arc::new(q),
                geometry: Arc::new(Euclidean),
                pairs: Box::new(move |r| (draw(r), draw(r))),
                points: Box::new(draw),
                projectors: Vec::new(),
            }
        }
    })
}

pub fn verify_suite(problem: ProblemKind, seed: u64) -> Result<VerifyReport, CliError> {
    let mut fam = family(problem, seed)?;
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);

    let invexity = {
        let mut sampler = || (fam.pairs)(&mut r);
        check_invexity(fam.objective.as_ref(), fam.geometry.as_ref(), &mut sampler, INVEXITY_SAMPLES, INVEXITY_TOL)
    };
    let triangle = {
        let mut sampler = || ((fam.points)(&mut r), (fam.points)(&mut r), (fam.points)(&mut r));
        check_triangle(&Euclidean, &mut sampler, 1.0, 2.0, TRIANGLE_SAMPLES, PROBE_TOL)
    };
    let mut contraction = BTreeMap::new();
    for (name, proj) in &fam.projectors {
        let mut sampler = || ((fam.points)(&mut r), (fam.points)(&mut r));
        contraction.insert(name.to_string(), check_contraction(proj.as_ref(), &Euclidean, &mut sampler, CONTRACTION_SAMPLES, PROBE_TOL));
    }
    let mut worst: f64 = 0.0;
    for _ in 0..FD_POINTS {
        let x = (fam.points)(&mut r);
        let err = gradient_fd_check(fam.objective.as_ref(), &x, FD_EPSILON).map_err(|e| CliError::Config(e.to_string()))?;
        worst = worst.max(err);
    }
    let gradient_fd =
        FdReport { points: FD_POINTS, epsilon: FD_EPSILON, max_relative_error: worst, tolerance: FD_TOL, passed: worst <= FD_TOL };
    let passed = invexity.passed() && triangle.passed() && contraction.values().all(|c| c.passed()) && gradient_fd.passed;
    Ok(VerifyReport { problem: problem.name(), seed, passed, invexity, triangle, contraction, gradient_fd })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dag_suite_passes_with_tiny_residual() {
        let rep = verify_suite(ProblemKind::Dag, 3).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.invexity.max_abs_residual <= 1e-8);
        assert!(rep.contraction.is_empty());
    }

    #[test]
    fn fair_suite_passes() {
        let rep = verify_suite(ProblemKind::FairLasso, 2).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.contraction["fair"].violations, 0);
    }

    #[test]
    fn quadratic_suite_passes() {
        assert!(verify_suite(ProblemKind::CustomQuadratic, 1).unwrap().passed);
    }
}
