//! Turning a configuration into a runnable program and writing its outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use invexopt::geometry::Euclidean;
use invexopt::problems::dag::{dag_generate, dense_normal_init, scale_to_radius, DagGeometry, GENERATED_RADIUS, DagParams, DagProblem};
use invexopt::problems::fair::{fair_generate, fair_initial_point, FairMode, FairParams, FairProgram};
use invexopt::problems::io::{self, DenseArray, InstanceDocument};
use invexopt::problems::mlr::{mlr_generate, mlr_initial_point, MlrMode, MlrParams, MlrProgram};
use invexopt::problems::quadratic::Quadratic;
use invexopt::verify::estimate_smoothness;
use invexopt::{
    igd_run, pigd_run, Geometry, Objective, Point, ProblemError, Program, ProblemSpec, Real, RunOptions, RunOutcome, Status, StepSchedule,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{Algorithm, DagInit, ExperimentConfig, ProblemKind};
use crate::error::CliError;

/// Offset between the instance seed and the initial-point seed.
const INIT_SEED_OFFSET: u64 = 1;
const SMOOTHNESS_SAMPLES: usize = 200;

pub struct Experiment {
    pub program: Box<dyn Program<f64>>,
    pub x0: Point<f64>,
    pub instance: InstanceDocument,
    pub geometry: &'static str,
    smoothness: Box<dyn Fn() -> Result<f64, CliError>>,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_vector(r: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.sample(StandardNormal))
}

/// `Q diag(lambda) Q^T` with log-spaced eigenvalues and a random rotation.
fn quadratic_instance(d: usize, lo: f64, hi: f64, seed: u64) -> Result<Quadratic<f64>, CliError> {
    let mut r = rng(seed);
    let g = DMatrix::from_fn(d, d, |_, _| r.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let spectrum = DVector::from_fn(d, |i, _| {
        if d == 1 {
            hi
        } else {
            (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (d - 1) as f64).exp()
        }
    });
    let a = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    Ok(Quadratic::new(a, gaussian_vector(&mut r, d))?)
}

fn sampled_smoothness(
    f: Arc<dyn Objective<f64>>,
    eta: Arc<dyn Geometry<f64>>,
    draw: impl Fn(u64) -> Result<Point<f64>, CliError> + 'static,
    seed: u64,
) -> Box<dyn Fn() -> Result<f64, CliError>> {
    Box::new(move || {
        let points = (0..2 * SMOOTHNESS_SAMPLES as u64).map(|k| draw(seed.wrapping_add(1000 + k))).collect::<Result<Vec<_>, _>>()?;
        let mut pairs = points.chunks(2).map(|c| (c[0].clone(), c[1].clone()));
        let mut sampler = || pairs.next().expect("enough sample pairs");
        Ok(estimate_smoothness(f.as_ref(), eta.as_ref(), &mut sampler, SMOOTHNESS_SAMPLES))
    })
}

impl Experiment {
    pub fn build(config: &ExperimentConfig) -> Result<Self, CliError> {
        let g = &config.generator;
        let (n, d) = (config.dims.n, config.dims.d);
        let seed = config.seed;
        let init_seed = seed.wrapping_add(INIT_SEED_OFFSET);
        let invex = config.algorithm.invex();
        match config.problem {
            ProblemKind::Dag => {
                let radius = g.init_radius.unwrap_or(0.5);
                let params = DagParams {
                    d,
                    edge_prob: g.edge_prob.unwrap_or(0.2),
                    weight_scale: g.weight_scale.unwrap_or(1.0),
                    cyclic: true,
                    seed,
                };
                let w0 = match g.init.unwrap_or(DagInit::DenseNormal) {
                    DagInit::DenseNormal => dense_normal_init(d, radius, seed)?,
                    DagInit::SparseCyclic => scale_to_radius(&dag_generate::<f64>(params)?.w, radius)?,
                };
                let mut arrays = BTreeMap::new();
                arrays.insert("W".to_string(), DenseArray::from_matrix(&w0));
                let instance = InstanceDocument {
                    problem: "dag".into(),
                    dims: io::Dims { n: d, d },
                    seed,
                    params: serde_json::json!({ "init": g.init.unwrap_or(DagInit::DenseNormal), "init_radius": radius, "edge_prob": params.edge_prob, "weight_scale": params.weight_scale }),
                    arrays,
                };
                let f: Arc<dyn Objective<f64>> = Arc::new(DagProblem::<f64>::new(d));
                let eta: Arc<dyn Geometry<f64>> = if invex { Arc::new(DagGeometry) } else { Arc::new(Euclidean) };
                // `h` is not globally smooth; sample up to the generator's
                // radius cap so the estimate covers the steep region.
                let draw = move |s: u64| -> Result<Point<f64>, CliError> {
                    let r = 0.05 + (GENERATED_RADIUS - 0.05) * rng(s).random::<f64>();
                    Ok(Point::from_matrix(dense_normal_init(d, r, s)?))
                };
                Ok(Self {
                    program: Box::new(ProblemSpec::new(f.clone(), eta)),
                    x0: Point::from_matrix(w0),
                    instance,
                    geometry: if invex { "log_det" } else { "euclidean" },
                    // Estimated under the Euclidean kernel for both algorithms:
                    // the log-det kernel is unbounded near zero entries, which
                    // drives its sampled constant towards zero.
                    smoothness: sampled_smoothness(f, Arc::new(Euclidean), draw, seed),
                })
            }
            ProblemKind::FairLasso => {
                let params = FairParams {
                    n,
                    d,
                    gamma: g.gamma.unwrap_or(1.0),
                    sparsity: g.sparsity.unwrap_or(d.min(10)),
                    noise_sigma: g.noise_sigma.unwrap_or(0.1),
                    seed,
                };
                let inst = Arc::new(fair_generate::<f64>(params)?.with_lambda(config.lambda.unwrap_or(0.1)));
                let mode = if invex { FairMode::Invex } else { FairMode::Euclidean };
                // Curvature of the `w` block, `2 lambda_max(X^T X) / n`; the
                // objective is linear in `Z` and `Z_11 = 1` on the feasible set.
                let gram = inst.x.transpose() * &inst.x;
                let top = f64::symmetric_eigenvalues(&gram).map_err(ProblemError::from)?.max();
                let l = 2.0 * top / n as f64;
                Ok(Self {
                    program: Box::new(FairProgram::new(inst.clone(), mode)),
                    x0: fair_initial_point(&inst, init_seed),
                    instance: io::fair_document(&inst),
                    geometry: if invex { "fair_arrow" } else { "euclidean" },
                    smoothness: Box::new(move || Ok(l)),
                })
            }
            ProblemKind::Mlr => {
                let params = MlrParams {
                    n,
                    d,
                    separation: g.separation.unwrap_or(1.0),
                    noise_sigma: g.noise_sigma.unwrap_or(0.1),
                    seed,
                };
                let lambda = config.lambda.unwrap_or(0.1);
                let inst = Arc::new(mlr_generate::<f64>(params)?.with_lambdas(lambda, config.lambda2.unwrap_or(lambda)));
                let mode = if invex { MlrMode::Invex } else { MlrMode::Euclidean };
                let exact = inst.clone();
                Ok(Self {
                    program: Box::new(MlrProgram::new(inst.clone(), mode)),
                    x0: mlr_initial_point(&inst, init_seed),
                    instance: io::mlr_document(&inst),
                    geometry: if invex { "mlr_tau" } else { "euclidean" },
                    smoothness: Box::new(move || Ok(exact.smoothness()?)),
                })
            }
            ProblemKind::CustomQuadratic => {
                let lo = g.curvature_min.unwrap_or(0.1);
                let hi = g.curvature_max.unwrap_or(lo.max(1.0));
                if lo > hi {
                    return Err(CliError::Config("generator.curvature_min exceeds the default curvature_max of 1".into()));
                }
                let q = quadratic_instance(d, lo, hi, seed)?;
                let mut arrays = BTreeMap::new();
                arrays.insert("A".to_string(), DenseArray::from_matrix(&q.a));
                arrays.insert("b".to_string(), DenseArray::from_vector(&q.b));
                let instance = InstanceDocument {
                    problem: "custom_quadratic".into(),
                    dims: io::Dims { n: d, d },
                    seed,
                    params: serde_json::json!({ "curvature_min": lo, "curvature_max": hi }),
                    arrays,
                };
                let top = q.curvature_bounds()?.0;
                let x0 = Point::from_vector(gaussian_vector(&mut rng(init_seed), d));
                Ok(Self {
                    program: Box::new(ProblemSpec::new(Arc::new(q), Arc::new(Euclidean))),
                    x0,
                    instance,
                    geometry: "euclidean",
                    smoothness: Box::new(move || Ok(top)),
                })
            }
        }
    }

    /// The configured step, or `1 / L` for the (estimated) smoothness `L`.
    pub fn step(&self, config: &ExperimentConfig) -> Result<StepChoice, CliError> {
        if let Some(alpha) = config.alpha {
            return Ok(StepChoice { alpha, source: "config", smoothness: None });
        }
        let l = (self.smoothness)()?;
        if !(l.is_finite() && l > 0.0) {
            return Err(CliError::Config(format!("smoothness estimate {l} gives no usable step; set alpha")));
        }
        Ok(StepChoice { alpha: 1.0 / l, source: "smoothness", smoothness: Some(l) })
    }

    pub fn run(&self, config: &ExperimentConfig, alpha: f64) -> Result<RunOutcome<f64>, CliError> {
        let schedule = StepSchedule::constant(alpha)?;
        let mut options = RunOptions::new(config.max_iter, config.grad_tol);
        options.objective_target = config.objective_target;
        let out = if config.algorithm.projected() {
            pigd_run(self.program.as_ref(), &self.x0, &schedule, &options)?
        } else {
            igd_run(self.program.as_ref(), &self.x0, &schedule, &options)?
        };
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepChoice {
    pub alpha: f64,
    /// `config` or `smoothness`.
    pub source: &'static str,
    pub smoothness: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub problem: &'static str,
    pub algorithm: Algorithm,
    pub geometry: &'static str,
    pub seed: u64,
    pub status: Status,
    pub message: Option<String>,
    pub failed_iteration: Option<usize>,
    pub iterations: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub final_grad_norm: f64,
    pub step: StepChoice,
    pub objective_target: Option<f64>,
    pub iterations_to_target: Option<usize>,
    pub elapsed_ms: f64,
    pub config: ExperimentConfig,
}

impl RunReport {
    pub fn new(config: &ExperimentConfig, exp: &Experiment, step: StepChoice, out: &RunOutcome<f64>) -> Self {
        let t = &out.trace;
        Self {
            problem: config.problem.name(),
            algorithm: config.algorithm,
            geometry: exp.geometry,
            seed: config.seed,
            status: t.status,
            message: t.message.clone(),
            failed_iteration: t.failed_iteration,
            iterations: t.len() - 1,
            initial_objective: t.rows[0].objective,
            final_objective: t.final_objective(),
            final_grad_norm: t.last().grad_norm,
            step,
            objective_target: config.objective_target,
            iterations_to_target: config.objective_target.and_then(|v| t.iterations_to(v)),
            elapsed_ms: t.last().elapsed_ms,
            config: config.clone(),
        }
    }

    pub fn solver_failed(&self) -> bool {
        matches!(self.status, Status::Diverged | Status::StepSolveFailed)
    }
}

pub fn trace_csv(out: &RunOutcome<f64>) -> String {
    let mut s = String::from("iter,objective,grad_norm,step_norm,elapsed_ms\n");
    for r in &out.trace.rows {
        writeln!(s, "{},{:.16e},{:.16e},{:.16e},{:.3}", r.iter, r.objective, r.grad_norm, r.step_norm, r.elapsed_ms).unwrap();
    }
    s
}

pub fn point_json(p: &Point<f64>) -> String {
    serde_json::to_string_pretty(&io::point_arrays(p)).expect("point serialises")
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })
}

/// Runs one configuration and writes trace, report, instance and start point.
pub fn run_into(config: &ExperimentConfig, dir: &Path) -> Result<RunReport, CliError> {
    let exp = Experiment::build(config)?;
    let step = exp.step(config)?;
    let out = exp.run(config, step.alpha)?;
    let report = RunReport::new(config, &exp, step, &out);
    create_dir(dir)?;
    write_file(dir, "trace.csv", &trace_csv(&out))?;
    write_file(dir, "instance.json", &exp.instance.to_json())?;
    write_file(dir, "initial_point.json", &point_json(&exp.x0))?;
    write_file(dir, "report.json", &serde_json::to_string_pretty(&report).expect("report serialises"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json).unwrap()
    }

    #[test]
    fn quadratic_step_defaults_to_inverse_curvature() {
        let c = config(r#"{"problem": "custom_quadratic", "algorithm": "gd", "dims": {"d": 6}, "seed": 3,
            "generator": {"curvature_min": 0.5, "curvature_max": 4.0}}"#);
        let exp = Experiment::build(&c).unwrap();
        let step = exp.step(&c).unwrap();
        assert!((step.alpha - 0.25).abs() < 1e-12, "{step:?}");
        let out = exp.run(&c, step.alpha).unwrap();
        assert_eq!(out.trace.status, Status::Converged);
        assert!(out.trace.objectives().windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn csv_rows_match_trace() {
        let c = config(r#"{"problem": "custom_quadratic", "algorithm": "igd", "dims": {"d": 2}, "seed": 0, "alpha": 0.5, "max_iter": 3}"#);
        let exp = Experiment::build(&c).unwrap();
        let csv = trace_csv(&exp.run(&c, 0.5).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iter,objective,grad_norm,step_norm,elapsed_ms");
        assert_eq!(lines.len(), 5);
        let obj: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(obj, exp.program.value(&exp.x0).unwrap());
    }
}
