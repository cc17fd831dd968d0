//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Dag,
    FairLasso,
    Mlr,
    CustomQuadratic,
}

impl ProblemKind {
    pub fn constrained(self) -> bool {
        matches!(self, Self::FairLasso | Self::Mlr)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Dag => "dag",
            Self::FairLasso => "fair_lasso",
            Self::Mlr => "mlr",
            Self::CustomQuadratic => "custom_quadratic",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(name.to_string())).ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Igd,
    Pigd,
    Gd,
    Pgd,
}

impl Algorithm {
    /// Invex geometry (as opposed to the Euclidean baseline).
    pub fn invex(self) -> bool {
        matches!(self, Self::Igd | Self::Pigd)
    }

    pub fn projected(self) -> bool {
        matches!(self, Self::Pigd | Self::Pgd)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    #[serde(default)]
    pub n: usize,
    pub d: usize,
}

/// How the DAG starting matrix is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DagInit {
    /// Dense Gaussian off-diagonal entries.
    DenseNormal,
    /// A sparse random cyclic graph.
    SparseCyclic,
}

/// Data-generator knobs; only the ones relevant to the problem may be set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub init: Option<DagInit>,
    pub init_radius: Option<f64>,
    pub edge_prob: Option<f64>,
    pub weight_scale: Option<f64>,
    pub gamma: Option<f64>,
    pub sparsity: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub separation: Option<f64>,
    pub curvature_min: Option<f64>,
    pub curvature_max: Option<f64>,
}

impl Generator {
    fn set_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut mark = |set: bool, name| {
            if set {
                out.push(name)
            }
        };
        mark(self.init.is_some(), "init");
        mark(self.init_radius.is_some(), "init_radius");
        mark(self.edge_prob.is_some(), "edge_prob");
        mark(self.weight_scale.is_some(), "weight_scale");
        mark(self.gamma.is_some(), "gamma");
        mark(self.sparsity.is_some(), "sparsity");
        mark(self.noise_sigma.is_some(), "noise_sigma");
        mark(self.separation.is_some(), "separation");
        mark(self.curvature_min.is_some(), "curvature_min");
        mark(self.curvature_max.is_some(), "curvature_max");
        out
    }
}

fn default_max_iter() -> usize {
    1000
}

fn default_grad_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub algorithm: Algorithm,
    pub dims: Dims,
    #[serde(default)]
    pub generator: Generator,
    /// Step size; estimated from the smoothness constant when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub lambda2: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default)]
    pub objective_target: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_range(name: &str, v: Option<f64>, ok: impl Fn(f64) -> bool, rule: &str) -> Result<(), CliError> {
    match v {
        Some(x) if !(x.is_finite() && ok(x)) => Err(invalid(format!("{name} must be {rule}, got {x}"))),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = self.problem;
        if p.constrained() != self.algorithm.projected() {
            let allowed = if p.constrained() { "pigd or pgd" } else { "igd or gd" };
            return Err(invalid(format!("{} requires algorithm {allowed}", p.name())));
        }
        match p {
            ProblemKind::Dag if self.dims.d < 2 => return Err(invalid("dag needs dims.d >= 2")),
            ProblemKind::FairLasso | ProblemKind::Mlr if self.dims.n == 0 || self.dims.d == 0 => {
                return Err(invalid(format!("{} needs positive dims.n and dims.d", p.name())))
            }
            _ if self.dims.d == 0 => return Err(invalid("dims.d must be positive")),
            _ => {}
        }
        let allowed: &[&str] = match p {
            ProblemKind::Dag => &["init", "init_radius", "edge_prob", "weight_scale"],
            ProblemKind::FairLasso => &["gamma", "sparsity", "noise_sigma"],
            ProblemKind::Mlr => &["separation", "noise_sigma"],
            ProblemKind::CustomQuadratic => &["curvature_min", "curvature_max"],
        };
        if let Some(field) = self.generator.set_fields().into_iter().find(|f| !allowed.contains(f)) {
            return Err(invalid(format!("generator.{field} does not apply to {}", p.name())));
        }
        let g = &self.generator;
        check_range("alpha", self.alpha, |x| x >= 0.0, "finite and nonnegative")?;
        check_range("lambda", self.lambda, |x| x >= 0.0, "finite and nonnegative")?;
        check_range("lambda2", self.lambda2, |x| x >= 0.0, "finite and nonnegative")?;
        check_range("grad_tol", Some(self.grad_tol), |x| x >= 0.0, "finite and nonnegative")?;
        check_range("objective_target", self.objective_target, |_| true, "finite")?;
        check_range("generator.init_radius", g.init_radius, |x| x > 0.0 && x < 1.0, "in (0, 1)")?;
        check_range("generator.edge_prob", g.edge_prob, |x| (0.0..=1.0).contains(&x), "in [0, 1]")?;
        check_range("generator.weight_scale", g.weight_scale, |x| x > 0.0, "positive")?;
        check_range("generator.gamma", g.gamma, |x| x >= 0.0, "nonnegative")?;
        check_range("generator.noise_sigma", g.noise_sigma, |x| x >= 0.0, "nonnegative")?;
        check_range("generator.separation", g.separation, |x| x > 0.0, "positive")?;
        check_range("generator.curvature_min", g.curvature_min, |x| x > 0.0, "positive")?;
        check_range("generator.curvature_max", g.curvature_max, |x| x > 0.0, "positive")?;
        if let (Some(lo), Some(hi)) = (g.curvature_min, g.curvature_max) {
            if lo > hi {
                return Err(invalid("generator.curvature_min exceeds curvature_max"));
            }
        }
        if let Some(s) = g.sparsity {
            if s == 0 || s > self.dims.d {
                return Err(invalid(format!("generator.sparsity must be in 1..={}", self.dims.d)));
            }
        }
        if self.lambda2.is_some() && p != ProblemKind::Mlr {
            return Err(invalid(format!("lambda2 does not apply to {}", p.name())));
        }
        if self.lambda.is_some() && !p.constrained() {
            return Err(invalid(format!("lambda does not apply to {}", p.name())));
        }
        Ok(())
    }

    /// Everything except the algorithm and the output location.
    pub fn same_experiment(&self, other: &Self) -> Result<(), CliError> {
        if self.seed != other.seed {
            return Err(invalid(format!("configs use different seeds ({} and {})", self.seed, other.seed)));
        }
        let strip = |c: &Self| Self { algorithm: Algorithm::Igd, output_path: None, ..c.clone() };
        if strip(self) != strip(other) {
            return Err(invalid("configs may differ only in algorithm and output_path"));
        }
        if self.algorithm == other.algorithm {
            return Err(invalid("configs use the same algorithm"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(extra: &str) -> String {
        format!(r#"{{"problem": "dag", "algorithm": "igd", "dims": {{"d": 5}}, "seed": 1{extra}}}"#)
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_json(&dag("")).unwrap();
        assert_eq!(c.max_iter, 1000);
        assert_eq!(c.alpha, None);
        assert_eq!(c.dims.n, 0);
    }

    #[test]
    fn rejects_bad_configs() {
        for extra in [
            r#", "alpha": -1"#,
            r#", "lambda": 0.1"#,
            r#", "generator": {"gamma": 1}"#,
            r#", "generator": {"init_radius": 1.5}"#,
            r#", "typo": 3"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(&dag(extra)), Err(CliError::Config(_))), "{extra}");
        }
        let wrong_algo = r#"{"problem": "mlr", "algorithm": "igd", "dims": {"n": 5, "d": 2}, "seed": 1}"#;
        assert!(ExperimentConfig::from_json(wrong_algo).is_err());
        let unknown = r#"{"problem": "lasso", "algorithm": "igd", "dims": {"d": 2}, "seed": 1}"#;
        assert!(ExperimentConfig::from_json(unknown).is_err());
    }

    #[test]
    fn comparison_pairs() {
        let a = ExperimentConfig::from_json(&dag("")).unwrap();
        let b = ExperimentConfig { algorithm: Algorithm::Gd, output_path: Some("x".into()), ..a.clone() };
        assert!(a.same_experiment(&b).is_ok());
        assert!(a.same_experiment(&a).is_err());
        assert!(a.same_experiment(&ExperimentConfig { seed: 2, ..b.clone() }).is_err());
        assert!(a.same_experiment(&ExperimentConfig { max_iter: 7, ..b }).is_err());
    }

    #[test]
    fn problem_names_round_trip() {
        for p in [ProblemKind::Dag, ProblemKind::FairLasso, ProblemKind::Mlr, ProblemKind::CustomQuadratic] {
            assert_eq!(ProblemKind::parse(p.name()), Some(p));
        }
        assert_eq!(ProblemKind::parse("nope"), None);
    }
}
