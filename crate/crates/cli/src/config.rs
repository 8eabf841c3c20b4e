//! Experiment configuration files.
//!
//! A config is a TOML document with four sections. Every key has a default,
//! unknown keys are rejected, and `section.key=value` overrides are applied to
//! the parsed document before it is typed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trsvr::drivers::{Optimizer, RunConfig, Subproblem};
use trsvr::estimators::SamplingMode;
use trsvr::problems::{self, Loss, SynthKind};
use trsvr::trust_region::{HessianMode, RadiusMode};
use trsvr::{Exec, FiniteSum};

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TRSVR_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub optimizer: OptimizerSection,
    pub theory: TheorySection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    /// `least_squares`, `logistic` or `robust_nonconvex`.
    pub kind: String,
    pub reg: f64,
    /// LIBSVM file; synthetic data is generated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub libsvm: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
    /// `gaussian_ls` or `separable_logistic`; follows `kind` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth_kind: Option<String>,
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    pub data_seed: u64,
    pub normalize_rows: bool,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            kind: "least_squares".into(),
            reg: 0.0,
            libsvm: None,
            feature_dim: None,
            synth_kind: None,
            n: 100,
            d: 10,
            noise: 0.1,
            data_seed: 0,
            normalize_rows: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    /// `trsvr`, `svrg`, `sgd` or `tr_deterministic`.
    pub algorithm: String,
    pub b: usize,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub alpha: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// `proportional` or `clipped`.
    pub radius_policy: String,
    /// `identity`, `exact_hvp`, `diagonal` or `lbfgs`.
    pub hessian: String,
    pub hessian_scale: f64,
    pub lbfgs_memory: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hessian_cap: Option<f64>,
    /// `cauchy` or `steihaug`.
    pub subproblem: String,
    pub cg_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_max_iter: Option<usize>,
    /// `without_replacement` or `with_replacement`.
    pub sampling: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_budget: Option<u64>,
    pub diag_every: usize,
    pub strict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    pub parallel: bool,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            algorithm: "trsvr".into(),
            b: 1,
            inner_iters: 10,
            outer_iters: 10,
            alpha: 0.1,
            eta1: 10.0,
            eta2: 0.1,
            radius_policy: "proportional".into(),
            hessian: "identity".into(),
            hessian_scale: 1.0,
            lbfgs_memory: 5,
            hessian_cap: None,
            subproblem: "steihaug".into(),
            cg_tol: 1e-8,
            cg_max_iter: None,
            sampling: "without_replacement".into(),
            seed: 0,
            x0: None,
            initial_radius: None,
            grad_tol: None,
            eval_budget: None,
            diag_every: 1,
            strict: false,
            snapshot_every: None,
            parallel: true,
        }
    }
}

/// Analysis settings. Constants left unset are estimated from the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheorySection {
    pub z: f64,
    /// Also search `z` over the grid and keep the best `Λ_min`.
    pub z_search: bool,
    pub sample_points: usize,
    pub sample_seed: u64,
    /// Random `(x_s, x_0)` pairs for the variance check.
    pub pairs: usize,
    /// Monte-Carlo trials; exact enumeration is used when absent and feasible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_trials: Option<usize>,
    pub replay_states: usize,
    pub replay_trials: usize,
    /// Number of seeds for the averaged-gradient bound.
    pub seeds: usize,
    /// Outer-loop indices `K` at which the bound is checked.
    pub k_values: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_grad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hessian_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_component: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_inf: Option<f64>,
}

impl Default for TheorySection {
    fn default() -> Self {
        Self {
            z: 1.0,
            z_search: true,
            sample_points: 8,
            sample_seed: 1,
            pairs: 50,
            mc_trials: None,
            replay_states: 10,
            replay_trials: 1000,
            seeds: 20,
            k_values: vec![10, 20, 40],
            lipschitz_grad: None,
            hessian_bound: None,
            approx_bound: None,
            lipschitz_component: None,
            sigma_g: None,
            f_inf: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Output directory; `$TRSVR_OUT_DIR` or `.` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// File stem for everything this config writes.
    pub name: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            name: "run".into(),
        }
    }
}

impl OutputSection {
    pub fn resolve_dir(&self) -> PathBuf {
        self.dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{key}: {msg}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            CliError::Validation(format!("config: {}", e.message()))
        })?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self, CliError> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Validation(format!("config: {}", e.message())))
    }

    /// Reads `path` and applies `section.key=value` overrides in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            CliError::Validation(format!("{}: {}", path.display(), e.message()))
        })?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build_problem(&self) -> Result<problems::LinearModelProblem, CliError> {
        let p = &self.problem;
        let loss: Loss = p
            .kind
            .parse()
            .map_err(|_| invalid("problem.kind", format!("unknown kind `{}`", p.kind)))?;
        let mut dataset = match &p.libsvm {
            Some(path) => {
                let file = std::fs::File::open(path)
                    .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
                problems::parse_libsvm(std::io::BufReader::new(file), p.feature_dim)
                    .map_err(|e| invalid("problem.libsvm", e))?
            }
            None => {
                let kind = match &p.synth_kind {
                    Some(k) => k.parse().map_err(|_| {
                        invalid("problem.synth_kind", format!("unknown kind `{k}`"))
                    })?,
                    None if loss == Loss::Logistic => SynthKind::SeparableLogistic,
                    None => SynthKind::GaussianLs,
                };
                if p.n == 0 {
                    return Err(invalid("problem.n", "must be positive"));
                }
                if p.d == 0 {
                    return Err(invalid("problem.d", "must be positive"));
                }
                problems::synth_data(p.data_seed, p.n, p.d, kind, p.noise)
                    .map_err(|e| invalid("problem.noise", e))?
            }
        };
        if p.normalize_rows {
            dataset.normalize_rows();
        }
        if !(p.reg >= 0.0) {
            return Err(invalid("problem.reg", "must be nonnegative"));
        }
        let exec = if self.optimizer.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        };
        problems::LinearModelProblem::new(dataset, p.reg, loss)
            .map(|pr| pr.with_exec(exec))
            .map_err(|e| invalid("problem", e))
    }

    /// Typed run configuration, validated against `problem`. Errors name the
    /// offending key.
    pub fn run_config(&self, problem: &dyn FiniteSum) -> Result<RunConfig, CliError> {
        let o = &self.optimizer;
        let optimizer: Optimizer = o.algorithm.parse().map_err(|_| {
            invalid(
                "optimizer.algorithm",
                format!("unknown optimizer `{}`", o.algorithm),
            )
        })?;
        let radius_mode = match o.radius_policy.as_str() {
            "proportional" => RadiusMode::Proportional,
            "clipped" => RadiusMode::Clipped,
            other => {
                return Err(invalid(
                    "optimizer.radius_policy",
                    format!("unknown policy `{other}`"),
                ))
            }
        };
        let hessian = match o.hessian.as_str() {
            "identity" => HessianMode::IdentityScaled(o.hessian_scale),
            "exact_hvp" => HessianMode::ExactHvp,
            "diagonal" => HessianMode::Diagonal,
            "lbfgs" => HessianMode::Lbfgs {
                memory: o.lbfgs_memory,
            },
            other => {
                return Err(invalid(
                    "optimizer.hessian",
                    format!("unknown mode `{other}`"),
                ))
            }
        };
        let subproblem = match o.subproblem.as_str() {
            "cauchy" => Subproblem::Cauchy,
            "steihaug" => Subproblem::Steihaug {
                tol: o.cg_tol,
                max_iter: o.cg_max_iter,
            },
            other => {
                return Err(invalid(
                    "optimizer.subproblem",
                    format!("unknown solver `{other}`"),
                ))
            }
        };
        let sampling = match o.sampling.as_str() {
            "without_replacement" => SamplingMode::WithoutReplacement,
            "with_replacement" => SamplingMode::WithReplacement,
            other => {
                return Err(invalid(
                    "optimizer.sampling",
                    format!("unknown mode `{other}`"),
                ))
            }
        };

        let n = problem.num_components();
        if o.b == 0 || o.b > n {
            return Err(invalid(
                "optimizer.b",
                format!("batch size {} must lie in [1, N = {n}]", o.b),
            ));
        }
        if o.inner_iters == 0 {
            return Err(invalid("optimizer.inner_iters", "must be >= 1"));
        }
        if !(o.alpha > 0.0) || !o.alpha.is_finite() {
            return Err(invalid("optimizer.alpha", "must be positive"));
        }
        if radius_mode == RadiusMode::Clipped && !(o.eta1 > o.eta2 && o.eta2 > 0.0) {
            return Err(invalid(
                "optimizer.eta1",
                "clipped policy needs eta1 > eta2 > 0",
            ));
        }
        if o.diag_every == 0 {
            return Err(invalid("optimizer.diag_every", "must be >= 1"));
        }
        if o.cg_tol <= 0.0 {
            return Err(invalid("optimizer.cg_tol", "must be positive"));
        }
        if let Some(x0) = &o.x0 {
            if x0.len() != problem.dim() {
                return Err(invalid(
                    "optimizer.x0",
                    format!("has dimension {}, problem has {}", x0.len(), problem.dim()),
                ));
            }
        }
        if matches!(hessian, HessianMode::ExactHvp | HessianMode::Diagonal)
            && problem
                .hessian_vector_product(&vec![0.0; problem.dim()], &vec![0.0; problem.dim()])
                .is_none()
        {
            return Err(invalid(
                "optimizer.hessian",
                "problem has no Hessian-vector products",
            ));
        }

        let cfg = RunConfig {
            optimizer,
            batch_size: o.b,
            inner_iters: o.inner_iters,
            outer_iters: o.outer_iters,
            alpha: o.alpha,
            eta1: o.eta1,
            eta2: o.eta2,
            radius_mode,
            hessian,
            hessian_cap: o.hessian_cap,
            subproblem,
            sampling,
            seed: o.seed,
            x0: o.x0.clone(),
            initial_radius: o.initial_radius,
            grad_tol: o.grad_tol,
            eval_budget: o.eval_budget,
            diag_every: o.diag_every,
            strict: o.strict,
            lipschitz_grad: problem.closed_form_constants().map(|c| c.lipschitz_grad),
            snapshot_every: o.snapshot_every,
            exec: if o.parallel {
                Exec::Parallel
            } else {
                Exec::Sequential
            },
        };
        cfg.validate(problem).map_err(|e| invalid("optimizer", e))?;
        Ok(cfg)
    }
}

/// Applies one `section.key=value` override. The value is read as a TOML
/// value, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        CliError::Validation(format!("override `{spec}` is not section.key=value"))
    })?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| CliError::Validation(format!("override key `{path}` is not section.key")))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Validation(format!(
            "`{section}` is not a section"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse("[optimizer]\nbatch = 3\n").unwrap_err();
        assert!(err.to_string().contains("batch"), "{err}");
    }

    #[test]
    fn overrides_parse_values() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "optimizer.seed=7").unwrap();
        apply_override(&mut t, "optimizer.algorithm=sgd").unwrap();
        apply_override(&mut t, "optimizer.x0=[1.0, 2.0]").unwrap();
        let c = ExperimentConfig::from_table(t).unwrap();
        assert_eq!(c.optimizer.seed, 7);
        assert_eq!(c.optimizer.algorithm, "sgd");
        assert_eq!(c.optimizer.x0, Some(vec![1.0, 2.0]));
        assert!(apply_override(&mut toml::Table::new(), "seed=3").is_err());
    }

    #[test]
    fn oversized_batch_names_key() {
        let mut c = ExperimentConfig::default();
        c.problem.n = 5;
        c.optimizer.b = 6;
        let p = c.build_problem().unwrap();
        let err = c.run_config(&p).unwrap_err();
        assert!(err.to_string().contains("optimizer.b"), "{err}");
    }
}
