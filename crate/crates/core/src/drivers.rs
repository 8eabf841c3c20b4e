//! Optimizer drivers producing a uniform per-inner-step trace.
//!
//! [`run_trsvr`] is the two-loop trust-region method with variance-reduced
//! gradients; [`run_sgd`], [`run_svrg`] and [`run_tr_deterministic`] are
//! baselines sharing the same trace format and evaluation accounting.

use std::str::FromStr;

use log::{trace, warn};

use crate::error::{Error, Result};
use crate::estimators::{self, BatchSampler, SamplingMode};
use crate::exec::{self, Exec};
use crate::linalg;
use crate::problem::{self, FiniteSum, GradientEstimate, IterateState, RandomSource};
use crate::trust_region::{
    self, check_cauchy_decrease, HessianMode, LbfgsMemory, RadiusMode, RadiusPolicy, Step,
};

/// Slack for the one-step decrease inequality checked in strict mode.
pub const ONE_STEP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    #[default]
    TrSvr,
    Sgd,
    Svrg,
    TrDeterministic,
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trsvr" => Ok(Optimizer::TrSvr),
            "sgd" => Ok(Optimizer::Sgd),
            "svrg" => Ok(Optimizer::Svrg),
            "tr_deterministic" => Ok(Optimizer::TrDeterministic),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::TrSvr => "trsvr",
            Optimizer::Sgd => "sgd",
            Optimizer::Svrg => "svrg",
            Optimizer::TrDeterministic => "tr_deterministic",
        }
    }
}

/// Trust-region subproblem solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Subproblem {
    Cauchy,
    /// Truncated CG; `max_iter = None` means `2d`.
    Steihaug {
        tol: f64,
        max_iter: Option<usize>,
    },
}

impl Default for Subproblem {
    fn default() -> Self {
        Subproblem::Steihaug {
            tol: 1e-8,
            max_iter: None,
        }
    }
}

/// Everything a driver needs besides the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub optimizer: Optimizer,
    /// Mini-batch size `b`.
    pub batch_size: usize,
    /// Inner iterations `S` per outer loop.
    pub inner_iters: usize,
    /// Maximum number of outer loops.
    pub outer_iters: usize,
    pub alpha: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub radius_mode: RadiusMode,
    pub hessian: HessianMode,
    /// Upper bound imposed on `‖H_{k,s}‖` by rescaling.
    pub hessian_cap: Option<f64>,
    pub subproblem: Subproblem,
    pub sampling: SamplingMode,
    pub seed: u64,
    /// Starting point; zero vector when absent.
    pub x0: Option<Vec<f64>>,
    /// Radius used for the very first step instead of the policy.
    pub initial_radius: Option<f64>,
    /// Stop once the true gradient norm falls to this value.
    pub grad_tol: Option<f64>,
    /// Stop once this many component gradients were evaluated.
    pub eval_budget: Option<u64>,
    /// Compute `f` and `‖∇f‖` diagnostics every this many inner steps.
    pub diag_every: usize,
    /// Abort on a failed Cauchy or one-step decrease check.
    pub strict: bool,
    /// `L_∇f`, enabling the one-step decrease check when known.
    pub lipschitz_grad: Option<f64>,
    /// Keep `(x_{k,s}, x_{k,0})` every this many inner steps.
    pub snapshot_every: Option<usize>,
    pub exec: Exec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::TrSvr,
            batch_size: 1,
            inner_iters: 10,
            outer_iters: 10,
            alpha: 0.1,
            eta1: 10.0,
            eta2: 0.1,
            radius_mode: RadiusMode::Proportional,
            hessian: HessianMode::IdentityScaled(1.0),
            hessian_cap: None,
            subproblem: Subproblem::default(),
            sampling: SamplingMode::WithoutReplacement,
            seed: 0,
            x0: None,
            initial_radius: None,
            grad_tol: None,
            eval_budget: None,
            diag_every: 1,
            strict: false,
            lipschitz_grad: None,
            snapshot_every: None,
            exec: Exec::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self, problem: &dyn FiniteSum) -> Result<()> {
        let n = problem.num_components();
        if self.batch_size < 1 || self.batch_size > n {
            return Err(Error::Config(format!(
                "batch size b = {} must lie in [1, N = {n}]",
                self.batch_size
            )));
        }
        if self.inner_iters < 1 {
            return Err(Error::Config("inner iterations S must be >= 1".into()));
        }
        if self.diag_every < 1 {
            return Err(Error::Config("diag_every must be >= 1".into()));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != problem.dim() {
                return Err(Error::Config(format!(
                    "x0 has dimension {}, problem has {}",
                    x0.len(),
                    problem.dim()
                )));
            }
        }
        if let Some(r) = self.initial_radius {
            if !(r > 0.0) {
                return Err(Error::Config(format!(
                    "initial radius must be positive, got {r}"
                )));
            }
        }
        if let HessianMode::Lbfgs { memory } = self.hessian {
            if memory == 0 {
                return Err(Error::Config("L-BFGS memory must be >= 1".into()));
            }
        }
        if let Some(cap) = self.hessian_cap {
            if !(cap > 0.0) {
                return Err(Error::Config(format!(
                    "hessian cap must be positive, got {cap}"
                )));
            }
        }
        self.radius_policy().map(|_| ())
    }

    pub fn radius_policy(&self) -> Result<RadiusPolicy> {
        RadiusPolicy::new(self.radius_mode, self.alpha, self.eta1, self.eta2)
    }

    /// Bound `K_H` on `‖H_{k,s}‖` implied by the configuration, if any.
    pub fn hessian_bound(&self) -> Option<f64> {
        match (self.hessian, self.hessian_cap) {
            (HessianMode::IdentityScaled(c), cap) => Some(cap.map_or(c.abs(), |m| m.min(c.abs()))),
            (_, cap) => cap,
        }
    }
}

/// `α ≤ 1/(2(L_∇f + 2K_H))`.
pub fn step_size_hypothesis(alpha: f64, lipschitz_grad: f64, hessian_bound: f64) -> bool {
    alpha <= 1.0 / (2.0 * (lipschitz_grad + 2.0 * hessian_bound))
}

/// Diagnostics and measurements for one inner step `(k, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub s: usize,
    /// `f(x_{k,s})`, NaN when not measured this step.
    pub f: f64,
    /// `‖∇f(x_{k,s})‖`, NaN when not measured.
    pub grad_norm: f64,
    /// Norm of the gradient estimate driving the step.
    pub vr_grad_norm: f64,
    /// `Δ_{k,s}`; NaN for fixed-step baselines.
    pub radius: f64,
    pub step_norm: f64,
    /// `m(Δx) − m(0)`; NaN for fixed-step baselines.
    pub model_dec: f64,
    /// `f(x_{k,s+1}) − f(x_{k,s})`, NaN when not measured.
    pub actual_dec: f64,
    /// Cumulative component-gradient evaluations after this step.
    pub evals: u64,
    /// `‖∇f(x_{k,s}) − ḡ_{k,s}‖`, NaN when not measured.
    pub grad_error_norm: f64,
    /// `‖H_{k,s}‖` of the model used; NaN for fixed-step baselines.
    pub hessian_norm: f64,
    /// Whether the accepted step certified Cauchy decrease.
    pub cauchy_ok: bool,
    /// One-step decrease inequality, when `L_∇f` and diagnostics are known.
    pub one_step_ok: Option<bool>,
}

/// Iterate pair kept for replay-based verification.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: usize,
    pub s: usize,
    pub x: Vec<f64>,
    pub anchor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    GradientTolerance,
    EvalBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub optimizer: Optimizer,
    pub records: Vec<IterationRecord>,
    pub snapshots: Vec<Snapshot>,
    /// `f(x_{0,0})`.
    pub f0: f64,
    pub final_x: Vec<f64>,
    pub stop: StopReason,
    /// Outer loops started.
    pub outer_loops: usize,
}

impl Trace {
    pub fn evals(&self) -> u64 {
        self.records.last().map_or(0, |r| r.evals)
    }

    /// Mean of `‖∇f(x_{k,s})‖²` over recorded steps, normalized by
    /// `steps` (the nominal `(K+1)S`). NaN if any norm is missing.
    pub fn mean_sq_grad_norm(&self, steps: usize) -> f64 {
        self.records
            .iter()
            .map(|r| r.grad_norm * r.grad_norm)
            .sum::<f64>()
            / steps as f64
    }
}

pub fn run(problem: &dyn FiniteSum, config: &RunConfig) -> Result<Trace> {
    match config.optimizer {
        Optimizer::TrSvr => run_trsvr(problem, config),
        Optimizer::Sgd => run_sgd(problem, config),
        Optimizer::Svrg => run_svrg(problem, config),
        Optimizer::TrDeterministic => run_tr_deterministic(problem, config),
    }
}

/// Independent runs differing only in seed, in parallel when enabled.
pub fn run_seeds(problem: &dyn FiniteSum, config: &RunConfig, seeds: &[u64]) -> Vec<Result<Trace>> {
    exec::map_ordered(config.exec, seeds, |&seed| {
        let cfg = RunConfig {
            seed,
            exec: Exec::Sequential,
            ..config.clone()
        };
        run(problem, &cfg)
    })
}

/// Two-loop trust-region method with variance-reduced gradients.
pub fn run_trsvr(problem: &dyn FiniteSum, config: &RunConfig) -> Result<Trace> {
    two_loop(problem, config, Optimizer::TrSvr)
}

/// SVRG: `x ← x − αḡ` with the anchor refreshed every `S` steps.
pub fn run_svrg(problem: &dyn FiniteSum, config: &RunConfig) -> Result<Trace> {
    two_loop(problem, config, Optimizer::Svrg)
}

/// Trust-region steps driven by the exact gradient.
pub fn run_tr_deterministic(problem: &dyn FiniteSum, config: &RunConfig) -> Result<Trace> {
    two_loop(problem, config, Optimizer::TrDeterministic)
}

/// Plain mini-batch SGD with constant step `α`.
pub fn run_sgd(problem: &dyn FiniteSum, config: &RunConfig) -> Result<Trace> {
    config.validate(problem)?;
    let n = problem.num_components();
    let d = problem.dim();
    let sampler = BatchSampler::new(
        n,
        config.batch_size,
        config.sampling,
        RandomSource::new(config.seed),
    )?;
    let mut x = config.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    let mut diag = Diagnostics::new(problem, config, &x)?;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut stop = StopReason::Completed;
    let mut outer_loops = 0;

    'outer: for k in 0..config.outer_iters {
        outer_loops += 1;
        for s in 0..config.inner_iters {
            if diag.would_exceed(config.batch_size as u64) {
                stop = StopReason::EvalBudget;
                break 'outer;
            }
            diag.snapshot(&mut snapshots, k, s, &x, &x);
            let batch = sampler.sample_batch(k, s);
            let est = estimators::minibatch_gradient_with(config.exec, problem, &x, &batch)?;
            diag.evals += batch.len() as u64;
            let step: Vec<f64> = est.value.iter().map(|g| -config.alpha * g).collect();
            let rec = diag.measure(k, s, &x, &step, &est, None, None, None)?;
            linalg::axpy(1.0, &step, &mut x);
            let converged = diag.converged(&rec);
            records.push(rec);
            if converged {
                stop = StopReason::GradientTolerance;
                break 'outer;
            }
        }
    }
    Ok(Trace {
        optimizer: Optimizer::Sgd,
        records,
        snapshots,
        f0: diag.f0,
        final_x: x,
        stop,
        outer_loops,
    })
}

fn two_loop(problem: &dyn FiniteSum, config: &RunConfig, optimizer: Optimizer) -> Result<Trace> {
    config.validate(problem)?;
    let n = problem.num_components();
    let d = problem.dim();
    let policy = config.radius_policy()?;
    let sampler = BatchSampler::new(
        n,
        config.batch_size,
        config.sampling,
        RandomSource::new(config.seed),
    )?;
    let uses_model = optimizer != Optimizer::Svrg;
    if uses_model {
        if let (Some(lg), Some(kh)) = (config.lipschitz_grad, config.hessian_bound()) {
            if !step_size_hypothesis(config.alpha, lg, kh) {
                warn!(
                    "alpha = {} exceeds 1/(2(L + 2K_H)) = {}",
                    config.alpha,
                    1.0 / (2.0 * (lg + 2.0 * kh))
                );
            }
        }
    }
    let lbfgs_capacity = match config.hessian {
        HessianMode::Lbfgs { memory } => memory,
        _ => 0,
    };
    let mut lbfgs = LbfgsMemory::new(lbfgs_capacity);
    let mut previous_anchor: Option<(Vec<f64>, Vec<f64>)> = None;

    let mut x = config.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    let mut diag = Diagnostics::new(problem, config, &x)?;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut stop = StopReason::Completed;
    let mut outer_loops = 0;

    let step_cost = match optimizer {
        Optimizer::TrDeterministic => n as u64,
        _ => 2 * config.batch_size as u64,
    };
    'outer: for k in 0..config.outer_iters {
        let first_step_cost = if optimizer == Optimizer::TrDeterministic {
            0
        } else {
            step_cost
        };
        if diag.would_exceed(n as u64 + first_step_cost) {
            stop = StopReason::EvalBudget;
            break;
        }
        outer_loops += 1;
        // x_{k,0} = x_{k-1,S}
        let mut state = IterateState::at_anchor(problem, x.clone(), k, config.exec)?;
        diag.evals += n as u64;
        if let Some(tol) = config.grad_tol {
            if state.anchor_gradient.norm() <= tol {
                stop = StopReason::GradientTolerance;
                break;
            }
        }
        if lbfgs_capacity > 0 {
            if let Some((prev_x, prev_g)) = previous_anchor.take() {
                lbfgs.push(
                    linalg::sub(&state.anchor, &prev_x),
                    linalg::sub(&state.anchor_gradient.value, &prev_g),
                );
            }
            previous_anchor = Some((state.anchor.clone(), state.anchor_gradient.value.clone()));
        }

        for s in 0..config.inner_iters {
            if s > 0 && diag.would_exceed(step_cost) {
                stop = StopReason::EvalBudget;
                x = state.x;
                break 'outer;
            }
            diag.snapshot(&mut snapshots, k, s, &state.x, &state.anchor);
            let estimate = match optimizer {
                Optimizer::TrDeterministic if s == 0 => state.anchor_gradient.clone(),
                Optimizer::TrDeterministic => {
                    diag.evals += n as u64;
                    GradientEstimate::full(problem, &state.x, config.exec)?
                }
                _ => {
                    let batch = sampler.sample_batch(k, s);
                    diag.evals += 2 * batch.len() as u64;
                    estimators::variance_reduced_gradient_with(
                        config.exec,
                        problem,
                        &state,
                        &batch,
                    )?
                }
            };
            let gnorm = estimate.norm();

            let (step, model_info) = if optimizer == Optimizer::Svrg {
                let step: Vec<f64> = estimate.value.iter().map(|g| -config.alpha * g).collect();
                (step, None)
            } else {
                state.radius = match config.initial_radius {
                    Some(r0) if k == 0 && s == 0 => r0,
                    _ => policy.update_radius(gnorm),
                };
                if state.radius == 0.0 {
                    // Stationary estimate: zero step.
                    (vec![0.0; d], Some((0.0, 0.0, f64::NAN, true)))
                } else {
                    let model = trust_region::build_model(
                        problem,
                        &state,
                        &estimate,
                        config.hessian,
                        Some(&lbfgs),
                        config.hessian_cap,
                    )?;
                    let mut step = solve(&model, config.subproblem, d)?;
                    let mut cauchy_ok = check_cauchy_decrease(&model, &step);
                    if !cauchy_ok {
                        warn!("(k={k}, s={s}) subproblem step failed Cauchy decrease; using Cauchy step");
                        step = trust_region::cauchy_step(&model)?;
                        cauchy_ok = check_cauchy_decrease(&model, &step);
                        if !cauchy_ok && config.strict {
                            return Err(Error::LemmaViolation {
                                k,
                                s,
                                detail: format!(
                                    "Cauchy decrease: model decrease {} > bound",
                                    step.model_decrease
                                ),
                            });
                        }
                    }
                    let info = (
                        state.radius,
                        step.model_decrease,
                        model.hessian_norm(),
                        cauchy_ok,
                    );
                    (step.direction, Some(info))
                }
            };

            let rec = diag.measure(
                k,
                s,
                &state.x,
                &step,
                &estimate,
                model_info,
                config.lipschitz_grad,
                Some(gnorm),
            )?;
            if config.strict && rec.one_step_ok == Some(false) {
                return Err(Error::LemmaViolation {
                    k,
                    s,
                    detail: format!(
                        "one-step decrease: actual change {} exceeds bound",
                        rec.actual_dec
                    ),
                });
            }
            state.advance(&step);
            let converged = diag.converged(&rec);
            records.push(rec);
            if converged {
                stop = StopReason::GradientTolerance;
                x = state.x;
                break 'outer;
            }
        }
        // x_{k+1,0} = x_{k,S}
        x = state.x;
    }

    Ok(Trace {
        optimizer,
        records,
        snapshots,
        f0: diag.f0,
        final_x: x,
        stop,
        outer_loops,
    })
}

fn solve(model: &trust_region::TrustRegionModel, subproblem: Subproblem, d: usize) -> Result<Step> {
    match subproblem {
        Subproblem::Cauchy => trust_region::cauchy_step(model),
        Subproblem::Steihaug { tol, max_iter } => {
            trust_region::steihaug_cg(model, tol, max_iter.unwrap_or(2 * d))
        }
    }
}

/// Measurement bookkeeping shared by the drivers. Diagnostic evaluations
/// are not charged to the evaluation count.
struct Diagnostics<'a> {
    problem: &'a dyn FiniteSum,
    config: &'a RunConfig,
    evals: u64,
    step_index: usize,
    f0: f64,
    /// `f` at the current iterate, if already known.
    f_current: Option<f64>,
}

impl<'a> Diagnostics<'a> {
    fn new(problem: &'a dyn FiniteSum, config: &'a RunConfig, x0: &[f64]) -> Result<Self> {
        let f0 = problem::evaluate_objective_with(config.exec, problem, x0)?;
        Ok(Self {
            problem,
            config,
            evals: 0,
            step_index: 0,
            f0,
            f_current: Some(f0),
        })
    }

    /// Whether spending `cost` more evaluations would exceed the budget.
    fn would_exceed(&self, cost: u64) -> bool {
        self.config
            .eval_budget
            .is_some_and(|b| self.evals + cost > b)
    }

    fn snapshot(&self, out: &mut Vec<Snapshot>, k: usize, s: usize, x: &[f64], anchor: &[f64]) {
        if let Some(every) = self.config.snapshot_every {
            if every > 0 && self.step_index.is_multiple_of(every) {
                out.push(Snapshot {
                    k,
                    s,
                    x: x.to_vec(),
                    anchor: anchor.to_vec(),
                });
            }
        }
    }

    fn converged(&self, rec: &IterationRecord) -> bool {
        self.config.grad_tol.is_some_and(|tol| rec.grad_norm <= tol)
    }

    /// Builds the record for the step `x → x + step`. `model` carries
    /// `(Δ, model decrease, ‖H‖, cauchy_ok)` for trust-region steps.
    #[allow(clippy::too_many_arguments)]
    fn measure(
        &mut self,
        k: usize,
        s: usize,
        x: &[f64],
        step: &[f64],
        estimate: &GradientEstimate,
        model: Option<(f64, f64, f64, bool)>,
        lipschitz_grad: Option<f64>,
        gnorm: Option<f64>,
    ) -> Result<IterationRecord> {
        let exec = self.config.exec;
        let due = self.step_index.is_multiple_of(self.config.diag_every);
        self.step_index += 1;
        let vr_grad_norm = gnorm.unwrap_or_else(|| estimate.norm());
        let step_norm = linalg::norm(step);
        let (radius, model_dec, hessian_norm, cauchy_ok) =
            model.unwrap_or((f64::NAN, f64::NAN, f64::NAN, true));

        let mut rec = IterationRecord {
            k,
            s,
            f: f64::NAN,
            grad_norm: f64::NAN,
            vr_grad_norm,
            radius,
            step_norm,
            model_dec,
            actual_dec: f64::NAN,
            evals: self.evals,
            grad_error_norm: f64::NAN,
            hessian_norm,
            cauchy_ok,
            one_step_ok: None,
        };
        if !due {
            self.f_current = None;
            return Ok(rec);
        }
        let f = match self.f_current {
            Some(f) => f,
            None => problem::evaluate_objective_with(exec, self.problem, x)?,
        };
        let g = problem::full_gradient_with(exec, self.problem, x)?;
        let x_next = linalg::add(x, step);
        let f_next = problem::evaluate_objective_with(exec, self.problem, &x_next)?;
        self.f_current = Some(f_next);

        rec.f = f;
        rec.grad_norm = linalg::norm(&g);
        rec.actual_dec = f_next - f;
        rec.grad_error_norm = linalg::dist_sq(&g, &estimate.value).sqrt();
        if model.is_some() && step_norm > 0.0 {
            trace!("(k={k}, s={s}) rho = {}", rec.actual_dec / model_dec);
        }
        if let (Some(lg), Some(_)) = (lipschitz_grad, model) {
            rec.one_step_ok = Some(rec.actual_dec <= one_step_bound(&rec, lg) + ONE_STEP_SLACK);
        }
        Ok(rec)
    }
}

/// Right-hand side of the pathwise one-step decrease inequality:
/// `−‖ḡ‖Δ + ½‖H‖Δ² + ‖g − ḡ‖Δ + ½(L_∇f + ‖H‖)Δ²`.
pub fn one_step_bound(rec: &IterationRecord, lipschitz_grad: f64) -> f64 {
    let delta = rec.radius;
    let h = if rec.hessian_norm.is_nan() {
        0.0
    } else {
        rec.hessian_norm
    };
    -rec.vr_grad_norm * delta
        + 0.5 * h * delta * delta
        + rec.grad_error_norm * delta
        + 0.5 * (lipschitz_grad + h) * delta * delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_least_squares, synth_data, SynthKind};

    fn quad() -> impl FiniteSum {
        make_least_squares(
            synth_data(4, 12, 3, SynthKind::GaussianLs, 0.3).unwrap(),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn validation_rejects_bad_batch_and_inner_iters() {
        let p = quad();
        let cfg = RunConfig {
            batch_size: 13,
            ..RunConfig::default()
        };
        assert!(matches!(run_trsvr(&p, &cfg), Err(Error::Config(_))));
        let cfg = RunConfig {
            inner_iters: 0,
            ..RunConfig::default()
        };
        assert!(matches!(run_trsvr(&p, &cfg), Err(Error::Config(_))));
        let cfg = RunConfig {
            x0: Some(vec![0.0; 2]),
            ..RunConfig::default()
        };
        assert!(matches!(run_sgd(&p, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn evaluation_accounting_matches_formula() {
        let p = quad();
        let cfg = RunConfig {
            batch_size: 3,
            inner_iters: 4,
            outer_iters: 5,
            ..RunConfig::default()
        };
        let t = run_trsvr(&p, &cfg).unwrap();
        assert_eq!(t.records.len(), 20);
        assert_eq!(t.evals(), 5 * 12 + 5 * 4 * 2 * 3);
        assert!(t.records.windows(2).all(|w| w[0].evals < w[1].evals));
    }

    #[test]
    fn sgd_single_step() {
        // One component, f = ½(x − 0)² · 1 with a = 1: gradient at x = 2 is 2.
        let p = make_least_squares(
            crate::problems::Dataset::from_dense(vec![vec![1.0, 0.0]], vec![0.0]).unwrap(),
            0.0,
        )
        .unwrap();
        let cfg = RunConfig {
            optimizer: Optimizer::Sgd,
            alpha: 0.1,
            inner_iters: 1,
            outer_iters: 1,
            x0: Some(vec![2.0, 0.0]),
            ..RunConfig::default()
        };
        let t = run_sgd(&p, &cfg).unwrap();
        assert_eq!(t.final_x, vec![2.0 - 0.2, 0.0]);
    }

    #[test]
    fn zero_gradient_start_does_not_move() {
        let p = make_least_squares(
            crate::problems::Dataset::from_dense(
                vec![vec![1.0, 0.0], vec![0.0, 2.0]],
                vec![0.0, 0.0],
            )
            .unwrap(),
            0.0,
        )
        .unwrap();
        for optimizer in [
            Optimizer::TrSvr,
            Optimizer::TrDeterministic,
            Optimizer::Svrg,
            Optimizer::Sgd,
        ] {
            let cfg = RunConfig {
                optimizer,
                batch_size: 1,
                inner_iters: 3,
                outer_iters: 2,
                ..RunConfig::default()
            };
            let t = run(&p, &cfg).unwrap();
            assert_eq!(t.final_x, vec![0.0, 0.0]);
            assert!(t.records.iter().all(|r| r.step_norm == 0.0));
        }
    }

    #[test]
    fn grad_tol_and_budget_stop_early() {
        let p = quad();
        let cfg = RunConfig {
            eval_budget: Some(100),
            batch_size: 2,
            inner_iters: 5,
            outer_iters: 50,
            ..RunConfig::default()
        };
        let t = run_trsvr(&p, &cfg).unwrap();
        assert_eq!(t.stop, StopReason::EvalBudget);
        // Three full outer loops cost 96; a fourth would need 12 + 4 more.
        assert_eq!(t.evals(), 96);
        let cfg = RunConfig {
            grad_tol: Some(1e3),
            ..RunConfig::default()
        };
        let t = run_trsvr(&p, &cfg).unwrap();
        assert_eq!(t.stop, StopReason::GradientTolerance);
        assert!(t.records.is_empty());
    }

    #[test]
    fn initial_radius_is_used_once() {
        let p = quad();
        let cfg = RunConfig {
            initial_radius: Some(0.123),
            inner_iters: 3,
            outer_iters: 1,
            ..RunConfig::default()
        };
        let t = run_trsvr(&p, &cfg).unwrap();
        assert_eq!(t.records[0].radius, 0.123);
        assert_ne!(t.records[1].radius, 0.123);
    }

    #[test]
    fn svrg_first_inner_step_uses_the_full_gradient() {
        let p = quad();
        let cfg = RunConfig {
            optimizer: Optimizer::Svrg,
            alpha: 0.05,
            batch_size: 2,
            inner_iters: 3,
            outer_iters: 1,
            x0: Some(vec![1.0, -1.0, 0.5]),
            ..RunConfig::default()
        };
        let t = run_svrg(&p, &cfg).unwrap();
        let g = problem::full_gradient(&p, &[1.0, -1.0, 0.5]).unwrap();
        assert_eq!(t.records[0].vr_grad_norm, linalg::norm(&g));
        assert_eq!(t.records[0].grad_error_norm, 0.0);
    }

    #[test]
    fn diagnostics_cadence() {
        let p = quad();
        let cfg = RunConfig {
            diag_every: 3,
            inner_iters: 7,
            outer_iters: 1,
            ..RunConfig::default()
        };
        let t = run_trsvr(&p, &cfg).unwrap();
        let measured: Vec<bool> = t.records.iter().map(|r| !r.grad_norm.is_nan()).collect();
        assert_eq!(measured, vec![true, false, false, true, false, false, true]);
    }

    #[test]
    fn lbfgs_and_diagonal_modes_run() {
        let p = quad();
        for hessian in [
            HessianMode::Lbfgs { memory: 3 },
            HessianMode::Diagonal,
            HessianMode::ExactHvp,
        ] {
            let cfg = RunConfig {
                hessian,
                batch_size: 3,
                inner_iters: 4,
                outer_iters: 6,
                alpha: 0.2,
                ..RunConfig::default()
            };
            let t = run_trsvr(&p, &cfg).unwrap();
            assert!(t.records.iter().all(|r| r.cauchy_ok));
            let last = t.records.last().unwrap();
            assert!(last.f + last.actual_dec < t.f0);
        }
    }
}
