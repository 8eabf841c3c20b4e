//! Convergence-analysis constants, the Lyapunov schedule `λ_s`, `Λ_s`, and
//! empirical verifiers for the variance bound, the one-step and expected
//! decrease inequalities and the averaged gradient-norm bound.

use std::fmt;

use crate::drivers::{self, RunConfig, Snapshot, Trace};
use crate::error::{Error, Result};
use crate::estimators::{self, BatchSampler, MonteCarloMean, SamplingMode};
use crate::exec::{self, Exec};
use crate::linalg;
use crate::problem::{self, FiniteSum, IterateState, RandomSource};
use crate::trust_region::{self, HessianMode, RadiusMode};

/// Safety factor applied to sampled Lipschitz ratios.
pub const EMPIRICAL_SAFETY: f64 = 1.1;

/// Largest enumeration accepted by exact verification.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Analysis parameters that are chosen rather than estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    pub alpha: f64,
    pub z: f64,
    pub batch_size: usize,
    pub inner_iters: usize,
    /// `K_H`; defaults to the Hessian bound `L_H` when absent.
    pub hessian_approx_bound: Option<f64>,
    pub sampling: SamplingMode,
}

impl AnalysisParams {
    pub fn from_run_config(cfg: &RunConfig, z: f64) -> Self {
        Self {
            alpha: cfg.alpha,
            z,
            batch_size: cfg.batch_size,
            inner_iters: cfg.inner_iters,
            hessian_approx_bound: cfg.hessian_bound(),
            sampling: cfg.sampling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    /// `L_∇f`
    pub lipschitz_grad: f64,
    /// `L_H ≥ sup ‖∇²f‖`
    pub hessian_bound: f64,
    /// `K_H ≥ ‖H_{k,s}‖`
    pub approx_bound: f64,
    /// `L`, the component-gradient Lipschitz constant.
    pub lipschitz_component: f64,
    /// `σ_g`, largest mini-batch gradient standard deviation at the samples.
    pub sigma_g: f64,
    pub f_inf: f64,
    pub alpha: f64,
    pub z: f64,
    pub batch_size: usize,
    pub inner_iters: usize,
    /// Set when any constant came from sampling instead of a closed form.
    pub empirical: bool,
}

impl TheoryConstants {
    /// `α ≤ 1/(2(L_∇f + 2K_H))`.
    pub fn step_size_ok(&self) -> bool {
        drivers::step_size_hypothesis(self.alpha, self.lipschitz_grad, self.approx_bound)
    }

    /// Largest α satisfying the step-size hypothesis.
    pub fn max_alpha(&self) -> f64 {
        1.0 / (2.0 * (self.lipschitz_grad + 2.0 * self.approx_bound))
    }

    pub fn with_z(self, z: f64) -> Self {
        Self { z, ..self }
    }
}

/// Estimates the constants of the analysis. Closed forms are used when the
/// problem provides them; otherwise Lipschitz ratios over pairs of
/// `sample_points` (times [`EMPIRICAL_SAFETY`]) and the smallest sampled
/// objective stand in, and the result is flagged empirical.
pub fn estimate_constants(
    problem: &dyn FiniteSum,
    sample_points: &[Vec<f64>],
    params: AnalysisParams,
) -> Result<TheoryConstants> {
    if sample_points.len() < 2 {
        return Err(Error::Input("need at least two sample points".into()));
    }
    if let Some(bad) = sample_points.iter().find(|p| p.len() != problem.dim()) {
        return Err(Error::Input(format!(
            "sample point has dimension {}, expected {}",
            bad.len(),
            problem.dim()
        )));
    }
    let n = problem.num_components();
    let b = params.batch_size;
    if b == 0 || b > n {
        return Err(Error::Input(format!("batch size {b} not in [1, {n}]")));
    }

    let (lg, lh, l, f_inf, empirical) = match problem.closed_form_constants() {
        Some(c) => (
            c.lipschitz_grad,
            c.hessian_bound,
            c.lipschitz_component,
            c.f_inf,
            false,
        ),
        None => {
            let grads = sample_points
                .iter()
                .map(|x| problem::full_gradient(problem, x))
                .collect::<Result<Vec<_>>>()?;
            let mut lg = 0.0f64;
            let mut l = 0.0f64;
            for a in 0..sample_points.len() {
                for c in a + 1..sample_points.len() {
                    let dx = linalg::dist_sq(&sample_points[a], &sample_points[c]).sqrt();
                    if dx == 0.0 {
                        continue;
                    }
                    lg = lg.max(linalg::dist_sq(&grads[a], &grads[c]).sqrt() / dx);
                    for i in 0..n {
                        let ga = problem.component_gradient(i, &sample_points[a]);
                        let gc = problem.component_gradient(i, &sample_points[c]);
                        l = l.max(linalg::dist_sq(&ga, &gc).sqrt() / dx);
                    }
                }
            }
            let f_min = sample_points
                .iter()
                .map(|x| problem::evaluate_objective(problem, x))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            (
                lg * EMPIRICAL_SAFETY,
                lg * EMPIRICAL_SAFETY,
                l * EMPIRICAL_SAFETY,
                f_min,
                true,
            )
        }
    };

    let mut sigma_sq = 0.0f64;
    for x in sample_points {
        let g = problem::full_gradient(problem, x)?;
        let spread = (0..n)
            .map(|i| linalg::dist_sq(&problem.component_gradient(i, x), &g))
            .sum::<f64>()
            / n as f64;
        let factor = match params.sampling {
            SamplingMode::WithReplacement => 1.0 / b as f64,
            SamplingMode::WithoutReplacement if n > 1 => {
                (n - b) as f64 / ((n - 1) as f64 * b as f64)
            }
            SamplingMode::WithoutReplacement => 0.0,
        };
        sigma_sq = sigma_sq.max(spread * factor);
    }

    Ok(TheoryConstants {
        lipschitz_grad: lg,
        hessian_bound: lh,
        approx_bound: params.hessian_approx_bound.unwrap_or(lh),
        lipschitz_component: l,
        sigma_g: sigma_sq.sqrt(),
        f_inf,
        alpha: params.alpha,
        z: params.z,
        batch_size: b,
        inner_iters: params.inner_iters,
        empirical,
    })
}

/// Backward recursion for the potential `R_{k,s} = f(x_{k,s}) + λ_s‖x_{k,s} − x_{k,0}‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSchedule {
    /// `λ_0 … λ_S` with `λ_S = 0`.
    pub lambda: Vec<f64>,
    /// `Λ_0 … Λ_{S−1}`.
    pub big_lambda: Vec<f64>,
    pub lambda_min: f64,
    pub z: f64,
}

impl LyapunovSchedule {
    /// Whether the averaged gradient bound is meaningful (`Λ_min > 0`).
    pub fn is_valid(&self) -> bool {
        self.lambda_min > 0.0
    }
}

/// `λ_s = ½(L_∇f + 2K_H)α²L²/b + λ_{s+1}(1 + αz + (α² + α/z)L²/b)` and
/// `Λ_s = α/4 − λ_{s+1}(1 + 1/(αz))α²`, from `λ_S = 0` backwards.
pub fn lyapunov_schedule(c: &TheoryConstants) -> LyapunovSchedule {
    let s_len = c.inner_iters;
    let a = c.alpha;
    let z = c.z;
    let l2b = c.lipschitz_component * c.lipschitz_component / c.batch_size as f64;
    let base = 0.5 * (c.lipschitz_grad + 2.0 * c.approx_bound) * a * a * l2b;
    let growth = 1.0 + a * z + (a * a + a / z) * l2b;
    let shrink = (1.0 + 1.0 / (a * z)) * a * a;

    let mut lambda = vec![0.0; s_len + 1];
    let mut big_lambda = vec![0.0; s_len];
    for s in (0..s_len).rev() {
        let next = lambda[s + 1];
        big_lambda[s] = 0.25 * a - next * shrink;
        lambda[s] = base + next * growth;
    }
    let lambda_min = big_lambda.iter().copied().fold(f64::INFINITY, f64::min);
    LyapunovSchedule {
        lambda,
        big_lambda,
        lambda_min,
        z,
    }
}

/// `z ∈ {10^{j/4} : j = −8, …, 8}`.
pub fn z_grid() -> Vec<f64> {
    (-8..=8).map(|j| 10f64.powf(j as f64 / 4.0)).collect()
}

/// The schedule maximizing `Λ_min` over `grid` (first maximizer on ties).
pub fn best_z(c: &TheoryConstants, grid: &[f64]) -> LyapunovSchedule {
    grid.iter()
        .map(|&z| lyapunov_schedule(&c.with_z(z)))
        .fold(None::<LyapunovSchedule>, |best, sched| match best {
            Some(b) if b.lambda_min >= sched.lambda_min => Some(b),
            _ => Some(sched),
        })
        .expect("z grid is nonempty")
}

/// `(f0 − f_inf) / ((K+1) S Λ_min)`.
pub fn convergence_bound(f0: f64, f_inf: f64, k: usize, s: usize, lambda_min: f64) -> Result<f64> {
    if !(lambda_min > 0.0) {
        return Err(Error::BoundInvalid(format!(
            "Λ_min = {lambda_min} is not positive"
        )));
    }
    if f0 < f_inf {
        return Err(Error::Input(format!("f0 = {f0} is below f_inf = {f_inf}")));
    }
    Ok((f0 - f_inf) / ((k + 1) as f64 * s as f64 * lambda_min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "SKIP",
        })
    }
}

/// One verified inequality `lhs ≤ rhs + slack`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub reason: Option<String>,
}

impl Check {
    pub fn compare(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        let status = if lhs <= rhs + slack {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name: name.into(),
            status,
            lhs,
            rhs,
            slack,
            reason: None,
        }
    }

    pub fn skip(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Skip,
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: f64::NAN,
            reason: Some(reason.into()),
        }
    }
}

/// `CHECK <name> PASS|FAIL|SKIP lhs=<v> rhs=<v> slack=<v>[ reason=<text>]`
impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CHECK {} {} lhs={:.16e} rhs={:.16e} slack={:.16e}",
            self.name, self.status, self.lhs, self.rhs, self.slack
        )?;
        if let Some(r) = &self.reason {
            write!(f, " reason={r}")?;
        }
        Ok(())
    }
}

/// A list of checks; passes when nothing failed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn count(&self, status: CheckStatus) -> usize {
        self.checks.iter().filter(|c| c.status == status).count()
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMode {
    /// Enumerate all `C(N, b)` batches.
    ExactEnumeration,
    /// Sample batches; pass within three standard errors.
    MonteCarlo { trials: usize, seed: u64 },
}

/// Checks `E‖ḡ − ∇f(x_s)‖² ≤ (L²/b)‖x_s − x_0‖²` for each `(x_s, x_0)` pair.
pub fn verify_variance_bound(
    problem: &dyn FiniteSum,
    c: &TheoryConstants,
    pairs: &[(Vec<f64>, Vec<f64>)],
    mode: VarianceMode,
    exec: Exec,
) -> Result<Report> {
    let b = c.batch_size;
    let l2b = c.lipschitz_component * c.lipschitz_component / b as f64;
    if let VarianceMode::ExactEnumeration = mode {
        let count = estimators::binomial(problem.num_components(), b).unwrap_or(u128::MAX);
        if count > ENUMERATION_LIMIT {
            return Err(Error::Input(format!(
                "C(N, b) = {count} exceeds {ENUMERATION_LIMIT}; use Monte-Carlo mode"
            )));
        }
    }
    let mut report = Report::default();
    for (idx, (xs, x0)) in pairs.iter().enumerate() {
        let rhs = l2b * linalg::dist_sq(xs, x0);
        let check = match mode {
            VarianceMode::ExactEnumeration => {
                let m = estimators::exact_estimator_moments(
                    problem,
                    xs,
                    x0,
                    b,
                    ENUMERATION_LIMIT,
                    exec,
                )?;
                Check::compare(format!("variance[{idx}]"), m.variance, rhs, 0.0)
            }
            VarianceMode::MonteCarlo { trials, seed } => {
                let src = RandomSource::new(seed).derive(idx as u64);
                let m = estimators::estimator_variance(
                    problem,
                    xs,
                    x0,
                    b,
                    SamplingMode::WithoutReplacement,
                    trials,
                    src,
                    exec,
                )?;
                Check::compare(
                    format!("variance_mc[{idx}]"),
                    m.mean,
                    rhs,
                    3.0 * m.std_error,
                )
            }
        };
        report.checks.push(check);
    }
    Ok(report)
}

/// Settings for the replay-based expected-decrease check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplaySettings {
    /// Number of snapshots to test (spread evenly over the trace).
    pub states: usize,
    /// Independent batches replayed per state.
    pub trials: usize,
    pub seed: u64,
}

impl Default for ReplaySettings {
    fn default() -> Self {
        Self {
            states: 10,
            trials: 1000,
            seed: 0x7e57,
        }
    }
}

/// Pathwise one-step inequality on every measured step of `trace`, and the
/// conditional expected-decrease inequality
/// `E[f(x_{s+1})] − f(x_s) ≤ −¼α‖g‖² + ½(L_∇f + 2K_H)α² E‖g − ḡ‖²`
/// by replaying independent batches from snapshots of the run.
pub fn verify_decrease_lemmas(
    trace: &Trace,
    problem: &dyn FiniteSum,
    c: &TheoryConstants,
    run_config: &RunConfig,
    replay: ReplaySettings,
) -> Result<Report> {
    if run_config.radius_mode == RadiusMode::Clipped {
        return Err(Error::Config(
            "decrease checks assume the proportional radius policy Δ = α‖ḡ‖; rerun with radius_policy = proportional"
                .into(),
        ));
    }
    let mut report = Report::default();
    for rec in &trace.records {
        let name = format!("one_step[k={},s={}]", rec.k, rec.s);
        if rec.actual_dec.is_nan() || rec.radius.is_nan() {
            report
                .checks
                .push(Check::skip(name, "no diagnostics at this step"));
            continue;
        }
        let rhs = drivers::one_step_bound(rec, c.lipschitz_grad);
        report.checks.push(Check::compare(
            name,
            rec.actual_dec,
            rhs,
            drivers::ONE_STEP_SLACK,
        ));
    }

    if !c.step_size_ok() {
        report.checks.push(Check::skip(
            "expected_decrease",
            format!(
                "step-size hypothesis violated: alpha = {} > {}",
                c.alpha,
                c.max_alpha()
            ),
        ));
        return Ok(report);
    }
    if matches!(run_config.hessian, HessianMode::Lbfgs { .. }) {
        report.checks.push(Check::skip(
            "expected_decrease",
            "L-BFGS models depend on run history and cannot be replayed",
        ));
        return Ok(report);
    }
    if trace.snapshots.is_empty() || replay.states == 0 {
        report
            .checks
            .push(Check::skip("expected_decrease", "no snapshots recorded"));
        return Ok(report);
    }
    let picks = spread_indices(trace.snapshots.len(), replay.states);
    let checks: Vec<Result<Check>> = picks
        .iter()
        .map(|&i| expected_decrease_check(problem, c, run_config, &trace.snapshots[i], i, replay))
        .collect();
    for ch in checks {
        report.checks.push(ch?);
    }
    Ok(report)
}

fn spread_indices(len: usize, count: usize) -> Vec<usize> {
    if count >= len {
        return (0..len).collect();
    }
    // Offset each pick so that consecutive picks fall on different inner indices.
    let stride = len / count;
    (0..count).map(|j| j * stride + j % stride).collect()
}

/// Replays `trials` batches from one snapshot and compares the paired
/// differences `f(x⁺) − f(x) − ½(L_∇f + 2K_H)α²‖g − ḡ‖²` against `−¼α‖g‖²`.
pub fn expected_decrease_check(
    problem: &dyn FiniteSum,
    c: &TheoryConstants,
    run_config: &RunConfig,
    snap: &Snapshot,
    tag: usize,
    replay: ReplaySettings,
) -> Result<Check> {
    let exec = run_config.exec;
    let mut state = IterateState::at_anchor(problem, snap.anchor.clone(), snap.k, exec)?;
    state.x = snap.x.clone();
    state.s = snap.s;
    let g = problem::full_gradient_with(exec, problem, &snap.x)?;
    let f_x = problem::evaluate_objective_with(exec, problem, &snap.x)?;
    let sampler = BatchSampler::new(
        problem.num_components(),
        run_config.batch_size,
        run_config.sampling,
        RandomSource::new(replay.seed).derive(tag as u64),
    )?;
    let a = c.alpha;
    let noise_coef = 0.5 * (c.lipschitz_grad + 2.0 * c.approx_bound) * a * a;
    let d = problem.dim();
    let ids: Vec<usize> = (0..replay.trials).collect();

    let samples: Vec<Result<(f64, f64)>> = exec::map_ordered(exec, &ids, |&j| {
        let batch = sampler.sample_batch(j, 0);
        let est =
            estimators::variance_reduced_gradient_with(Exec::Sequential, problem, &state, &batch)?;
        let err_sq = linalg::dist_sq(&g, &est.value);
        let mut st = state.clone();
        st.radius = a * est.norm();
        let step = if st.radius == 0.0 {
            vec![0.0; d]
        } else {
            let model = trust_region::build_model(
                problem,
                &st,
                &est,
                run_config.hessian,
                None,
                run_config.hessian_cap,
            )?;
            let step = match run_config.subproblem {
                drivers::Subproblem::Cauchy => trust_region::cauchy_step(&model)?,
                drivers::Subproblem::Steihaug { tol, max_iter } => {
                    trust_region::steihaug_cg(&model, tol, max_iter.unwrap_or(2 * d))?
                }
            };
            step.direction
        };
        let x_next = linalg::add(&snap.x, &step);
        let f_next = problem::evaluate_objective_with(Exec::Sequential, problem, &x_next)?;
        Ok((f_next - f_x, err_sq))
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let diffs: Vec<f64> = samples.iter().map(|(df, e)| df - noise_coef * e).collect();
    let paired = MonteCarloMean::from_samples(&diffs);
    let mean_change = samples.iter().map(|s| s.0).sum::<f64>() / samples.len() as f64;
    let mean_err = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
    let target = -0.25 * a * linalg::norm_sq(&g);
    let rhs = target + noise_coef * mean_err;
    // lhs − rhs equals the paired mean minus target.
    let status = if paired.mean <= target + 3.0 * paired.std_error {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(Check {
        name: format!("expected_decrease[k={},s={}]", snap.k, snap.s),
        status,
        lhs: mean_change,
        rhs,
        slack: 3.0 * paired.std_error,
        reason: None,
    })
}

/// Compares the across-seed mean of `(1/((K+1)S)) Σ‖∇f(x_{k,s})‖²` with the
/// convergence bound; passes within `1 + 3·(relative standard error)`.
pub fn verify_theorem_bound(
    traces: &[Trace],
    c: &TheoryConstants,
    schedule: &LyapunovSchedule,
    k: usize,
) -> Result<Check> {
    let name = format!("theorem_bound[K={k}]");
    if !schedule.is_valid() {
        return Ok(Check::skip(
            name,
            "bound vacuous for this configuration (Λ_min <= 0)",
        ));
    }
    if traces.is_empty() {
        return Err(Error::Input("no traces to verify".into()));
    }
    let steps = (k + 1) * c.inner_iters;
    let means = traces
        .iter()
        .map(|t| {
            let m = t.mean_sq_grad_norm(steps);
            if m.is_nan() {
                Err(Error::Input(
                    "traces need the true gradient norm at every step".into(),
                ))
            } else {
                Ok(m)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let stats = MonteCarloMean::from_samples(&means);
    let f0 = traces[0].f0;
    let bound = convergence_bound(f0, c.f_inf, k, c.inner_iters, schedule.lambda_min)?;
    let rel_se = if stats.mean > 0.0 {
        stats.std_error / stats.mean
    } else {
        0.0
    };
    Ok(Check::compare(
        name,
        stats.mean,
        bound,
        3.0 * rel_se * bound,
    ))
}

/// Runs `seeds` independent TR-SVR runs with `K + 1` outer loops and full
/// diagnostics, then applies [`verify_theorem_bound`]. Returns the check and
/// the across-seed mean.
pub fn theorem_check(
    problem: &dyn FiniteSum,
    run_config: &RunConfig,
    c: &TheoryConstants,
    schedule: &LyapunovSchedule,
    k: usize,
    seeds: &[u64],
) -> Result<Check> {
    let cfg = RunConfig {
        outer_iters: k + 1,
        diag_every: 1,
        grad_tol: None,
        eval_budget: None,
        ..run_config.clone()
    };
    let traces = drivers::run_seeds(problem, &cfg, seeds)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    verify_theorem_bound(&traces, c, schedule, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> TheoryConstants {
        TheoryConstants {
            lipschitz_grad: 1.0,
            hessian_bound: 1.0,
            approx_bound: 1.0,
            lipschitz_component: 1.0,
            sigma_g: 0.0,
            f_inf: 0.0,
            alpha: 0.1,
            z: 1.0,
            batch_size: 1,
            inner_iters: 2,
            empirical: false,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn worked_recursion() {
        let s = lyapunov_schedule(&worked_example());
        assert_eq!(s.lambda[2], 0.0);
        assert!(rel(s.lambda[1], 0.015) < 1e-14);
        assert!(rel(s.big_lambda[1], 0.025) < 1e-14);
        assert!(rel(s.big_lambda[0], 0.02335) < 1e-14);
        assert!(rel(s.lambda_min, 0.02335) < 1e-14);
        assert!(s.is_valid());
    }

    #[test]
    fn last_coefficient_is_quarter_alpha() {
        for alpha in [0.3, 0.01, 1e-4] {
            for s_len in [1, 3, 10] {
                let c = TheoryConstants {
                    alpha,
                    inner_iters: s_len,
                    ..worked_example()
                };
                let sched = lyapunov_schedule(&c);
                assert_eq!(sched.big_lambda[s_len - 1], alpha / 4.0);
                assert_eq!(sched.lambda.len(), s_len + 1);
            }
        }
    }

    #[test]
    fn lambda_min_vanishes_with_alpha() {
        let mut prev = f64::INFINITY;
        for alpha in [1e-2, 1e-3, 1e-4] {
            let c = TheoryConstants {
                alpha,
                ..worked_example()
            };
            let m = lyapunov_schedule(&c).lambda_min;
            assert!(m > 0.0 && m < prev);
            prev = m;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn bound_values() {
        assert_eq!(convergence_bound(1.0, 1.0, 5, 3, 0.1).unwrap(), 0.0);
        assert_eq!(convergence_bound(1.0, 0.0, 0, 1, 0.025).unwrap(), 40.0);
        let a = convergence_bound(2.0, 0.5, 3, 4, 0.2).unwrap();
        let b = convergence_bound(2.0, 0.5, 7, 4, 0.2).unwrap();
        assert!(rel(a / 2.0, b) < 1e-15);
        assert!(matches!(
            convergence_bound(1.0, 0.0, 0, 1, 0.0),
            Err(Error::BoundInvalid(_))
        ));
        assert!(matches!(
            convergence_bound(1.0, 0.0, 0, 1, -1.0),
            Err(Error::BoundInvalid(_))
        ));
    }

    #[test]
    fn best_z_is_grid_argmax() {
        let c = TheoryConstants {
            lipschitz_component: 3.0,
            batch_size: 2,
            inner_iters: 6,
            alpha: 0.05,
            ..worked_example()
        };
        let grid = z_grid();
        let best = best_z(&c, &grid);
        for &z in &grid {
            assert!(lyapunov_schedule(&c.with_z(z)).lambda_min <= best.lambda_min);
        }
        assert!(grid.contains(&best.z));
    }

    #[test]
    fn report_line_format() {
        let c = Check::compare("variance[0]", 0.5, 1.0, 0.0);
        let line = c.to_string();
        assert!(line.starts_with("CHECK variance[0] PASS lhs="), "{line}");
        assert!(line.contains(" rhs=") && line.contains(" slack="));
        let s = Check::skip("theorem", "bound vacuous");
        assert!(s.to_string().starts_with("CHECK theorem SKIP"));
        assert!(s.to_string().ends_with("reason=bound vacuous"));
    }

    #[test]
    fn vacuous_theorem_bound_is_skipped() {
        let c = TheoryConstants {
            lipschitz_component: 100.0,
            alpha: 0.1,
            inner_iters: 5,
            ..worked_example()
        };
        let sched = lyapunov_schedule(&c);
        assert!(!sched.is_valid());
        let check = verify_theorem_bound(&[], &c, &sched, 3).unwrap();
        assert_eq!(check.status, CheckStatus::Skip);
    }
}
