//! The four subcommands. Each takes a typed config and returns what it wrote
//! so that tests can drive them without a process boundary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trsvr::drivers::{self, Optimizer, RunConfig, StopReason, Trace};
use trsvr::problems::LinearModelProblem;
use trsvr::theory::{
    self, AnalysisParams, Check, CheckStatus, ReplaySettings, Report, TheoryConstants, VarianceMode,
};
use trsvr::trust_region::{HessianMode, RadiusMode};
use trsvr::{estimators, FiniteSum};

use crate::config::ExperimentConfig;
use crate::metrics;
use crate::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub csv: PathBuf,
    pub trace: Trace,
    pub summary: String,
}

/// Runs the configured optimizer and writes its metrics CSV to `out`, or to
/// `<dir>/<name>.csv` when `out` is absent.
pub fn cmd_run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome, CliError> {
    let problem = cfg.build_problem()?;
    let run_cfg = cfg.run_config(&problem)?;
    let started = Instant::now();
    let trace = drivers::run(&problem, &run_cfg)?;
    let wall = started.elapsed().as_secs_f64();

    let csv = out.map(Path::to_path_buf).unwrap_or_else(|| {
        cfg.output
            .resolve_dir()
            .join(format!("{}.csv", cfg.output.name))
    });
    let mut w = create(&csv)?;
    metrics::write_csv(&trace, &mut w)?;
    w.flush()?;

    let final_f = trsvr::evaluate_objective(&problem, &trace.final_x)?;
    let final_g = trsvr::linalg::norm(&trsvr::full_gradient(&problem, &trace.final_x)?);
    let stop = match trace.stop {
        StopReason::Completed => "completed",
        StopReason::GradientTolerance => "gradient_tolerance",
        StopReason::EvalBudget => "eval_budget",
    };
    let summary = format!(
        "optimizer={} final_f={} final_grad_norm={} evals={} wall_time_s={:.3} stop={stop} csv={}",
        trace.optimizer.as_str(),
        metrics::fmt_float(final_f),
        metrics::fmt_float(final_g),
        trace.evals(),
        wall,
        csv.display()
    );
    Ok(RunOutcome {
        csv,
        trace,
        summary,
    })
}

fn sample_points(
    cfg: &ExperimentConfig,
    problem: &dyn FiniteSum,
    run_cfg: &RunConfig,
) -> Vec<Vec<f64>> {
    let d = problem.dim();
    let center = run_cfg.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.theory.sample_seed);
    let mut pts = vec![center.clone()];
    for _ in 1..cfg.theory.sample_points.max(2) {
        pts.push(
            center
                .iter()
                .map(|c| c + rng.gen_range(-1.0..1.0))
                .collect(),
        );
    }
    pts
}

/// Analysis constants for `cfg`: estimated, then overridden by any constant
/// set in `[theory]`.
pub fn theory_constants(
    cfg: &ExperimentConfig,
    problem: &dyn FiniteSum,
    run_cfg: &RunConfig,
) -> Result<TheoryConstants, CliError> {
    let t = &cfg.theory;
    if !(t.z > 0.0) {
        return Err(CliError::Validation("theory.z: must be positive".into()));
    }
    if matches!(run_cfg.hessian, HessianMode::Lbfgs { .. })
        && run_cfg.hessian_cap.is_none()
        && t.approx_bound.is_none()
    {
        return Err(CliError::Validation(
            "optimizer.hessian_cap: L-BFGS models need a cap (or theory.approx_bound) to bound K_H"
                .into(),
        ));
    }
    let params = AnalysisParams::from_run_config(run_cfg, t.z);
    let mut c = theory::estimate_constants(problem, &sample_points(cfg, problem, run_cfg), params)?;
    if let Some(v) = t.lipschitz_grad {
        c.lipschitz_grad = v;
    }
    if let Some(v) = t.hessian_bound {
        c.hessian_bound = v;
        if params.hessian_approx_bound.is_none() {
            c.approx_bound = v;
        }
    }
    if let Some(v) = t.approx_bound {
        c.approx_bound = v;
    }
    if let Some(v) = t.lipschitz_component {
        c.lipschitz_component = v;
    }
    if let Some(v) = t.sigma_g {
        c.sigma_g = v;
    }
    if let Some(v) = t.f_inf {
        c.f_inf = v;
    }
    Ok(c)
}

/// Schedule at the configured `z`, or the grid maximizer when searching and
/// it is better.
pub fn chosen_schedule(cfg: &ExperimentConfig, c: &TheoryConstants) -> theory::LyapunovSchedule {
    let fixed = theory::lyapunov_schedule(c);
    if !cfg.theory.z_search {
        return fixed;
    }
    let best = theory::best_z(c, &theory::z_grid());
    if best.lambda_min > fixed.lambda_min {
        best
    } else {
        fixed
    }
}

/// The constants table: constants, `λ_s`, `Λ_s`, `Λ_min`, the best grid `z`
/// and the bound for the configured `(K, S)`.
pub fn cmd_constants(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let problem = cfg.build_problem()?;
    let run_cfg = cfg.run_config(&problem)?;
    let c = theory_constants(cfg, &problem, &run_cfg)?;
    let sched = theory::lyapunov_schedule(&c);
    let best = theory::best_z(&c, &theory::z_grid());

    let mut out = String::new();
    let mut line = |k: &str, v: String| writeln!(out, "{k:<16} {v}").unwrap();
    line("problem", problem.name().to_string());
    line("L_grad", c.lipschitz_grad.to_string());
    line("L_H", c.hessian_bound.to_string());
    line("K_H", c.approx_bound.to_string());
    line("L", c.lipschitz_component.to_string());
    line("sigma_g", c.sigma_g.to_string());
    line("f_inf", c.f_inf.to_string());
    line("empirical", c.empirical.to_string());
    line("alpha", c.alpha.to_string());
    line("alpha_max", c.max_alpha().to_string());
    line("step_size_ok", c.step_size_ok().to_string());
    line("b", c.batch_size.to_string());
    line("S", c.inner_iters.to_string());
    line("z", c.z.to_string());
    for (s, v) in sched.lambda.iter().enumerate() {
        line(&format!("lambda[{s}]"), v.to_string());
    }
    for (s, v) in sched.big_lambda.iter().enumerate() {
        line(&format!("Lambda[{s}]"), v.to_string());
    }
    line("Lambda_min", sched.lambda_min.to_string());
    line("valid", sched.is_valid().to_string());
    line("z_best", best.z.to_string());
    line("Lambda_min_best", best.lambda_min.to_string());

    let chosen = if cfg.theory.z_search && best.lambda_min > sched.lambda_min {
        &best
    } else {
        &sched
    };
    let x0 = run_cfg
        .x0
        .clone()
        .unwrap_or_else(|| vec![0.0; problem.dim()]);
    let f0 = trsvr::evaluate_objective(&problem, &x0)?;
    let k = run_cfg.outer_iters.saturating_sub(1);
    let bound = match theory::convergence_bound(f0, c.f_inf, k, c.inner_iters, chosen.lambda_min) {
        Ok(v) => v.to_string(),
        Err(trsvr::Error::BoundInvalid(_)) => "vacuous".to_string(),
        Err(e) => return Err(e.into()),
    };
    line("f0", f0.to_string());
    line(&format!("bound[K={k}]"), bound);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyKind {
    Variance,
    Decrease,
    Theorem,
    All,
}

impl VerifyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerifyKind::Variance => "variance",
            VerifyKind::Decrease => "decrease",
            VerifyKind::Theorem => "theorem",
            VerifyKind::All => "all",
        }
    }
}

fn require_analysis_setting(run_cfg: &RunConfig) -> Result<(), CliError> {
    if run_cfg.optimizer != Optimizer::TrSvr {
        return Err(CliError::Validation(
            "optimizer.algorithm: theory checks apply to trsvr runs".into(),
        ));
    }
    if run_cfg.radius_mode == RadiusMode::Clipped {
        return Err(CliError::Validation(
            "optimizer.radius_policy: the analysis assumes the proportional policy; set radius_policy = \"proportional\""
                .into(),
        ));
    }
    Ok(())
}

fn variance_report(
    cfg: &ExperimentConfig,
    problem: &LinearModelProblem,
    run_cfg: &RunConfig,
    c: &TheoryConstants,
) -> Result<Report, CliError> {
    let d = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.theory.sample_seed ^ 0x5eed);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.theory.pairs)
        .map(|_| {
            let xs = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x0 = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            (xs, x0)
        })
        .collect();
    let feasible = estimators::binomial(problem.num_components(), c.batch_size)
        .is_some_and(|n| n <= theory::ENUMERATION_LIMIT);
    let mode = match cfg.theory.mc_trials {
        None if feasible => VarianceMode::ExactEnumeration,
        trials => VarianceMode::MonteCarlo {
            trials: trials.unwrap_or(2000),
            seed: run_cfg.seed,
        },
    };
    Ok(theory::verify_variance_bound(
        problem,
        c,
        &pairs,
        mode,
        run_cfg.exec,
    )?)
}

fn decrease_report(
    cfg: &ExperimentConfig,
    problem: &LinearModelProblem,
    run_cfg: &RunConfig,
    c: &TheoryConstants,
) -> Result<Report, CliError> {
    require_analysis_setting(run_cfg)?;
    let traced = RunConfig {
        diag_every: 1,
        snapshot_every: Some(run_cfg.snapshot_every.unwrap_or(1)),
        strict: false,
        ..run_cfg.clone()
    };
    let trace = drivers::run(problem, &traced)?;
    let replay = ReplaySettings {
        states: cfg.theory.replay_states,
        trials: cfg.theory.replay_trials,
        seed: run_cfg.seed ^ 0xdec0,
    };
    Ok(theory::verify_decrease_lemmas(
        &trace, problem, c, &traced, replay,
    )?)
}

fn theorem_report(
    cfg: &ExperimentConfig,
    problem: &LinearModelProblem,
    run_cfg: &RunConfig,
    c: &TheoryConstants,
) -> Result<Report, CliError> {
    require_analysis_setting(run_cfg)?;
    let sched = chosen_schedule(cfg, &c.with_z(cfg.theory.z));
    let c = c.with_z(sched.z);
    let seeds: Vec<u64> = (0..cfg.theory.seeds as u64)
        .map(|i| run_cfg.seed + i)
        .collect();
    let mut ks = cfg.theory.k_values.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut report = Report::default();
    for &k in &ks {
        report.checks.push(theory::theorem_check(
            problem, run_cfg, &c, &sched, k, &seeds,
        )?);
    }
    if ks.len() >= 2 {
        let first = &report.checks[0];
        let last = &report.checks[ks.len() - 1];
        let name = format!("theorem_rate[K={}<=K={}]", ks[ks.len() - 1], ks[0]);
        if first.status == CheckStatus::Skip || last.status == CheckStatus::Skip {
            report
                .checks
                .push(Check::skip(name, "bound vacuous for this configuration"));
        } else {
            report
                .checks
                .push(Check::compare(name, last.lhs, first.lhs, 0.0));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub report: Report,
    pub path: PathBuf,
}

/// Runs the selected checks and writes `<dir>/<name>_verify_<which>.txt`.
pub fn cmd_verify(cfg: &ExperimentConfig, which: VerifyKind) -> Result<VerifyOutcome, CliError> {
    let problem = cfg.build_problem()?;
    let run_cfg = cfg.run_config(&problem)?;
    let c = theory_constants(cfg, &problem, &run_cfg)?;
    let mut report = Report::default();
    if matches!(which, VerifyKind::Variance | VerifyKind::All) {
        report.extend(variance_report(cfg, &problem, &run_cfg, &c)?);
    }
    if matches!(which, VerifyKind::Decrease | VerifyKind::All) {
        report.extend(decrease_report(cfg, &problem, &run_cfg, &c)?);
    }
    if matches!(which, VerifyKind::Theorem | VerifyKind::All) {
        report.extend(theorem_report(cfg, &problem, &run_cfg, &c)?);
    }
    let path =
        cfg.output
            .resolve_dir()
            .join(format!("{}_verify_{}.txt", cfg.output.name, which.as_str()));
    let mut w = create(&path)?;
    write!(w, "{report}")?;
    w.flush()?;
    Ok(VerifyOutcome { report, path })
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub series: Vec<PathBuf>,
    pub index: PathBuf,
}

/// Runs every config and writes one series file per run plus `index.txt`
/// into the first config's output directory.
pub fn cmd_compare(cfgs: &[ExperimentConfig]) -> Result<CompareOutcome, CliError> {
    if cfgs.len() < 2 {
        return Err(CliError::Validation(
            "compare needs at least two runs".into(),
        ));
    }
    if let Some(i) = cfgs.iter().position(|c| c.problem != cfgs[0].problem) {
        return Err(CliError::Validation(format!(
            "problem: run {i} uses a different [problem] section than run 0"
        )));
    }
    let dir = cfgs[0].output.resolve_dir();
    let problem = cfgs[0].build_problem()?;
    let mut labels: Vec<String> = Vec::new();
    let mut series = Vec::new();
    let mut index = String::new();
    for (i, cfg) in cfgs.iter().enumerate() {
        let run_cfg = cfg.run_config(&problem)?;
        let mut label = format!("{}_{}", cfg.output.name, run_cfg.optimizer.as_str());
        if labels.contains(&label) {
            label = format!("{label}_{i}");
        }
        let trace = drivers::run(&problem, &run_cfg)?;
        let path = dir.join(format!("{label}.dat"));
        let mut w = create(&path)?;
        metrics::write_series(&trace, &mut w)?;
        w.flush()?;
        writeln!(
            index,
            "{label} {} seed={} evals={} {}",
            run_cfg.optimizer.as_str(),
            run_cfg.seed,
            trace.evals(),
            path.display()
        )
        .unwrap();
        labels.push(label);
        series.push(path);
    }
    let index_path = dir.join("index.txt");
    let mut w = create(&index_path)?;
    w.write_all(index.as_bytes())?;
    w.flush()?;
    Ok(CompareOutcome {
        series,
        index: index_path,
    })
}
