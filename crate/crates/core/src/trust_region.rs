//! Quadratic trust-region models `m(p) = ḡᵀp + ½ pᵀHp` on `‖p‖ ≤ Δ`, their
//! subproblem solvers and the gradient-norm radius policies.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::problem::{EstimateKind, FiniteSum, GradientEstimate, IterateState};

/// Power-iteration steps used to estimate `‖H‖`.
pub const NORM_ESTIMATE_ITERS: usize = 50;

/// Slack used by [`check_cauchy_decrease`].
pub const CAUCHY_SLACK: f64 = 1e-10;

/// Which Hessian approximation `H_{k,s}` to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HessianMode {
    /// `∇²f(x_{k,s})` through the problem's Hessian-vector product.
    ExactHvp,
    /// `c · I`.
    IdentityScaled(f64),
    /// `diag(∇²f(x_{k,s}))`.
    Diagonal,
    /// Limited-memory BFGS from the stored curvature pairs.
    Lbfgs { memory: usize },
}

/// Curvature pairs `(s_j, y_j)` for the L-BFGS approximation, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsMemory {
    capacity: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stores a pair if it satisfies the curvature condition `sᵀy > 0`
    /// (relative to `‖s‖‖y‖`). Returns whether it was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = linalg::dot(&s, &y);
        if self.capacity == 0 || !(sy > 1e-10 * linalg::norm(&s) * linalg::norm(&y)) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y));
        true
    }

    /// The compact direct BFGS operator, or `None` with no history.
    pub fn operator(&self) -> Option<LbfgsOperator> {
        let (s_last, y_last) = self.pairs.back()?;
        let gamma = linalg::norm_sq(y_last) / linalg::dot(s_last, y_last);
        let mut op = LbfgsOperator {
            gamma,
            terms: Vec::with_capacity(self.pairs.len()),
        };
        for (s, y) in &self.pairs {
            let u = op.apply(s);
            let su = linalg::dot(s, &u);
            let ys = linalg::dot(y, s);
            op.terms.push(LbfgsTerm {
                u,
                su,
                y: y.clone(),
                ys,
            });
        }
        Some(op)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LbfgsTerm {
    u: Vec<f64>,
    su: f64,
    y: Vec<f64>,
    ys: f64,
}

/// `B v = γv − Σ_j (u_jᵀv / s_jᵀu_j) u_j + Σ_j (y_jᵀv / y_jᵀs_j) y_j` with
/// `u_j = B_j s_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOperator {
    gamma: f64,
    terms: Vec<LbfgsTerm>,
}

impl LbfgsOperator {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().map(|x| self.gamma * x).collect();
        for t in &self.terms {
            linalg::axpy(-linalg::dot(&t.u, v) / t.su, &t.u, &mut out);
            linalg::axpy(linalg::dot(&t.y, v) / t.ys, &t.y, &mut out);
        }
        out
    }
}

/// A symmetric linear map `v ↦ Hv`.
#[derive(Clone)]
pub enum HessianOperator<'a> {
    ScaledIdentity(f64),
    Diagonal(Vec<f64>),
    Dense(SymMatrix),
    Exact {
        problem: &'a dyn FiniteSum,
        x: Vec<f64>,
    },
    Lbfgs(LbfgsOperator),
}

impl std::fmt::Debug for HessianOperator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HessianOperator::ScaledIdentity(c) => write!(f, "ScaledIdentity({c})"),
            HessianOperator::Diagonal(d) => write!(f, "Diagonal({d:?})"),
            HessianOperator::Dense(m) => write!(f, "Dense({}x{})", m.dim(), m.dim()),
            HessianOperator::Exact { problem, .. } => write!(f, "Exact({})", problem.name()),
            HessianOperator::Lbfgs(op) => write!(f, "Lbfgs({} pairs)", op.terms.len()),
        }
    }
}

impl HessianOperator<'_> {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            HessianOperator::ScaledIdentity(c) => v.iter().map(|x| c * x).collect(),
            HessianOperator::Diagonal(d) => v.iter().zip(d).map(|(x, h)| x * h).collect(),
            HessianOperator::Dense(m) => m.mul_vec(v),
            HessianOperator::Exact { problem, x } => problem
                .hessian_vector_product(x, v)
                .expect("exact Hessian operator is only built for problems with HVPs"),
            HessianOperator::Lbfgs(op) => op.apply(v),
        }
    }
}

/// The model `m(p) = ḡᵀp + ½ pᵀ(σH)p` on the ball `‖p‖ ≤ Δ`.
#[derive(Debug, Clone)]
pub struct TrustRegionModel<'a> {
    gradient: Vec<f64>,
    hessian: HessianOperator<'a>,
    /// Rescaling applied so that `‖σH‖ ≤ cap`.
    hessian_scale: f64,
    radius: f64,
    hessian_norm: f64,
    /// `ḡᵀHḡ` (after rescaling).
    curvature_along_gradient: f64,
}

impl<'a> TrustRegionModel<'a> {
    /// Builds a model and estimates `K_H ≥ ‖H‖` by power iteration. When
    /// `cap` is given and the estimate exceeds it, `H` is rescaled to meet it.
    pub fn new(
        gradient: Vec<f64>,
        hessian: HessianOperator<'a>,
        radius: f64,
        cap: Option<f64>,
    ) -> Result<Self> {
        let d = gradient.len();
        if !linalg::all_finite(&gradient) || !radius.is_finite() || radius < 0.0 {
            return Err(Error::numeric("trust-region model data", None));
        }
        let hg = hessian.apply(&gradient);
        let ghg = linalg::dot(&gradient, &hg);
        let gn2 = linalg::norm_sq(&gradient);
        let mut norm = match &hessian {
            HessianOperator::ScaledIdentity(c) => c.abs(),
            HessianOperator::Diagonal(diag) => diag.iter().fold(0.0f64, |m, h| m.max(h.abs())),
            other => linalg::power_iteration(d, NORM_ESTIMATE_ITERS, |v| other.apply(v)),
        };
        if gn2 > 0.0 {
            // Rayleigh quotient along ḡ is another lower bound on ‖H‖.
            norm = norm.max(ghg.abs() / gn2);
        }
        if !norm.is_finite() || !ghg.is_finite() {
            return Err(Error::numeric("Hessian approximation", None));
        }
        let mut scale = 1.0;
        if let Some(cap) = cap {
            if norm > cap {
                scale = cap / norm;
                norm = cap;
            }
        }
        Ok(Self {
            gradient,
            hessian,
            hessian_scale: scale,
            radius,
            hessian_norm: norm,
            curvature_along_gradient: scale * ghg,
        })
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Reported bound `K_H` on `‖H‖`.
    pub fn hessian_norm(&self) -> f64 {
        self.hessian_norm
    }

    pub fn hessian_scale(&self) -> f64 {
        self.hessian_scale
    }

    pub fn apply_hessian(&self, v: &[f64]) -> Vec<f64> {
        let mut hv = self.hessian.apply(v);
        if self.hessian_scale != 1.0 {
            linalg::scale(self.hessian_scale, &mut hv);
        }
        hv
    }

    /// `m(p) − m(0)`.
    pub fn evaluate(&self, p: &[f64]) -> f64 {
        linalg::dot(&self.gradient, p) + 0.5 * linalg::dot(p, &self.apply_hessian(p))
    }
}

/// Builds `H_{k,s}` for the current state and returns the model with radius
/// `state.radius`.
pub fn build_model<'a>(
    problem: &'a dyn FiniteSum,
    state: &IterateState,
    estimate: &GradientEstimate,
    mode: HessianMode,
    lbfgs: Option<&LbfgsMemory>,
    cap: Option<f64>,
) -> Result<TrustRegionModel<'a>> {
    if estimate.kind == EstimateKind::Minibatch {
        return Err(Error::Contract(
            "trust-region models take a variance-reduced or full gradient".into(),
        ));
    }
    let x = &state.x;
    let hessian = match mode {
        HessianMode::IdentityScaled(c) => HessianOperator::ScaledIdentity(c),
        HessianMode::ExactHvp => {
            if problem
                .hessian_vector_product(x, &vec![0.0; x.len()])
                .is_none()
            {
                return Err(Error::Config(format!(
                    "hessian mode exact_hvp needs Hessian-vector products, which `{}` lacks",
                    problem.name()
                )));
            }
            HessianOperator::Exact {
                problem,
                x: x.clone(),
            }
        }
        HessianMode::Diagonal => {
            let diag = match problem.hessian_diagonal(x) {
                Some(d) => d,
                None => diagonal_from_hvp(problem, x)?,
            };
            HessianOperator::Diagonal(diag)
        }
        HessianMode::Lbfgs { .. } => match lbfgs.and_then(LbfgsMemory::operator) {
            Some(op) => HessianOperator::Lbfgs(op),
            None => HessianOperator::ScaledIdentity(1.0),
        },
    };
    TrustRegionModel::new(estimate.value.clone(), hessian, state.radius, cap)
}

fn diagonal_from_hvp(problem: &dyn FiniteSum, x: &[f64]) -> Result<Vec<f64>> {
    let d = x.len();
    let mut e = vec![0.0; d];
    let mut diag = Vec::with_capacity(d);
    for j in 0..d {
        e[j] = 1.0;
        let hv = problem.hessian_vector_product(x, &e).ok_or_else(|| {
            Error::Config(format!(
                "hessian mode diagonal needs a Hessian diagonal or HVPs, which `{}` lacks",
                problem.name()
            ))
        })?;
        diag.push(hv[j]);
        e[j] = 0.0;
    }
    Ok(diag)
}

/// A subproblem solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub direction: Vec<f64>,
    /// `m(Δx) − m(0)`.
    pub model_decrease: f64,
    pub on_boundary: bool,
    /// CG stopped on the iteration limit.
    pub truncated: bool,
    /// CG result was worse than the Cauchy point and was replaced by it.
    pub cauchy_fallback: bool,
}

impl Step {
    fn zero(d: usize) -> Self {
        Self {
            direction: vec![0.0; d],
            model_decrease: 0.0,
            on_boundary: false,
            truncated: false,
            cauchy_fallback: false,
        }
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.direction)
    }
}

/// Minimizer of the model along `−ḡ` within the ball.
pub fn cauchy_step(model: &TrustRegionModel) -> Result<Step> {
    let g = model.gradient();
    let gn = linalg::norm(g);
    let delta = model.radius;
    if gn == 0.0 || delta == 0.0 {
        return Ok(Step::zero(g.len()));
    }
    let ghg = model.curvature_along_gradient;
    let t = if ghg <= 0.0 {
        delta
    } else {
        delta.min(gn * gn * gn / ghg)
    };
    let direction: Vec<f64> = g.iter().map(|v| -t * v / gn).collect();
    let model_decrease = -t * gn + 0.5 * t * t * ghg / (gn * gn);
    if !model_decrease.is_finite() || !linalg::all_finite(&direction) {
        return Err(Error::numeric("Cauchy step", None));
    }
    Ok(Step {
        direction,
        model_decrease,
        on_boundary: t == delta,
        truncated: false,
        cauchy_fallback: false,
    })
}

/// Positive root `τ` of `‖z + τd‖ = Δ`.
fn boundary_tau(z: &[f64], d: &[f64], delta: f64) -> f64 {
    let a = linalg::norm_sq(d);
    let b = 2.0 * linalg::dot(z, d);
    let c = linalg::norm_sq(z) - delta * delta;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    let q = -0.5 * (b + b.signum() * disc);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    r1.max(r2).max(0.0)
}

fn clamp_to_ball(p: &mut [f64], delta: f64) {
    let n = linalg::norm(p);
    if n > delta {
        linalg::scale(delta / n, p);
    }
}

/// Steihaug–Toint truncated conjugate gradient. Stops on a relative residual
/// `≤ tol·‖ḡ‖`, on reaching the boundary, or on negative curvature. The result
/// is never worse than the Cauchy step.
pub fn steihaug_cg(model: &TrustRegionModel, tol: f64, max_iter: usize) -> Result<Step> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!(
            "CG tolerance must be positive, got {tol}"
        )));
    }
    let g = model.gradient();
    let dim = g.len();
    let gn = linalg::norm(g);
    let delta = model.radius;
    if gn == 0.0 || delta == 0.0 {
        return Ok(Step::zero(dim));
    }

    let mut z = vec![0.0; dim];
    let mut r = g.to_vec();
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut rr = linalg::norm_sq(&r);
    let mut on_boundary = false;
    let mut truncated = true;

    for _ in 0..max_iter {
        let hd = model.apply_hessian(&d);
        let dhd = linalg::dot(&d, &hd);
        if !dhd.is_finite() {
            return Err(Error::numeric("CG curvature", None));
        }
        if dhd <= 0.0 {
            let tau = boundary_tau(&z, &d, delta);
            linalg::axpy(tau, &d, &mut z);
            on_boundary = true;
            truncated = false;
            break;
        }
        let alpha = rr / dhd;
        let mut z_next = z.clone();
        linalg::axpy(alpha, &d, &mut z_next);
        if linalg::norm(&z_next) >= delta {
            let tau = boundary_tau(&z, &d, delta);
            linalg::axpy(tau, &d, &mut z);
            on_boundary = true;
            truncated = false;
            break;
        }
        z = z_next;
        linalg::axpy(alpha, &hd, &mut r);
        let rr_next = linalg::norm_sq(&r);
        if rr_next.sqrt() <= tol * gn {
            truncated = false;
            break;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for (di, ri) in d.iter_mut().zip(&r) {
            *di = -ri + beta * *di;
        }
    }
    clamp_to_ball(&mut z, delta);
    let model_decrease = model.evaluate(&z);
    if !model_decrease.is_finite() {
        return Err(Error::numeric("CG step", None));
    }
    let cauchy = cauchy_step(model)?;
    if model_decrease > cauchy.model_decrease {
        return Ok(Step {
            cauchy_fallback: true,
            truncated,
            ..cauchy
        });
    }
    Ok(Step {
        direction: z,
        model_decrease,
        on_boundary,
        truncated,
        cauchy_fallback: false,
    })
}

/// `m(Δx) − m(0) ≤ −‖ḡ‖Δ + ½‖H‖Δ²` up to [`CAUCHY_SLACK`].
pub fn check_cauchy_decrease(model: &TrustRegionModel, step: &Step) -> bool {
    let gn = linalg::norm(model.gradient());
    let delta = model.radius;
    let rhs = -gn * delta + 0.5 * model.hessian_norm * delta * delta;
    step.model_decrease <= rhs + CAUCHY_SLACK
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusMode {
    /// `Δ = α‖ḡ‖`.
    #[default]
    Proportional,
    /// Three-case rule with thresholds `1/η₁ < 1/η₂`.
    Clipped,
}

/// Maps the gradient-estimate norm to the radius of the current step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusPolicy {
    mode: RadiusMode,
    alpha: f64,
    eta1: f64,
    eta2: f64,
}

impl RadiusPolicy {
    pub fn proportional(alpha: f64) -> Result<Self> {
        Self::new(RadiusMode::Proportional, alpha, 1.0, 1.0)
    }

    pub fn clipped(alpha: f64, eta1: f64, eta2: f64) -> Result<Self> {
        Self::new(RadiusMode::Clipped, alpha, eta1, eta2)
    }

    pub fn new(mode: RadiusMode, alpha: f64, eta1: f64, eta2: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if mode == RadiusMode::Clipped && !(eta1 > eta2 && eta2 > 0.0 && eta1.is_finite()) {
            return Err(Error::Config(format!(
                "clipped radius policy needs eta1 > eta2 > 0 (got eta1 = {eta1}, eta2 = {eta2})"
            )));
        }
        Ok(Self {
            mode,
            alpha,
            eta1,
            eta2,
        })
    }

    pub fn mode(&self) -> RadiusMode {
        self.mode
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Radius for a step whose gradient estimate has norm `gnorm`. Ties at
    /// `1/η₁` and `1/η₂` go to the middle case.
    pub fn update_radius(&self, gnorm: f64) -> f64 {
        match self.mode {
            RadiusMode::Proportional => self.alpha * gnorm,
            RadiusMode::Clipped => {
                if gnorm < 1.0 / self.eta1 {
                    self.eta1 * self.alpha * gnorm
                } else if gnorm <= 1.0 / self.eta2 {
                    self.alpha
                } else {
                    self.eta2 * self.alpha * gnorm
                }
            }
        }
    }
}
