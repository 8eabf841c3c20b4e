//! Finite-sum objectives `f(x) = (1/N) Σ f_i(x)`, iterate state and the
//! seeded randomness contract shared by the optimizers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::linalg;

/// Constants a problem can report in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormConstants {
    /// Lipschitz constant of ∇f.
    pub lipschitz_grad: f64,
    /// Uniform bound on ‖∇²f‖₂.
    pub hessian_bound: f64,
    /// Largest Lipschitz constant of the component gradients ∇f_i.
    pub lipschitz_component: f64,
    /// A lower bound on f (the exact infimum when available).
    pub f_inf: f64,
}

/// An objective of the form `f(x) = (1/N) Σ_{i<N} f_i(x)`.
///
/// Implementations must be deterministic in `(i, x)` and immutable after
/// construction. Component indices are 0-based.
pub trait FiniteSum: Send + Sync {
    fn name(&self) -> &str;

    /// Number of components `N`.
    fn num_components(&self) -> usize;

    /// Dimension `d` of the decision variable.
    fn dim(&self) -> usize;

    fn component_value(&self, i: usize, x: &[f64]) -> f64;

    /// Adds `∇f_i(x)` into `out`.
    fn add_component_gradient(&self, i: usize, x: &[f64], out: &mut [f64]);

    fn component_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.add_component_gradient(i, x, &mut g);
        g
    }

    /// `∇²f(x) v` for the full objective, when available.
    fn hessian_vector_product(&self, _x: &[f64], _v: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Diagonal of `∇²f(x)`, when cheaper than `d` Hessian-vector products.
    fn hessian_diagonal(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Constants known in closed form, if any.
    fn closed_form_constants(&self) -> Option<ClosedFormConstants> {
        None
    }
}

fn check_dim(problem: &dyn FiniteSum, x: &[f64], what: &str) -> Result<()> {
    if x.len() != problem.dim() {
        return Err(Error::Input(format!(
            "{what} has dimension {}, expected {}",
            x.len(),
            problem.dim()
        )));
    }
    Ok(())
}

/// `f(x)`, summed in ascending component order with the blocked reduction.
pub fn evaluate_objective(problem: &dyn FiniteSum, x: &[f64]) -> Result<f64> {
    evaluate_objective_with(Exec::default(), problem, x)
}

pub fn evaluate_objective_with(exec: Exec, problem: &dyn FiniteSum, x: &[f64]) -> Result<f64> {
    check_dim(problem, x, "x")?;
    let n = problem.num_components();
    if n == 0 {
        return Err(Error::Input("problem has no components".into()));
    }
    let idx: Vec<usize> = (0..n).collect();
    let total = exec::sum_scalars(exec, &idx, |&i| {
        let v = problem.component_value(i, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::numeric("component value", Some(i)))
        }
    })?;
    Ok(total / n as f64)
}

/// Mean of `∇f_i(x)` over the listed components, in list order.
pub(crate) fn mean_gradient(
    exec: Exec,
    problem: &dyn FiniteSum,
    x: &[f64],
    indices: &[usize],
) -> Result<Vec<f64>> {
    let n = problem.num_components();
    if indices.is_empty() {
        return Err(Error::Input("empty index set".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::Input(format!(
            "component index {bad} out of range for N = {n}"
        )));
    }
    let mut g = exec::sum_vectors(exec, indices, problem.dim(), |&i, acc| {
        problem.add_component_gradient(i, x, acc);
        if linalg::all_finite(acc) {
            Ok(())
        } else {
            Err(Error::numeric("component gradient", Some(i)))
        }
    })?;
    linalg::scale(1.0 / indices.len() as f64, &mut g);
    Ok(g)
}

/// `∇f(x) = (1/N) Σ ∇f_i(x)`.
pub fn full_gradient(problem: &dyn FiniteSum, x: &[f64]) -> Result<Vec<f64>> {
    full_gradient_with(Exec::default(), problem, x)
}

pub fn full_gradient_with(exec: Exec, problem: &dyn FiniteSum, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(problem, x, "x")?;
    let idx: Vec<usize> = (0..problem.num_components()).collect();
    mean_gradient(exec, problem, x, &idx)
}

/// Kind tag of a [`GradientEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    Full,
    Minibatch,
    VarianceReduced,
}

/// A gradient value together with how and where it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub value: Vec<f64>,
    pub kind: EstimateKind,
    /// Component indices used; empty for [`EstimateKind::Full`].
    pub batch: Vec<usize>,
    /// The point the estimate was evaluated at.
    pub point: Vec<f64>,
}

impl GradientEstimate {
    pub fn full(problem: &dyn FiniteSum, x: &[f64], exec: Exec) -> Result<Self> {
        Ok(Self {
            value: full_gradient_with(exec, problem, x)?,
            kind: EstimateKind::Full,
            batch: Vec::new(),
            point: x.to_vec(),
        })
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.value)
    }
}

/// State of the two-loop iteration at `(k, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub k: usize,
    pub s: usize,
    /// Current point `x_{k,s}`.
    pub x: Vec<f64>,
    /// Anchor `x_{k,0}`.
    pub anchor: Vec<f64>,
    /// Full gradient at the anchor.
    pub anchor_gradient: GradientEstimate,
    /// Radius `Δ_{k,s}`; zero only when the gradient estimate vanished.
    pub radius: f64,
}

impl IterateState {
    /// Starts outer iteration `k` at `x`, which becomes the anchor.
    pub fn at_anchor(problem: &dyn FiniteSum, x: Vec<f64>, k: usize, exec: Exec) -> Result<Self> {
        check_dim(problem, &x, "anchor")?;
        let anchor_gradient = GradientEstimate::full(problem, &x, exec)?;
        Ok(Self {
            k,
            s: 0,
            anchor: x.clone(),
            x,
            anchor_gradient,
            radius: f64::NAN,
        })
    }

    /// `x_{k,s+1} = x_{k,s} + step`.
    pub fn advance(&mut self, step: &[f64]) {
        linalg::axpy(1.0, step, &mut self.x);
        self.s += 1;
    }

    pub fn anchor_gradient_is_current(&self) -> bool {
        self.anchor_gradient.kind == EstimateKind::Full && self.anchor_gradient.point == self.anchor
    }

    pub fn distance_sq_to_anchor(&self) -> f64 {
        linalg::dist_sq(&self.x, &self.anchor)
    }
}

/// Seeded source of reproducible random streams indexed by `(k, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSource {
    pub seed: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// The generator for stream `(k, s)`. A pure function of `(seed, k, s)`.
    pub fn stream(&self, k: usize, s: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((k as u64) << 32) ^ (s as u64 & 0xffff_ffff));
        rng
    }

    /// An independent source for a different purpose (replays, data, ...).
    pub fn derive(&self, tag: u64) -> RandomSource {
        RandomSource {
            seed: splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Largest relative error between an analytic gradient and central finite
/// differences of `value` with step `h`. Entries are compared relative to
/// `max(1, ‖g‖∞)`.
pub fn finite_difference_error<V>(value: V, grad: &[f64], x: &[f64], h: f64) -> f64
where
    V: Fn(&[f64]) -> f64,
{
    let scale = grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
    let mut xp = x.to_vec();
    let mut worst = 0.0f64;
    for j in 0..x.len() {
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = value(&xp);
        xp[j] = orig - h;
        let fm = value(&xp);
        xp[j] = orig;
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - grad[j]).abs() / scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    /// f_i(x) = (i + 1) · x₀, d = 1.
    struct Linear {
        n: usize,
    }

    impl FiniteSum for Linear {
        fn name(&self) -> &str {
            "linear"
        }
        fn num_components(&self) -> usize {
            self.n
        }
        fn dim(&self) -> usize {
            1
        }
        fn component_value(&self, i: usize, x: &[f64]) -> f64 {
            (i + 1) as f64 * x[0]
        }
        fn add_component_gradient(&self, i: usize, _x: &[f64], out: &mut [f64]) {
            out[0] += (i + 1) as f64;
        }
    }

    /// Components with fixed gradients (1, 1) and (3, -1).
    struct FixedGradients;

    impl FiniteSum for FixedGradients {
        fn name(&self) -> &str {
            "fixed"
        }
        fn num_components(&self) -> usize {
            2
        }
        fn dim(&self) -> usize {
            2
        }
        fn component_value(&self, i: usize, x: &[f64]) -> f64 {
            if i == 0 {
                x[0] + x[1]
            } else {
                3.0 * x[0] - x[1]
            }
        }
        fn add_component_gradient(&self, i: usize, _x: &[f64], out: &mut [f64]) {
            let g = if i == 0 { [1.0, 1.0] } else { [3.0, -1.0] };
            out[0] += g[0];
            out[1] += g[1];
        }
    }

    struct Blowup;

    impl FiniteSum for Blowup {
        fn name(&self) -> &str {
            "blowup"
        }
        fn num_components(&self) -> usize {
            3
        }
        fn dim(&self) -> usize {
            1
        }
        fn component_value(&self, i: usize, _x: &[f64]) -> f64 {
            if i == 1 {
                f64::NAN
            } else {
                0.0
            }
        }
        fn add_component_gradient(&self, i: usize, _x: &[f64], out: &mut [f64]) {
            out[0] += if i == 2 { f64::INFINITY } else { 0.0 };
        }
    }

    #[test]
    fn objective_is_mean_of_components() {
        let p = Linear { n: 3 };
        assert_eq!(evaluate_objective(&p, &[2.0]).unwrap(), 4.0);
    }

    #[test]
    fn gradient_is_mean_of_component_gradients() {
        assert_eq!(
            full_gradient(&FixedGradients, &[0.3, 0.1]).unwrap(),
            vec![2.0, 0.0]
        );
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let p = Linear { n: 3 };
        assert!(matches!(
            evaluate_objective(&p, &[1.0, 2.0]),
            Err(Error::Input(_))
        ));
        assert!(matches!(full_gradient(&p, &[]), Err(Error::Input(_))));
    }

    #[test]
    fn non_finite_values_name_the_component() {
        assert_eq!(
            evaluate_objective(&Blowup, &[0.0]).unwrap_err(),
            Error::numeric("component value", Some(1))
        );
        assert_eq!(
            full_gradient(&Blowup, &[0.0]).unwrap_err(),
            Error::numeric("component gradient", Some(2))
        );
    }

    #[test]
    fn anchor_state_starts_at_anchor() {
        let st =
            IterateState::at_anchor(&FixedGradients, vec![1.0, 2.0], 3, Exec::Sequential).unwrap();
        assert_eq!(st.x, st.anchor);
        assert_eq!(st.s, 0);
        assert!(st.anchor_gradient_is_current());
    }

    #[test]
    fn streams_are_pure_functions_of_seed_and_index() {
        use rand::RngCore;
        let src = RandomSource::new(42);
        let a = src.stream(3, 4).next_u64();
        let b = src.stream(3, 4).next_u64();
        let c = src.stream(4, 3).next_u64();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(src.derive(1).seed, src.derive(2).seed);
    }
}
