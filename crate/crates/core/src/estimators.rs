//! Gradient oracles of the two-loop method: full, mini-batch and
//! variance-reduced estimates, plus batch sampling.

use itertools::Itertools;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::linalg;
use crate::problem::{
    mean_gradient, EstimateKind, FiniteSum, GradientEstimate, IterateState, RandomSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    WithReplacement,
    #[default]
    WithoutReplacement,
}

/// Draws mini-batches `I_{k,s}` of a fixed size from `[0, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSampler {
    num_components: usize,
    batch_size: usize,
    mode: SamplingMode,
    source: RandomSource,
}

impl BatchSampler {
    pub fn new(
        num_components: usize,
        batch_size: usize,
        mode: SamplingMode,
        source: RandomSource,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Input("batch size must be at least 1".into()));
        }
        if mode == SamplingMode::WithoutReplacement && batch_size > num_components {
            return Err(Error::Input(format!(
                "batch size {batch_size} exceeds N = {num_components} without replacement"
            )));
        }
        Ok(Self {
            num_components,
            batch_size,
            mode,
            source,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// The batch for `(k, s)`; a pure function of `(seed, k, s)`.
    pub fn sample_batch(&self, k: usize, s: usize) -> Vec<usize> {
        let mut rng = self.source.stream(k, s);
        match self.mode {
            SamplingMode::WithoutReplacement => {
                index::sample(&mut rng, self.num_components, self.batch_size).into_vec()
            }
            SamplingMode::WithReplacement => (0..self.batch_size)
                .map(|_| rng.gen_range(0..self.num_components))
                .collect(),
        }
    }
}

/// `(1/b) Σ_{i∈batch} ∇f_i(x)`.
pub fn minibatch_gradient(
    problem: &dyn FiniteSum,
    x: &[f64],
    batch: &[usize],
) -> Result<GradientEstimate> {
    minibatch_gradient_with(Exec::default(), problem, x, batch)
}

pub fn minibatch_gradient_with(
    exec: Exec,
    problem: &dyn FiniteSum,
    x: &[f64],
    batch: &[usize],
) -> Result<GradientEstimate> {
    if x.len() != problem.dim() {
        return Err(Error::Input(format!(
            "x has dimension {}, expected {}",
            x.len(),
            problem.dim()
        )));
    }
    Ok(GradientEstimate {
        value: mean_gradient(exec, problem, x, batch)?,
        kind: EstimateKind::Minibatch,
        batch: batch.to_vec(),
        point: x.to_vec(),
    })
}

/// `ḡ = g̃(x_{k,s}) − g̃(x_{k,0}) + g_{k,0}` with both mini-batch terms over
/// the same batch.
pub fn variance_reduced_gradient(
    problem: &dyn FiniteSum,
    state: &IterateState,
    batch: &[usize],
) -> Result<GradientEstimate> {
    variance_reduced_gradient_with(Exec::default(), problem, state, batch)
}

pub fn variance_reduced_gradient_with(
    exec: Exec,
    problem: &dyn FiniteSum,
    state: &IterateState,
    batch: &[usize],
) -> Result<GradientEstimate> {
    if !state.anchor_gradient_is_current() {
        return Err(Error::Contract(
            "anchor full gradient was not computed at the current anchor".into(),
        ));
    }
    let at_point = mean_gradient(exec, problem, &state.x, batch)?;
    let at_anchor = mean_gradient(exec, problem, &state.anchor, batch)?;
    let value: Vec<f64> = at_point
        .iter()
        .zip(&at_anchor)
        .zip(&state.anchor_gradient.value)
        .map(|((p, a), g0)| (p - a) + g0)
        .collect();
    if !linalg::all_finite(&value) {
        return Err(Error::numeric("variance-reduced gradient", None));
    }
    Ok(GradientEstimate {
        value,
        kind: EstimateKind::VarianceReduced,
        batch: batch.to_vec(),
        point: state.x.clone(),
    })
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloMean {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl MonteCarloMean {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            trials: n,
        }
    }
}

/// Monte-Carlo estimate of `E‖ḡ − ∇f(x_s)‖²` for anchor `x_0` and batch
/// size `b`. Trial `t` draws its batch from stream `(t, 0)` of `source`.
#[allow(clippy::too_many_arguments)]
pub fn estimator_variance(
    problem: &dyn FiniteSum,
    x_s: &[f64],
    x_0: &[f64],
    batch_size: usize,
    mode: SamplingMode,
    trials: usize,
    source: RandomSource,
    exec: Exec,
) -> Result<MonteCarloMean> {
    if trials == 0 {
        return Err(Error::Input("need at least one trial".into()));
    }
    let sampler = BatchSampler::new(problem.num_components(), batch_size, mode, source)?;
    let mut state = IterateState::at_anchor(problem, x_0.to_vec(), 0, exec)?;
    state.x = x_s.to_vec();
    let g = crate::problem::full_gradient_with(exec, problem, x_s)?;
    let ids: Vec<usize> = (0..trials).collect();
    let samples: Vec<Result<f64>> = exec::map_ordered(exec, &ids, |&t| {
        let batch = sampler.sample_batch(t, 0);
        let est = variance_reduced_gradient_with(Exec::Sequential, problem, &state, &batch)?;
        Ok(linalg::dist_sq(&est.value, &g))
    });
    let samples = samples.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(MonteCarloMean::from_samples(&samples))
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Exact moments of `ḡ` over all `C(N, b)` batches drawn without replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    /// Average of `ḡ` over all batches.
    pub mean: Vec<f64>,
    /// Average of `‖ḡ − ∇f(x_s)‖²` over all batches.
    pub variance: f64,
    pub batches: usize,
}

/// Enumerates every batch of size `b` and averages the variance-reduced
/// estimate at `x_s` anchored at `x_0`. Refuses more than `limit` batches.
pub fn exact_estimator_moments(
    problem: &dyn FiniteSum,
    x_s: &[f64],
    x_0: &[f64],
    batch_size: usize,
    limit: u128,
    exec: Exec,
) -> Result<ExactMoments> {
    let n = problem.num_components();
    if batch_size == 0 || batch_size > n {
        return Err(Error::Input(format!(
            "batch size {batch_size} not in [1, {n}]"
        )));
    }
    let count = binomial(n, batch_size).unwrap_or(u128::MAX);
    if count > limit {
        return Err(Error::Input(format!(
            "C({n}, {batch_size}) = {count} batches exceeds the enumeration limit {limit}; use Monte-Carlo mode"
        )));
    }
    let mut state = IterateState::at_anchor(problem, x_0.to_vec(), 0, exec)?;
    state.x = x_s.to_vec();
    let g = crate::problem::full_gradient_with(exec, problem, x_s)?;
    let batches: Vec<Vec<usize>> = (0..n).combinations(batch_size).collect();
    let d = problem.dim();
    // Each block yields (Σ ḡ, Σ ‖ḡ − g‖²); blocks are combined in order.
    let partials = exec::map_blocks(exec, &batches, |chunk| -> Result<(Vec<f64>, f64)> {
        let mut sum = vec![0.0; d];
        let mut sq = 0.0;
        for batch in chunk {
            let est = variance_reduced_gradient_with(Exec::Sequential, problem, &state, batch)?;
            linalg::axpy(1.0, &est.value, &mut sum);
            sq += linalg::dist_sq(&est.value, &g);
        }
        Ok((sum, sq))
    });
    let mut mean = vec![0.0; d];
    let mut variance = 0.0;
    for p in partials {
        let (s, q) = p?;
        linalg::axpy(1.0, &s, &mut mean);
        variance += q;
    }
    let m = batches.len() as f64;
    linalg::scale(1.0 / m, &mut mean);
    Ok(ExactMoments {
        mean,
        variance: variance / m,
        batches: batches.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::full_gradient;
    use crate::problems::{make_least_squares, Dataset};

    fn small_ls(n: usize) -> impl FiniteSum {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![1.0 + i as f64 * 0.3, (i as f64).sin(), 0.5 - i as f64 * 0.1])
            .collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        make_least_squares(Dataset::from_dense(rows, y).unwrap(), 0.05).unwrap()
    }

    #[test]
    fn full_batch_without_replacement_is_a_permutation() {
        let s = BatchSampler::new(7, 7, SamplingMode::WithoutReplacement, RandomSource::new(3))
            .unwrap();
        let mut b = s.sample_batch(2, 5);
        b.sort_unstable();
        assert_eq!(b, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn batches_are_reproducible_and_sized() {
        for mode in [
            SamplingMode::WithReplacement,
            SamplingMode::WithoutReplacement,
        ] {
            let s = BatchSampler::new(20, 4, mode, RandomSource::new(11)).unwrap();
            assert_eq!(s.sample_batch(1, 2), s.sample_batch(1, 2));
            assert_eq!(s.sample_batch(1, 2).len(), 4);
            assert!(s.sample_batch(0, 0).iter().all(|&i| i < 20));
        }
        let s = BatchSampler::new(
            20,
            4,
            SamplingMode::WithoutReplacement,
            RandomSource::new(11),
        )
        .unwrap();
        let b = s.sample_batch(9, 9);
        assert_eq!(b.iter().collect::<std::collections::BTreeSet<_>>().len(), 4);
    }

    #[test]
    fn oversized_batch_is_rejected() {
        assert!(
            BatchSampler::new(3, 4, SamplingMode::WithoutReplacement, RandomSource::new(0))
                .is_err()
        );
        assert!(
            BatchSampler::new(3, 4, SamplingMode::WithReplacement, RandomSource::new(0)).is_ok()
        );
        assert!(
            BatchSampler::new(3, 0, SamplingMode::WithReplacement, RandomSource::new(0)).is_err()
        );
    }

    #[test]
    fn sampling_frequencies_are_uniform() {
        let n = 10;
        let b = 3;
        let draws = 10_000;
        let s = BatchSampler::new(
            n,
            b,
            SamplingMode::WithoutReplacement,
            RandomSource::new(77),
        )
        .unwrap();
        let mut counts = vec![0usize; n];
        for t in 0..draws {
            for i in s.sample_batch(t, 0) {
                counts[i] += 1;
            }
        }
        let p = b as f64 / n as f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!(
                (c as f64 - draws as f64 * p).abs() <= 3.0 * sigma,
                "count {c}"
            );
        }
    }

    #[test]
    fn minibatch_over_all_indices_is_the_full_gradient() {
        let p = small_ls(5);
        let x = [0.3, -1.0, 2.0];
        let all: Vec<usize> = (0..5).collect();
        let mb = minibatch_gradient(&p, &x, &all).unwrap();
        assert_eq!(mb.value, full_gradient(&p, &x).unwrap());
        assert_eq!(mb.kind, EstimateKind::Minibatch);
        let single = minibatch_gradient(&p, &x, &[3]).unwrap();
        assert_eq!(single.value, p.component_gradient(3, &x));
    }

    #[test]
    fn invalid_batch_index_is_input_error() {
        let p = small_ls(4);
        assert!(matches!(
            minibatch_gradient(&p, &[0.0; 3], &[4]),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            minibatch_gradient(&p, &[0.0; 3], &[]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn variance_reduced_at_anchor_is_anchor_gradient() {
        let p = small_ls(6);
        let st = IterateState::at_anchor(&p, vec![0.1, 0.2, 0.3], 0, Exec::Sequential).unwrap();
        let est = variance_reduced_gradient(&p, &st, &[1, 4]).unwrap();
        assert_eq!(est.value, st.anchor_gradient.value);
        assert_eq!(est.kind, EstimateKind::VarianceReduced);
    }

    #[test]
    fn variance_reduced_with_full_batch_is_true_gradient() {
        let p = small_ls(6);
        let mut st = IterateState::at_anchor(&p, vec![0.1, 0.2, 0.3], 0, Exec::Sequential).unwrap();
        st.x = vec![-1.0, 0.5, 2.0];
        let est = variance_reduced_gradient(&p, &st, &[5, 2, 0, 1, 4, 3]).unwrap();
        let g = full_gradient(&p, &st.x).unwrap();
        for (a, b) in est.value.iter().zip(&g) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn stale_anchor_gradient_is_a_contract_violation() {
        let p = small_ls(6);
        let mut st = IterateState::at_anchor(&p, vec![0.1, 0.2, 0.3], 0, Exec::Sequential).unwrap();
        st.anchor = vec![1.0, 1.0, 1.0];
        assert!(matches!(
            variance_reduced_gradient(&p, &st, &[0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn variance_is_zero_at_anchor_or_full_batch() {
        let p = small_ls(6);
        let x0 = [0.1, 0.2, 0.3];
        let xs = [1.0, -0.2, 0.0];
        let src = RandomSource::new(5);
        let v = estimator_variance(
            &p,
            &x0,
            &x0,
            2,
            SamplingMode::WithoutReplacement,
            50,
            src,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(v.mean, 0.0);
        let v = estimator_variance(
            &p,
            &xs,
            &x0,
            6,
            SamplingMode::WithoutReplacement,
            50,
            src,
            Exec::Sequential,
        )
        .unwrap();
        assert!(v.mean < 1e-28);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(6, 2), Some(15));
        assert_eq!(binomial(5, 0), Some(1));
        assert_eq!(binomial(3, 4), Some(0));
        assert_eq!(binomial(50, 25), Some(126_410_606_437_752));
    }
}
