use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trsvr::estimators::{self, SamplingMode};
use trsvr::problems::{
    make_least_squares, make_logistic, synth_data, Dataset, LinearModelProblem, SynthKind,
};
use trsvr::{full_gradient, Exec, FiniteSum, IterateState, RandomSource};

fn small_ls(n: usize) -> LinearModelProblem {
    make_least_squares(
        synth_data(3, n, 4, SynthKind::GaussianLs, 0.3).unwrap(),
        0.0,
    )
    .unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

/// All size-`b` subsets of `0..n`, written out directly.
fn subsets(n: usize, b: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, b: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == b {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, b, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, b, &mut Vec::new(), &mut out);
    out
}

/// `ḡ` assembled from component gradients without the library estimator.
fn control_variate(
    p: &dyn FiniteSum,
    xs: &[f64],
    x0: &[f64],
    g0: &[f64],
    batch: &[usize],
) -> Vec<f64> {
    let mut out = g0.to_vec();
    for &i in batch {
        let a = p.component_gradient(i, xs);
        let c = p.component_gradient(i, x0);
        for j in 0..out.len() {
            out[j] += (a[j] - c[j]) / batch.len() as f64;
        }
    }
    out
}

#[test]
fn subset_counts_match_binomials() {
    assert_eq!(subsets(4, 2).len(), 6);
    assert_eq!(subsets(5, 2).len(), 10);
    assert_eq!(estimators::binomial(4, 2), Some(6));
    assert_eq!(estimators::binomial(5, 2), Some(10));
}

#[test]
fn enumeration_average_is_the_true_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [4, 5, 6] {
        let p = small_ls(n);
        for b in 1..=3 {
            for _ in 0..5 {
                let xs = random_point(&mut rng, 4);
                let x0 = random_point(&mut rng, 4);
                let g0 = full_gradient(&p, &x0).unwrap();
                let g = full_gradient(&p, &xs).unwrap();
                let all = subsets(n, b);
                let mut mean = vec![0.0; 4];
                for batch in &all {
                    let v = control_variate(&p, &xs, &x0, &g0, batch);
                    for j in 0..4 {
                        mean[j] += v[j] / all.len() as f64;
                    }
                }
                for j in 0..4 {
                    assert!((mean[j] - g[j]).abs() <= 1e-12, "n={n} b={b}");
                }
                let lib =
                    estimators::exact_estimator_moments(&p, &xs, &x0, b, 1_000, Exec::Sequential)
                        .unwrap();
                for j in 0..4 {
                    assert!((lib.mean[j] - mean[j]).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn library_estimator_matches_control_variate() {
    let p = small_ls(6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x0 = random_point(&mut rng, 4);
    let xs = random_point(&mut rng, 4);
    let mut state = IterateState::at_anchor(&p, x0.clone(), 0, Exec::Sequential).unwrap();
    state.x = xs.clone();
    let g0 = full_gradient(&p, &x0).unwrap();
    for batch in subsets(6, 2) {
        let est = estimators::variance_reduced_gradient(&p, &state, &batch).unwrap();
        let oracle = control_variate(&p, &xs, &x0, &g0, &batch);
        for j in 0..4 {
            assert!((est.value[j] - oracle[j]).abs() <= 1e-12);
        }
    }
}

#[test]
fn monte_carlo_variance_agrees_with_enumeration() {
    let p = small_ls(6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for t in 0..3 {
        let xs = random_point(&mut rng, 4);
        let x0 = random_point(&mut rng, 4);
        let exact =
            estimators::exact_estimator_moments(&p, &xs, &x0, 2, 1_000, Exec::Parallel).unwrap();
        let mc = estimators::estimator_variance(
            &p,
            &xs,
            &x0,
            2,
            SamplingMode::WithoutReplacement,
            4_000,
            RandomSource::new(100 + t),
            Exec::Parallel,
        )
        .unwrap();
        assert!(
            (mc.mean - exact.variance).abs() <= 4.0 * mc.std_error,
            "{mc:?} vs {}",
            exact.variance
        );
    }
}

#[test]
fn variance_bound_holds_under_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ls = small_ls(8);
    let lg = make_logistic(
        synth_data(4, 8, 4, SynthKind::SeparableLogistic, 0.1).unwrap(),
        0.01,
    )
    .unwrap();
    for p in [&ls, &lg] {
        let l = p.closed_form_constants().unwrap().lipschitz_component;
        for b in [1, 2, 3] {
            for _ in 0..10 {
                let xs = random_point(&mut rng, 4);
                let x0 = random_point(&mut rng, 4);
                let m =
                    estimators::exact_estimator_moments(p, &xs, &x0, b, 1_000, Exec::Sequential)
                        .unwrap();
                let rhs = l * l / b as f64 * trsvr::linalg::dist_sq(&xs, &x0);
                assert!(
                    m.variance <= rhs,
                    "{} b={b}: {} > {rhs}",
                    p.name(),
                    m.variance
                );
            }
        }
    }
}

#[test]
fn full_batch_estimate_is_exact() {
    let p = make_least_squares(
        Dataset::from_dense(
            vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 3.0]],
            vec![1.0, 0.0, 2.0],
        )
        .unwrap(),
        0.1,
    )
    .unwrap();
    let m =
        estimators::exact_estimator_moments(&p, &[0.3, -0.2], &[1.0, 1.0], 3, 10, Exec::Sequential)
            .unwrap();
    assert_eq!(m.batches, 1);
    assert!(m.variance <= 1e-24);
}
