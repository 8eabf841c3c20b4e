use trsvr::drivers::{self, Optimizer, RunConfig};
use trsvr::problems::{make_logistic, synth_data, SynthKind};
use trsvr::trust_region::HessianMode;
use trsvr::Exec;

fn problem() -> trsvr::problems::LinearModelProblem {
    make_logistic(
        synth_data(31, 300, 7, SynthKind::SeparableLogistic, 0.1).unwrap(),
        0.01,
    )
    .unwrap()
}

fn bits(t: &drivers::Trace) -> Vec<u64> {
    t.records
        .iter()
        .flat_map(|r| {
            [
                r.f,
                r.grad_norm,
                r.vr_grad_norm,
                r.radius,
                r.step_norm,
                r.actual_dec,
            ]
        })
        .chain(t.final_x.iter().copied())
        .map(f64::to_bits)
        .collect()
}

#[test]
fn parallel_and_sequential_runs_are_bitwise_identical() {
    for hessian in [
        HessianMode::ExactHvp,
        HessianMode::Lbfgs { memory: 3 },
        HessianMode::Diagonal,
    ] {
        for optimizer in [
            Optimizer::TrSvr,
            Optimizer::Svrg,
            Optimizer::TrDeterministic,
        ] {
            let base = RunConfig {
                optimizer,
                hessian,
                batch_size: 130,
                inner_iters: 4,
                outer_iters: 3,
                seed: 9,
                ..RunConfig::default()
            };
            let seq = drivers::run(
                &problem().with_exec(Exec::Sequential),
                &RunConfig {
                    exec: Exec::Sequential,
                    ..base.clone()
                },
            )
            .unwrap();
            let par = drivers::run(
                &problem().with_exec(Exec::Parallel),
                &RunConfig {
                    exec: Exec::Parallel,
                    ..base
                },
            )
            .unwrap();
            assert_eq!(bits(&seq), bits(&par), "{optimizer:?} {hessian:?}");
        }
    }
}

#[test]
fn seed_sweep_matches_individual_runs() {
    let p = problem();
    let cfg = RunConfig {
        batch_size: 5,
        inner_iters: 5,
        outer_iters: 2,
        ..RunConfig::default()
    };
    let seeds = [3, 1, 4, 1, 5];
    let sweep = drivers::run_seeds(&p, &cfg, &seeds);
    for (seed, trace) in seeds.iter().zip(sweep) {
        let single = drivers::run(
            &p,
            &RunConfig {
                seed: *seed,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(bits(&trace.unwrap()), bits(&single));
    }
    let a = drivers::run(
        &p,
        &RunConfig {
            seed: 1,
            ..cfg.clone()
        },
    )
    .unwrap();
    let b = drivers::run(&p, &RunConfig { seed: 2, ..cfg }).unwrap();
    assert_ne!(bits(&a), bits(&b));
}
