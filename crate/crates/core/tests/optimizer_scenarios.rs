use csaloha::cli::preset;
use csaloha::optimizer::{optimize_alpha_at_eps, sweep_eps, AlphaGrid, FloorSearch};
use csaloha::{evolve, AccessMatrix, Error, EvolveOptions, SlotClass, SystemConfig, UserClass};

fn single(e: f64) -> SystemConfig {
    SystemConfig::new(
        vec![UserClass::new(1.0, e)],
        vec![SlotClass::new(1.0)],
        AccessMatrix::zeros(1, 1),
        0.0,
    )
    .unwrap()
}

#[test]
fn fixed_eps_optima() {
    let opts = EvolveOptions::default();
    let s1 = optimize_alpha_at_eps(&single(0.0), 0.05, &AlphaGrid::default(), &opts).unwrap();
    assert!((s1.access.get(0, 0) - 3.1).abs() < 0.1);
    assert!((s1.throughput - 0.87).abs() < 0.02);

    let s3 = optimize_alpha_at_eps(&preset("scenario3").unwrap(), -0.3, &AlphaGrid::default(), &opts).unwrap();
    assert!((s3.access.get(0, 0) - 3.1).abs() < 0.1);
    assert_eq!(s3.access.get(1, 0), 0.0);
    assert!((s3.throughput - 0.65).abs() < 0.02);
}

#[test]
fn erasure_scaling_identity() {
    let opts = EvolveOptions::default();
    let grid = AlphaGrid::default();
    let t0 = sweep_eps(&single(0.0), -0.5, 1.5, 41, &grid, &opts).unwrap().best_throughput;
    for e in [0.1, 0.25, 0.375, 0.5] {
        let t = sweep_eps(&single(e), -0.5, 1.5, 41, &grid, &opts).unwrap().best_throughput;
        assert!((t / t0 - (1.0 - e)).abs() <= 0.03, "e = {e}: ratio {}", t / t0);
    }
}

#[test]
fn report_is_self_consistent() {
    let opts = EvolveOptions::default();
    let template = preset("scenario3").unwrap();
    let report = sweep_eps(&template, -0.7, 1.5, 45, &AlphaGrid::default(), &opts).unwrap();
    for sample in report.sweep_samples.iter().chain(std::iter::once(&report.sweep_samples[0])) {
        let c = template.with_access(sample.access.clone()).with_epsilon(sample.epsilon);
        let r = evolve(&c, &opts).unwrap();
        assert!((r.throughput - sample.throughput).abs() < 1e-9);
        assert!((r.aggregate_resolution - sample.resolution).abs() < 1e-9);
    }
    let best = template
        .with_access(report.best_alpha.clone())
        .with_epsilon(report.best_epsilon);
    let r = evolve(&best, &opts).unwrap();
    assert!((r.throughput - report.best_throughput).abs() < 1e-9);
    assert_eq!(r.resolution_probs, report.per_class_resolution);
}

#[test]
fn floor_search_scenario3() {
    let opts = EvolveOptions::default();
    let template = preset("scenario3").unwrap();
    let grid = AlphaGrid::default();
    let search = FloorSearch::new(&template, &[-0.3], &grid, &opts).unwrap();
    // vacuous floor: the coarse unconstrained optimum, which silences class 2
    let free = search.best_with_floor(0.0).unwrap();
    assert_eq!(free.access.get(1, 0), 0.0);
    let coarse = AlphaGrid { refinements: 0, ..grid };
    assert_eq!(free, optimize_alpha_at_eps(&template, -0.3, &coarse, &opts).unwrap());

    // raising the floor never raises the throughput
    let mut prev = f64::INFINITY;
    for k in 0..=20 {
        let target = k as f64 * 0.05;
        match search.best_with_floor(target) {
            Ok(o) => {
                assert!(o.resolution >= target);
                assert!(o.throughput <= prev);
                prev = o.throughput;
            }
            Err(Error::Infeasible { .. }) => prev = f64::NEG_INFINITY,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(matches!(search.best_with_floor(1.0), Err(Error::Infeasible { .. })));
    assert!(search.max_resolution() < 1.0);
}
