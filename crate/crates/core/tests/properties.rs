//! Randomized invariants of the building blocks.

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mwls::config::{RunConfig, B1_EXAMPLE};
use mwls::constants::{b_const, BoundsTable};
use mwls::grid::TimeGrid;
use mwls::harness::{benchmark, BenchmarkId, BenchmarkParams};
use mwls::model::{BrownianModel, InitialLaw};
use mwls::regression::{clamp, ols_fit, LocalPolynomialBasis};
use mwls::report::fmt_f64;
use mwls::solver::{
    evaluate_solution, mwls_solve, ConstantDriver, Driver, FnTerminal, LinearDriver, Problem, SolverConfig,
};

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn theta_grids_concentrate_near_horizon(n in 1usize..60, theta in 0.2f64..=1.0, horizon in 0.1f64..10.0) {
        let g = TimeGrid::theta(horizon, n, theta).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert!((g.t(n) - horizon).abs() <= 1e-12 * horizon);
        for i in 1..n {
            prop_assert!(g.step(i) <= g.step(i - 1) * (1.0 + 1e-9));
        }
        prop_assert!(g.r_pi() <= 1.0 + 1e-9);
    }

    #[test]
    fn random_grids_stay_admissible(seed in any::<u64>(), n in 1usize..50, r_max in 1.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TimeGrid::random_admissible(2.0, n, r_max, &mut rng).unwrap();
        prop_assert!(g.r_pi() <= r_max * (1.0 + 1e-9));
        prop_assert!(g.steps().iter().all(|s| *s > 0.0));
    }

    #[test]
    fn weighted_sums_are_monotone_in_the_window(seed in any::<u64>(), n in 2usize..30, alpha in 0.05f64..2.0, beta in 0.05f64..2.0) {
        // Widening the window towards the past only adds nonnegative terms,
        // and the bound constants grow with R_pi.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TimeGrid::random_admissible(1.0, n, 2.0, &mut rng).unwrap();
        for i in 1..n {
            let narrow = g.single_weighted_sum(i, n, alpha).unwrap();
            let wide = g.single_weighted_sum(i - 1, n, alpha).unwrap();
            prop_assert!(wide >= narrow && narrow >= 0.0);
        }
        prop_assert!(b_const(alpha, beta, 2.0).unwrap() >= b_const(alpha, beta, 1.0).unwrap());
    }

    #[test]
    fn clamp_is_a_bounded_contraction(a in -1e6f64..1e6, b in -1e6f64..1e6, level in 0.0f64..1e3) {
        let (ca, cb) = (clamp(a, level), clamp(b, level));
        prop_assert!(ca.abs() <= level && cb.abs() <= level);
        prop_assert!((ca - cb).abs() <= (a - b).abs());
        prop_assert_eq!(clamp(ca, level), ca);
    }

    #[test]
    fn floats_round_trip_through_reports(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn drivers_respect_their_constants(
        alpha in -3.0f64..3.0, c in -3.0f64..3.0,
        y1 in -10.0f64..10.0, y2 in -10.0f64..10.0, z1 in -10.0f64..10.0, z2 in -10.0f64..10.0,
    ) {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let x = [0.3];
        let lin = LinearDriver(alpha);
        let k = lin.constants();
        let gap = (lin.value(&g, 1, &x, y1, &[z1]) - lin.value(&g, 1, &x, y2, &[z2])).abs();
        prop_assert!(gap <= k.l_f * ((y1 - y2).abs() + (z1 - z2).abs()) * (1.0 + 1e-12));
        let cst = ConstantDriver(c);
        prop_assert!(cst.value(&g, 2, &x, 0.0, &[0.0]).abs() <= cst.constants().c_f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn least_squares_is_stable_and_exact_on_its_span(
        seed in any::<u64>(), degree in 0u32..3, cells in 1usize..6, rows in 20usize..200,
        coeffs in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let basis = LocalPolynomialBasis::new(degree, 2.0 / cells as f64, 1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states: Vec<f64> = (0..rows).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let noisy: Vec<f64> = (0..rows).map(|_| rand::Rng::random_range(&mut rng, -5.0..5.0)).collect();
        let fit = ols_fit(&noisy, 1, &basis, &states).unwrap();
        // A projection never increases the empirical norm.
        let fitted: Vec<f64> = states.iter().map(|x| fit.value(&[*x])).collect();
        prop_assert!(rms(&fitted) <= rms(&noisy) * (1.0 + 1e-10));
        // A global polynomial of degree <= the basis degree is reproduced.
        let poly = |x: f64| (0..=degree as usize).map(|p| coeffs[p] * x.powi(p as i32)).sum::<f64>();
        let exact: Vec<f64> = states.iter().map(|x| poly(*x)).collect();
        let fit = ols_fit(&exact, 1, &basis, &states).unwrap();
        for (x, v) in states.iter().zip(&exact) {
            prop_assert!((fit.value(&[*x]) - v).abs() <= 1e-8);
        }
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), m in 100usize..100_000, delta in 0.05f64..3.0, width in 0.0f64..5.0) {
        let mut c = RunConfig::parse(B1_EXAMPLE).unwrap();
        c.run.seed = seed;
        c.samples.m = Some(m);
        c.basis.delta = Some(delta);
        c.samples.x0_half_width = width;
        prop_assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn estimators_stay_inside_the_truncation_envelopes(
        seed in any::<u64>(), alpha in -2.0f64..2.0, c in -1.0f64..1.0, probes in prop::collection::vec(-6.0f64..6.0, 20),
    ) {
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let drivers: [Arc<dyn Driver>; 2] = [Arc::new(LinearDriver(alpha)), Arc::new(ConstantDriver(c))];
        for driver in drivers {
            let problem = Problem {
                grid: grid.clone(),
                model: Arc::new(BrownianModel::new(1).unwrap()),
                driver,
                terminal: Arc::new(FnTerminal {
                    f: |x: &[f64]| x[0].sin(),
                    bound: 1.0,
                    smoothness: None,
                }),
            };
            let basis = LocalPolynomialBasis::new(1, 1.0, 3.0, 1).unwrap();
            let law = InitialLaw::Box { center: vec![0.0], half_width: 1.0 };
            let config = SolverConfig::uniform(5, basis.clone(), basis, 300, law, seed);
            let sol = mwls_solve(&problem, &config, None).unwrap();
            let bounds = BoundsTable::compute(&problem.constants().unwrap(), &grid, None).unwrap();
            for i in 0..5 {
                for x in &probes {
                    let (y, z) = evaluate_solution(&sol, i, &[*x]).unwrap();
                    prop_assert!(y.abs() <= bounds.c_y[i]);
                    prop_assert!(z.unwrap().iter().all(|v| v.abs() <= bounds.c_z[i]));
                }
            }
        }
    }
}

#[test]
fn benchmark_oracles_are_consistent_with_their_terminals() {
    let grid = TimeGrid::uniform(1.0, 10).unwrap();
    let p = BenchmarkParams::default();
    for id in BenchmarkId::ALL {
        let b = benchmark(id, grid.clone(), &p).unwrap();
        // One step before the horizon the solution is close to the terminal
        // value away from the kinks.
        let x = [0.7];
        let y = b.oracle.y(9, &x);
        let phi = b.problem.terminal.value(&x);
        assert!((y - phi).abs() < 0.2, "{id}: {y} vs {phi}");
    }
}
