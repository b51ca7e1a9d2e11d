//! Laws of simulated paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use mwls::grid::TimeGrid;
use mwls::model::{sample_cloud, BrownianModel, GbmModel, InitialLaw, MarkovModel};
use mwls::rng::{Domain, StreamFactory};

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `X_j` regenerated from the cloud states `X_i` with fresh noise, against
/// `X_j` sampled directly; both first coordinates.
fn markov_samples(model: &dyn MarkovModel, grid: &TimeGrid, i: usize, j: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let law = InitialLaw::Point(vec![1.0; model.dim()]);
    let streams = StreamFactory::new(9);
    let from_i = sample_cloud(model, grid, &law, i, m, &streams, Domain::Cloud).unwrap();
    let direct = sample_cloud(model, grid, &law, j, m, &streams, Domain::Evaluation).unwrap();
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let regenerated = (0..m)
        .map(|row| {
            let mut x = from_i.state(row, 0).to_vec();
            let mut next = vec![0.0; d];
            for k in i..j {
                let dw: Vec<f64> = (0..d)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        grid.step(k).sqrt() * g
                    })
                    .collect();
                model.transition(grid, k, &x, &dw, &mut next);
                std::mem::swap(&mut x, &mut next);
            }
            x[0]
        })
        .collect();
    let direct = (0..m).map(|row| direct.state(row, 0)[0]).collect();
    (regenerated, direct)
}

#[test]
fn regenerated_states_have_the_direct_law() {
    let grid = TimeGrid::theta(1.0, 8, 0.5).unwrap();
    let m = 20_000;
    // Critical value of the two-sample test at level 0.001.
    let critical = 1.95 * (2.0 / m as f64).sqrt();
    let brownian = BrownianModel::with_drift(vec![0.3, -0.2]).unwrap();
    let gbm = GbmModel::new(vec![0.05], vec![0.4]).unwrap();
    let models: [(&str, &dyn MarkovModel); 2] = [("brownian", &brownian), ("gbm", &gbm)];
    for (name, model) in models {
        let (a, b) = markov_samples(model, &grid, 2, 7, m);
        let d = ks_statistic(a, b);
        assert!(d < critical, "{name}: KS statistic {d} >= {critical}");
    }
}

#[test]
fn clouds_of_different_indices_use_disjoint_streams() {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let law = InitialLaw::Box {
        center: vec![0.0],
        half_width: 1.0,
    };
    let model = BrownianModel::new(1).unwrap();
    let streams = StreamFactory::new(5);
    let a = sample_cloud(&model, &grid, &law, 1, 500, &streams, Domain::Cloud).unwrap();
    let b = sample_cloud(&model, &grid, &law, 2, 500, &streams, Domain::Cloud).unwrap();
    let c = sample_cloud(&model, &grid, &law, 1, 500, &streams, Domain::Evaluation).unwrap();
    let starts = |s: &mwls::model::SimulationCloud| (0..500).map(|m| s.state(m, 0)[0]).collect::<Vec<_>>();
    let (sa, sb, sc) = (starts(&a), starts(&b), starts(&c));
    assert!(sa.iter().zip(&sb).all(|(x, y)| x != y));
    assert!(sa.iter().zip(&sc).all(|(x, y)| x != y));
    // The same request reproduces the cloud bit for bit.
    let again = sample_cloud(&model, &grid, &law, 1, 500, &streams, Domain::Cloud).unwrap();
    assert_eq!(starts(&again), sa);
}
