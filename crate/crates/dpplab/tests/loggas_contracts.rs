//! Log-gas contracts at small replica counts.

use dpplab::loggas::{self, GasConfig, GasModel};
use dpplab::rng;

#[test]
fn one_particle_dyson_is_scaled_brownian_motion() {
    let kappa = 3.0;
    let cfg = GasConfig::new(GasModel::dyson_kappa(kappa), vec![0.2]).unwrap();
    let xs: Vec<f64> = loggas::terminal_ensemble(&cfg, 0.7, 1e-2, 20_000, 31).into_iter().map(|r| r.unwrap()[0]).collect();
    let n = xs.len() as f64;
    let (m, se) = rng::mean_se(&xs);
    assert!((m - 0.2).abs() < 3.0 * se);
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let want = kappa * 0.7;
    // Gaussian: se of the sample variance is want * sqrt(2 / n)
    assert!((v - want).abs() < 3.0 * want * (2.0 / n).sqrt(), "{v} vs {want}");
}

#[test]
fn bru_wishart_mean_trace() {
    let (nu, init) = (1.0, vec![0.4, 1.1]);
    let cfg = GasConfig::new(GasModel::bru_wishart(2.0, nu), init.clone()).unwrap();
    let sums: Vec<f64> = loggas::terminal_ensemble(&cfg, 0.5, 1e-2, 20_000, 32).into_iter().map(|r| r.unwrap().iter().sum()).collect();
    let (m, se) = rng::mean_se(&sums);
    let want = 1.5 + 2.0 * 2.0 * (nu + 2.0) * 0.5;
    assert!((m - want).abs() < 3.0 * se, "{m} +- {se} vs {want}");
}

#[test]
fn no_collisions_for_beta_at_least_one() {
    for (k, model) in [GasModel::dyson(1.0), GasModel::dyson(2.0), GasModel::bru_wishart(1.0, 0.0), GasModel::circular(0.5)].into_iter().enumerate() {
        let init = match model {
            GasModel::BruWishart { .. } => vec![0.02, 0.05, 0.09],
            _ => vec![0.0, 0.05, 0.1],
        };
        let cfg = GasConfig::new(model, init).unwrap();
        let bad: usize = rng::replicas(40 + k as u64, 1000, |r, _| match loggas::simulate_at(&cfg, &[0.5, 1.0], 1e-2, r) {
            Ok(tr) => usize::from(!(tr.min_gap > 0.0) || tr.states.iter().any(|s| s.windows(2).any(|w| w[1] <= w[0]))),
            Err(_) => 1,
        })
        .into_iter()
        .sum();
        assert_eq!(bad, 0, "{model:?}");
    }
}

#[test]
fn replicas_are_reproducible() {
    let cfg = GasConfig::new(GasModel::dyson(2.0), vec![-1.0, 0.0, 1.0]).unwrap();
    let a = loggas::simulate(&cfg, 0.5, 1e-2, 77).unwrap();
    let b = loggas::simulate(&cfg, 0.5, 1e-2, 77).unwrap();
    assert_eq!(a, b);
}
