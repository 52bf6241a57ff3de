//! Reducibility of the determinantal martingale for N = 2, N' = 1, with independent
//! Brownian motions: both sides estimated by Monte Carlo.

use dpplab::dsp::{self, InitialConfig, MartingaleFns, Process};
use dpplab::rng;

fn f(x: f64) -> f64 {
    (-(x - 0.3) * (x - 0.3)).exp()
}

#[test]
fn two_to_one() {
    let u = [-0.4, 0.6];
    let xi = InitialConfig::simple(Process::Bm, u.to_vec()).unwrap();
    let m = MartingaleFns::new(&xi).unwrap();
    let (t, big_t) = (0.4, 0.9);
    let reps = 200_000;

    let lhs: Vec<f64> = rng::replicas(21, reps, |r, _| {
        let yt: Vec<f64> = u.iter().map(|&x| dsp::step_bm(x, t, r)).collect();
        let y_big: Vec<f64> = yt.iter().map(|&x| dsp::step_bm(x, big_t - t, r)).collect();
        let d = dsp::det_martingale_with(&m, big_t, &y_big).unwrap();
        (f(yt[0]) + f(yt[1])) * d
    });
    let rhs: Vec<f64> = rng::replicas(22, reps, |r, _| {
        (0..2)
            .map(|k| {
                let yt = dsp::step_bm(u[k], t, r);
                let yb = dsp::step_bm(yt, big_t - t, r);
                f(yt) * m.eval(k, big_t, yb)
            })
            .sum()
    });
    let (a, sa) = rng::mean_se(&lhs);
    let (b, sb) = rng::mean_se(&rhs);
    let z = (a - b).abs() / (sa * sa + sb * sb).sqrt();
    assert!(z < 3.0, "lhs {a} +- {sa}, rhs {b} +- {sb}");
}

#[test]
fn one_point_function_of_dsp_matches_reduced_side() {
    // the reduced expectation equals ∫ f(y) K(t, y; t, y) dy for the spatio-temporal kernel
    let u = [-0.4, 0.6];
    let xi = InitialConfig::simple(Process::Bm, u.to_vec()).unwrap();
    let m = MartingaleFns::new(&xi).unwrap();
    let t = 0.4;
    let rule = dpplab::specfun::composite_legendre(20, -8.0, 8.0, 16);
    let k = dsp::SpatioTemporalKernel::new(&xi).unwrap();
    let exact: f64 = rule.nodes.iter().zip(&rule.weights).map(|(&y, &w)| w * f(y) * k.eval(t, y, t, y).unwrap()).sum();
    let reps = 200_000;
    let rhs: Vec<f64> = rng::replicas(23, reps, |r, _| {
        (0..2)
            .map(|j| {
                let yt = dsp::step_bm(u[j], t, r);
                f(yt) * m.eval(j, t, yt)
            })
            .sum()
    });
    let (b, sb) = rng::mean_se(&rhs);
    assert!((b - exact).abs() < 3.0 * sb, "{b} +- {sb} vs {exact}");
}
