//! Euler–Maruyama integrators for one-dimensional log-gases (Dyson, Bru–Wishart,
//! noncolliding Brownian motion on a circle) and their matrix-valued references.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Rng};

/// Start time used when the initial configuration is the multiple point N·δ.
pub const ENTRANCE_T0: f64 = 1e-4;
const DT_GAP: f64 = 0.01;
/// Adaptive steps never shrink below this fraction of `dt_max`.
const DT_FLOOR: f64 = 1e-6;
/// Near the hard wall of the squared-radial gas.
const WALL_FLOOR: f64 = 1e-3;
const MAX_RETRIES: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GasError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("collision at t = {time}: gap {gap:e}")]
    Collision { time: f64, gap: f64 },
    #[error("negative coordinate {value:e} at t = {time}")]
    Negative { time: f64, value: f64 },
    #[error("eigensolver failed")]
    Eigen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GasModel {
    /// `dX = sqrt(tau) dB + (tau beta / 2) sum 1/(X_i - X_j) dt`, i.e. `X_beta(tau t)`.
    Dyson { beta: f64, tau: f64 },
    /// Eigenvalue form: `dL = 2 sqrt(tau L) dB + tau beta [(1 + nu) + 2 L sum 1/(L_i - L_j)] dt`.
    BruWishart { beta: f64, nu: f64, tau: f64 },
    /// Unwrapped lifts on R of the noncolliding motion on the circle of radius r.
    CircularDyson { radius: f64, beta: f64 },
}

impl GasModel {
    pub fn dyson(beta: f64) -> Self {
        GasModel::Dyson { beta, tau: 1.0 }
    }

    /// The (8/κ)-Dyson model: unit time scale replaced by κ.
    pub fn dyson_kappa(kappa: f64) -> Self {
        GasModel::Dyson { beta: 8.0 / kappa, tau: kappa }
    }

    pub fn bru_wishart(beta: f64, nu: f64) -> Self {
        GasModel::BruWishart { beta, nu, tau: 1.0 }
    }

    /// The (8/κ, ν)-Bru–Wishart process; its singular values are the square roots of the state.
    pub fn bru_wishart_kappa(kappa: f64, nu: f64) -> Self {
        GasModel::BruWishart { beta: 8.0 / kappa, nu, tau: kappa }
    }

    pub fn circular(radius: f64) -> Self {
        GasModel::CircularDyson { radius, beta: 2.0 }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            GasModel::Dyson { beta, .. } | GasModel::BruWishart { beta, .. } | GasModel::CircularDyson { beta, .. } => beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasConfig {
    pub model: GasModel,
    /// Ordered initial positions; all-equal means the multiple-point entrance law.
    pub initial: Vec<f64>,
    /// Permit β < 1 (collisions are then possible and abort the replica).
    #[serde(default)]
    pub allow_small_beta: bool,
}

impl GasConfig {
    pub fn new(model: GasModel, initial: Vec<f64>) -> Result<Self, GasError> {
        let c = GasConfig { model, initial, allow_small_beta: false };
        c.validate()?;
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.initial.len()
    }

    pub fn is_multiple_point(&self) -> bool {
        self.initial.len() > 1 && self.initial.iter().all(|&x| x == self.initial[0])
    }

    pub fn validate(&self) -> Result<(), GasError> {
        let bad = |s: String| Err(GasError::Config(s));
        let n = self.initial.len();
        if n == 0 {
            return bad("need at least one particle".into());
        }
        if self.initial.iter().any(|x| !x.is_finite()) {
            return bad("initial positions must be finite".into());
        }
        let beta = self.model.beta();
        if !(beta > 0.0) {
            return bad(format!("beta must be positive, got {beta}"));
        }
        if beta < 1.0 {
            if !self.allow_small_beta {
                return bad(format!("beta = {beta} < 1 may collide; set allow_small_beta to override"));
            }
            log::warn!("beta = {beta} < 1: noncolliding property not guaranteed");
        }
        match self.model {
            GasModel::Dyson { tau, .. } if !(tau > 0.0) => return bad("time scale must be positive".into()),
            GasModel::BruWishart { nu, tau, .. } => {
                if !(nu > -1.0) || !(tau > 0.0) {
                    return bad(format!("need nu > -1 and tau > 0, got nu={nu}, tau={tau}"));
                }
                if self.initial.iter().any(|&x| x < 0.0) {
                    return bad("Bru–Wishart coordinates must be nonnegative".into());
                }
                if self.is_multiple_point() && self.initial[0] != 0.0 {
                    return bad("the multiple-point entrance law is only available at the origin".into());
                }
            }
            GasModel::CircularDyson { radius, .. } => {
                if !(radius > 0.0) {
                    return bad("radius must be positive".into());
                }
                if n > 1 && self.initial[n - 1] - self.initial[0] >= 2.0 * PI * radius {
                    return bad("initial lifts must fit in one period".into());
                }
                if self.is_multiple_point() {
                    return bad("circular model needs a simple initial configuration".into());
                }
            }
            _ => {}
        }
        if !self.is_multiple_point() && self.initial.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("initial positions must be strictly increasing (or all equal)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub min_gap: f64,
    pub min_dt: f64,
    pub steps: usize,
    pub reflections: usize,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// One Euler–Maruyama integrator; exposed so other modules can co-integrate with the gas.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub model: GasModel,
    pub x: Vec<f64>,
    pub t: f64,
    pub reflections: usize,
    drift: Vec<f64>,
}

impl Stepper {
    pub fn new(model: GasModel, x: Vec<f64>, t: f64) -> Self {
        let n = x.len();
        Stepper { model, x, t, reflections: 0, drift: vec![0.0; n] }
    }

    /// Smallest spacing (including the wrap-around gap on the circle).
    pub fn min_gap(&self) -> f64 {
        let mut g = self.x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if let GasModel::CircularDyson { radius, .. } = self.model {
            if self.x.len() > 1 {
                g = g.min(self.x[0] + 2.0 * PI * radius - self.x[self.x.len() - 1]);
            }
        }
        g
    }

    /// Largest admissible step at the current state.
    pub fn max_dt(&self) -> f64 {
        let n = self.x.len();
        match self.model {
            GasModel::Dyson { beta, tau } => {
                if n < 2 {
                    return f64::INFINITY;
                }
                let g = self.min_gap();
                DT_GAP * g * g / (tau * 1f64.max(0.5 * beta))
            }
            GasModel::CircularDyson { beta, .. } => {
                if n < 2 {
                    return f64::INFINITY;
                }
                let g = self.min_gap();
                DT_GAP * g * g / 1f64.max(0.5 * beta)
            }
            GasModel::BruWishart { beta, tau, .. } => {
                let scale = tau * 1f64.max(0.5 * beta);
                let mut dt = f64::INFINITY;
                for w in self.x.windows(2) {
                    let g = w[1] - w[0];
                    dt = dt.min(DT_GAP * g * g / (4.0 * scale * (w[0] + w[1])));
                }
                dt.min(0.25 * DT_GAP * self.x[0] / scale)
            }
        }
    }

    /// Step actually taken by the simulator: `max_dt` capped at `dt_max`, with floors
    /// so that near-collisions and visits to the wall cannot stall the run.
    pub fn admissible_dt(&self, dt_max: f64) -> f64 {
        let dt = match self.model {
            GasModel::BruWishart { beta, tau, .. } => {
                let scale = tau * 1f64.max(0.5 * beta);
                let mut dt = f64::INFINITY;
                for w in self.x.windows(2) {
                    let g = w[1] - w[0];
                    dt = dt.min(DT_GAP * g * g / (4.0 * scale * (w[0] + w[1])));
                }
                dt.max(DT_FLOOR * dt_max).min((0.25 * DT_GAP * self.x[0] / scale).max(WALL_FLOOR * dt_max))
            }
            _ => self.max_dt().max(DT_FLOOR * dt_max),
        };
        dt.min(dt_max)
    }

    fn compute_drift(&mut self) {
        let n = self.x.len();
        let x = &self.x;
        for i in 0..n {
            let mut s = 0.0;
            match self.model {
                GasModel::Dyson { beta, tau } => {
                    for j in 0..n {
                        if j != i {
                            s += 1.0 / (x[i] - x[j]);
                        }
                    }
                    s *= 0.5 * tau * beta;
                }
                GasModel::BruWishart { beta, nu, tau } => {
                    for j in 0..n {
                        if j != i {
                            s += 1.0 / (x[i] - x[j]);
                        }
                    }
                    s = tau * beta * ((1.0 + nu) + 2.0 * x[i] * s);
                }
                GasModel::CircularDyson { radius, beta } => {
                    for j in 0..n {
                        if j != i {
                            s += 1.0 / ((x[i] - x[j]) / (2.0 * radius)).tan();
                        }
                    }
                    s *= 0.5 * beta / (2.0 * radius);
                }
            }
            self.drift[i] = s;
        }
    }

    /// Advance by exactly `dt`, using the supplied standard normal increments.
    pub fn step_with(&mut self, dt: f64, z: &[f64]) -> Result<(), GasError> {
        self.compute_drift();
        let sq = dt.sqrt();
        for i in 0..self.x.len() {
            let sigma = match self.model {
                GasModel::Dyson { tau, .. } => tau.sqrt(),
                GasModel::BruWishart { tau, .. } => 2.0 * (tau * self.x[i].max(0.0)).sqrt(),
                GasModel::CircularDyson { .. } => 1.0,
            };
            self.x[i] += sigma * sq * z[i] + self.drift[i] * dt;
        }
        self.t += dt;
        if let GasModel::BruWishart { .. } = self.model {
            for v in self.x.iter_mut() {
                if *v < 0.0 {
                    *v = -*v;
                    self.reflections += 1;
                }
            }
        }
        // a pair that crossed within one step is reflected back, i.e. relabelled
        if self.x.windows(2).any(|w| w[1] < w[0]) {
            self.x.sort_by(f64::total_cmp);
            self.reflections += 1;
        }
        if let GasModel::CircularDyson { radius, .. } = self.model {
            let n = self.x.len();
            if n > 1 && self.x[n - 1] - self.x[0] >= 2.0 * PI * radius {
                self.x.rotate_right(1);
                self.x[0] -= 2.0 * PI * radius;
                self.reflections += 1;
            }
        }
        let g = if self.x.len() > 1 { self.min_gap() } else { f64::INFINITY };
        if self.x.iter().any(|v| !v.is_finite()) || !(g > 0.0) {
            return Err(GasError::Collision { time: self.t, gap: g });
        }
        Ok(())
    }

    pub fn step(&mut self, dt: f64, rng: &mut Rng) -> Result<(), GasError> {
        let z: Vec<f64> = (0..self.x.len()).map(|_| rng::normal(rng)).collect();
        self.step_with(dt, &z)
    }
}

fn chi(k: f64, r: &mut Rng) -> f64 {
    ChiSquared::new(k).expect("positive degrees of freedom").sample(r).sqrt()
}

/// β-Hermite tridiagonal model scaled to the Dyson law at time s from the origin.
fn hermite_beta_ensemble(n: usize, beta: f64, s: f64, r: &mut Rng) -> Vec<f64> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = rng::normal(r);
        if i + 1 < n {
            let c = chi(beta * (n - 1 - i) as f64, r) / 2f64.sqrt();
            m[(i, i + 1)] = c;
            m[(i + 1, i)] = c;
        }
    }
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().map(|x| x * s.sqrt()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// β-Laguerre bidiagonal model scaled to the Bru–Wishart law at time s from the origin.
fn laguerre_beta_ensemble(n: usize, beta: f64, nu: f64, s: f64, r: &mut Rng) -> Vec<f64> {
    let a2 = beta * (nu + n as f64);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        b[(i, i)] = chi(a2 - beta * i as f64, r);
        if i + 1 < n {
            b[(i + 1, i)] = chi(beta * (n - 1 - i) as f64, r);
        }
    }
    let w = &b * b.transpose();
    let mut v: Vec<f64> = SymmetricEigen::new(w).eigenvalues.iter().map(|x| (x * s).max(0.0)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Draw the state at time `s` of a process started from the multiple point.
pub fn entrance_state(model: GasModel, n: usize, origin: f64, s: f64, r: &mut Rng) -> Result<Vec<f64>, GasError> {
    match model {
        GasModel::Dyson { beta, tau } => Ok(hermite_beta_ensemble(n, beta, tau * s, r).into_iter().map(|x| x + origin).collect()),
        GasModel::BruWishart { beta, nu, tau } => Ok(laguerre_beta_ensemble(n, beta, nu, tau * s, r)),
        GasModel::CircularDyson { .. } => Err(GasError::Config("no entrance law on the circle".into())),
    }
}

/// Simulate, storing the state at each of `times` (increasing, ≥ 0).
pub fn simulate_at(config: &GasConfig, times: &[f64], dt_max: f64, r: &mut Rng) -> Result<Trajectory, GasError> {
    config.validate()?;
    if !(dt_max > 0.0) {
        return Err(GasError::Config("dt_max must be positive".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(GasError::Config("record times must be strictly increasing and nonnegative".into()));
    }
    let n = config.n();
    let mut out = Trajectory { times: Vec::new(), states: Vec::new(), min_gap: f64::INFINITY, min_dt: f64::INFINITY, steps: 0, reflections: 0 };
    let mut idx = 0;
    let mut st = if config.is_multiple_point() {
        while idx < times.len() && times[idx] <= ENTRANCE_T0 {
            out.times.push(times[idx]);
            let x = if times[idx] == 0.0 {
                config.initial.clone()
            } else {
                entrance_state(config.model, n, config.initial[0], times[idx], r)?
            };
            out.states.push(x);
            idx += 1;
        }
        Stepper::new(config.model, entrance_state(config.model, n, config.initial[0], ENTRANCE_T0, r)?, ENTRANCE_T0)
    } else {
        Stepper::new(config.model, config.initial.clone(), 0.0)
    };
    if n > 1 && !config.is_multiple_point() {
        out.min_gap = st.min_gap();
    }
    for &target in &times[idx..] {
        while st.t < target {
            let remaining = target - st.t;
            let mut dt = st.admissible_dt(dt_max);
            if dt >= remaining {
                dt = remaining;
            } else if remaining - dt < 1e-12 * target.max(1.0) {
                dt = remaining;
            }
            let (x0, t0, refl0) = (st.x.clone(), st.t, st.reflections);
            let mut tries = 0;
            while let Err(e) = st.step(dt, r) {
                tries += 1;
                if tries > MAX_RETRIES {
                    return Err(e);
                }
                st.x.clone_from(&x0);
                st.t = t0;
                st.reflections = refl0;
            }
            if dt >= remaining {
                st.t = target;
            }
            out.steps += 1;
            out.min_dt = out.min_dt.min(dt);
            if n > 1 {
                out.min_gap = out.min_gap.min(st.min_gap());
            }
        }
        out.times.push(target);
        out.states.push(st.x.clone());
    }
    out.reflections = st.reflections;
    Ok(out)
}

/// Simulate on `[0, T]`, recording 101 equally spaced times.
pub fn simulate(config: &GasConfig, t_end: f64, dt_max: f64, seed: u64) -> Result<Trajectory, GasError> {
    if !(t_end > 0.0) {
        return Err(GasError::Config("T must be positive".into()));
    }
    let times: Vec<f64> = (0..=100).map(|k| t_end * k as f64 / 100.0).collect();
    simulate_at(config, &times, dt_max, &mut rng::stream(seed, 0))
}

/// Terminal states of independent replicas, in replica order.
pub fn terminal_ensemble(config: &GasConfig, t_end: f64, dt_max: f64, replicas: usize, seed: u64) -> Vec<Result<Vec<f64>, GasError>> {
    rng::replicas(seed, replicas, |r, _| simulate_at(config, &[t_end], dt_max, r).map(|tr| tr.last().to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MatrixModel {
    HermitianBM,
    LaguerreProcess(usize),
}

/// Eigenvalues at time t of the Hermitian Brownian motion or of K(t)†K(t), started at 0.
pub fn matrix_reference_rng(model: MatrixModel, n: usize, t: f64, r: &mut Rng) -> Result<Vec<f64>, GasError> {
    if n == 0 || !(t > 0.0) {
        return Err(GasError::Config("need N >= 1 and t > 0".into()));
    }
    let s = t.sqrt();
    let m = match model {
        MatrixModel::HermitianBM => {
            let mut h = DMatrix::<C64>::zeros(n, n);
            for i in 0..n {
                h[(i, i)] = C64::new(s * rng::normal(r), 0.0);
                for j in i + 1..n {
                    let z = C64::new(rng::normal(r), rng::normal(r)) * (s / 2f64.sqrt());
                    h[(i, j)] = z;
                    h[(j, i)] = z.conj();
                }
            }
            h
        }
        MatrixModel::LaguerreProcess(nu) => {
            let k = DMatrix::<C64>::from_fn(n + nu, n, |_, _| C64::new(rng::normal(r), rng::normal(r)) * s);
            k.adjoint() * k
        }
    };
    let e = SymmetricEigen::try_new(m, 1e-15, 10_000).ok_or(GasError::Eigen)?;
    let mut v: Vec<f64> = e.eigenvalues.iter().copied().collect();
    if matches!(model, MatrixModel::LaguerreProcess(_)) {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

pub fn matrix_reference(model: MatrixModel, n: usize, t: f64, seed: u64) -> Result<Vec<f64>, GasError> {
    matrix_reference_rng(model, n, t, &mut rng::stream(seed, 0))
}

/// Wrapped positions in `[0, 2πr)` and winding numbers of the unwrapped lifts.
pub fn circular_positions(lifts: &[f64], radius: f64) -> (Vec<f64>, Vec<i64>) {
    let p = 2.0 * PI * radius;
    lifts
        .iter()
        .map(|&x| {
            let w = (x / p).floor();
            let mut y = x - w * p;
            if y >= p {
                y -= p;
            }
            (y, w as i64)
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(GasConfig::new(GasModel::dyson(2.0), vec![0.0, 1.0]).is_ok());
        assert!(GasConfig::new(GasModel::dyson(2.0), vec![1.0, 0.0]).is_err());
        assert!(GasConfig::new(GasModel::dyson(0.5), vec![0.0, 1.0]).is_err());
        assert!(GasConfig::new(GasModel::bru_wishart(2.0, -1.0), vec![0.0, 1.0]).is_err());
        assert!(GasConfig::new(GasModel::circular(1.0), vec![0.0, 7.0]).is_err());
        assert!(GasConfig::new(GasModel::circular(1.0), vec![0.0, 0.0]).is_err());
        let mut c = GasConfig::new(GasModel::dyson(2.0), vec![0.0, 1.0]).unwrap();
        c.model = GasModel::dyson(0.5);
        c.allow_small_beta = true;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn simulation_is_reproducible_and_ordered() {
        let c = GasConfig::new(GasModel::dyson_kappa(2.0), vec![-1.0, 0.0, 0.5]).unwrap();
        let a = simulate(&c, 1.0, 1e-3, 4).unwrap();
        let b = simulate(&c, 1.0, 1e-3, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.times.len(), 101);
        assert!((a.times[100] - 1.0).abs() < 1e-15);
        assert!(a.states.iter().all(|s| s.windows(2).all(|w| w[1] > w[0])));
        assert!(a.min_gap > 0.0);
    }

    #[test]
    fn bru_wishart_stays_positive() {
        for &nu in &[-0.5, 0.0, 1.5] {
            let c = GasConfig::new(GasModel::bru_wishart(2.0, nu), vec![0.1, 0.5, 2.0]).unwrap();
            let tr = simulate(&c, 1.0, 1e-3, 8).unwrap();
            assert!(tr.states.iter().flatten().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn entrance_from_origin() {
        let c = GasConfig::new(GasModel::dyson(2.0), vec![0.0; 3]).unwrap();
        let tr = simulate_at(&c, &[0.0, 0.5, 1.0], 1e-3, &mut rng::stream(1, 0)).unwrap();
        assert_eq!(tr.states[0], vec![0.0; 3]);
        assert!(tr.states[2].windows(2).all(|w| w[1] > w[0]));
        let c = GasConfig::new(GasModel::bru_wishart(2.0, 0.5), vec![0.0; 3]).unwrap();
        assert!(simulate_at(&c, &[1.0], 1e-3, &mut rng::stream(1, 0)).is_ok());
    }

    #[test]
    fn beta_laguerre_one_particle_is_gamma() {
        // N = 1: BESQ from 0 at time s is s * chi^2_{beta(nu+1)}, mean beta (nu + 1) s
        let xs: Vec<f64> = rng::replicas(3, 20_000, |r, _| laguerre_beta_ensemble(1, 2.0, 0.5, 0.7, r)[0]);
        let (m, se) = rng::mean_se(&xs);
        assert!((m - 2.0 * 1.5 * 0.7).abs() < 4.0 * se, "{m} {se}");
    }

    #[test]
    fn beta_hermite_matches_matrix_model_second_moment() {
        // E[sum x^2] = s (N + beta N (N - 1) / 2)
        let n = 4;
        let xs: Vec<f64> = rng::replicas(9, 20_000, |r, _| hermite_beta_ensemble(n, 2.0, 0.3, r).iter().map(|x| x * x).sum());
        let (m, se) = rng::mean_se(&xs);
        let want = 0.3 * (n as f64 + n as f64 * (n as f64 - 1.0));
        assert!((m - want).abs() < 4.0 * se, "{m} {want} {se}");
        let ys: Vec<f64> = rng::replicas(9, 20_000, |r, _| {
            matrix_reference_rng(MatrixModel::HermitianBM, n, 0.3, r).unwrap().iter().map(|x| x * x).sum()
        });
        let (m2, se2) = rng::mean_se(&ys);
        assert!((m2 - want).abs() < 4.0 * se2);
    }

    #[test]
    fn matrix_reference_single_particle() {
        let xs: Vec<f64> = rng::replicas(2, 20_000, |r, _| matrix_reference_rng(MatrixModel::HermitianBM, 1, 2.0, r).unwrap()[0]);
        let v = xs.iter().map(|x| x * x).collect::<Vec<_>>();
        let (m, se) = rng::mean_se(&v);
        assert!((m - 2.0).abs() < 4.0 * se);
        // trace of K†K: E = 2 t N (N + nu)
        let ys: Vec<f64> = rng::replicas(2, 20_000, |r, _| {
            matrix_reference_rng(MatrixModel::LaguerreProcess(1), 2, 0.5, r).unwrap().iter().sum()
        });
        let (m, se) = rng::mean_se(&ys);
        assert!((m - 2.0 * 0.5 * 2.0 * 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn wrapping() {
        let (w, k) = circular_positions(&[0.3, 2.0 * PI + 0.1, -0.2], 1.0);
        assert_eq!(w[0], 0.3);
        assert!((w[1] - 0.1).abs() < 1e-15);
        assert!((w[2] - (2.0 * PI - 0.2)).abs() < 1e-15);
        assert_eq!(k, vec![0, 1, -1]);
    }
}
