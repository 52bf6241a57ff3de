//! Dirichlet Green's functions of H and O, bump test functions and their Dirichlet energies,
//! Gaussian pairing samplers, and the stationarity check for the SLE/log-gas coupled field.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Rng};
use crate::sle::{self, LoewnerState, Region, SleError, SleGas};
use crate::specfun;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GffError {
    #[error("coincident points {0}")]
    Coincident(C64),
    #[error("point {0} is not in the interior of {1:?}")]
    Domain(C64, Region),
    #[error("invalid test function: {0}")]
    TestFn(String),
    #[error("support swallowed at node {0}")]
    Swallowed(C64),
    #[error("covariance is not positive semidefinite (eigenvalue {0})")]
    Factorization(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("too many excluded replicas: {0} of {1}")]
    Exclusions(usize, usize),
    #[error(transparent)]
    Sle(#[from] SleError),
}

pub(crate) fn green_unchecked(region: Region, z: C64, w: C64) -> f64 {
    green_regular(region, z, w) - (z - w).norm().ln()
}

/// `G_D(z, w) + log|z − w|`
fn green_regular(region: Region, z: C64, w: C64) -> f64 {
    let h = (z - w.conj()).norm().ln();
    match region {
        Region::H => h,
        Region::O => h + (z + w.conj()).norm().ln() - (z + w).norm().ln(),
    }
}

/// Dirichlet Green's function `G_D(z, w)` for D = H or O.
pub fn green(region: Region, z: C64, w: C64) -> Result<f64, GffError> {
    for p in [z, w] {
        if !region.contains(p) {
            return Err(GffError::Domain(p, region));
        }
    }
    if z == w {
        return Err(GffError::Coincident(z));
    }
    Ok(green_unchecked(region, z, w))
}

/// Radial bump `exp(1 − 1/(1 − |z − c|²/ρ²))` on the disk of radius ρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFn {
    pub center: C64,
    pub radius: f64,
    pub region: Region,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub points: Vec<C64>,
    /// `f(z) dA` at each point.
    pub weights: Vec<f64>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl TestFn {
    pub fn new(region: Region, center: C64, radius: f64) -> Result<Self, GffError> {
        if !(radius > 0.0) || !center.re.is_finite() || !center.im.is_finite() {
            return Err(GffError::TestFn("radius must be positive and center finite".into()));
        }
        let margin = match region {
            Region::H => center.im,
            Region::O => center.im.min(center.re),
        } - radius;
        if !(margin > 0.5 * radius) {
            return Err(GffError::TestFn(format!("support must stay {} away from the boundary", 0.5 * radius)));
        }
        Ok(TestFn { center, radius, region, scale: 1.0 })
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self
    }

    pub fn eval(&self, z: C64) -> f64 {
        let s2 = (z - self.center).norm_sqr() / (self.radius * self.radius);
        if s2 >= 1.0 { 0.0 } else { self.scale * (1.0 - 1.0 / (1.0 - s2)).exp() }
    }

    /// Polar Gauss–Legendre nodes on the support disk.
    pub fn nodes(&self, n_r: usize, n_theta: usize) -> NodeSet {
        let rs = specfun::gauss_legendre(n_r).on_interval(0.0, 1.0);
        let ts = specfun::gauss_legendre(n_theta).on_interval(0.0, 2.0 * PI);
        let mut points = Vec::with_capacity(n_r * n_theta);
        let mut weights = Vec::with_capacity(n_r * n_theta);
        for (&s, &ws) in rs.nodes.iter().zip(&rs.weights) {
            for (&th, &wt) in ts.nodes.iter().zip(&ts.weights) {
                let z = self.center + C64::from_polar(self.radius * s, th);
                points.push(z);
                weights.push(self.eval(z) * self.radius * self.radius * s * ws * wt);
            }
        }
        NodeSet { points, weights }
    }

    pub fn integral(&self) -> f64 {
        self.nodes(48, 4).weights.iter().sum()
    }
}

const QUAD: usize = 32;

/// Ray from z (inside the disk) to the circle |w − c| = ρ in direction θ.
fn ray_exit(z: C64, c: C64, rho: f64, theta: f64) -> f64 {
    let d = z - c;
    let e = C64::from_polar(1.0, theta);
    let b = (d * e.conj()).re;
    -b + (b * b - (d.norm_sqr() - rho * rho)).max(0.0).sqrt()
}

/// `∫ g(w) G_D(z, w) dA(w)` with the logarithmic singularity integrated in polar coordinates around z.
fn potential(region: Region, g: &TestFn, gnodes: &NodeSet, z: C64) -> f64 {
    // smooth part: G + log|z − w|
    let mut v = 0.0;
    for (&w, &wt) in gnodes.points.iter().zip(&gnodes.weights) {
        v += wt * green_regular(region, z, w);
    }
    if (z - g.center).norm() < g.radius {
        let us = specfun::gauss_legendre(QUAD).on_interval(0.0, 1.0);
        let ts = specfun::gauss_legendre(QUAD).on_interval(0.0, 2.0 * PI);
        for (&th, &wt) in ts.nodes.iter().zip(&ts.weights) {
            let r = ray_exit(z, g.center, g.radius, th);
            let e = C64::from_polar(1.0, th);
            for (&u, &wu) in us.nodes.iter().zip(&us.weights) {
                // s = R u², ds = 2 R u du
                let s = r * u * u;
                v += wt * wu * g.eval(z + s * e) * (-s.ln()) * s * 2.0 * r * u;
            }
        }
    } else {
        for (&w, &wt) in gnodes.points.iter().zip(&gnodes.weights) {
            v -= wt * (z - w).norm().ln();
        }
    }
    v
}

/// `∫∫ f(z) G_D(z, w) g(w) dA dA` on the undeformed domain.
pub fn dirichlet_energy(f: &TestFn, g: &TestFn) -> Result<f64, GffError> {
    if f.region != g.region {
        return Err(GffError::Parameter("test functions live on different domains".into()));
    }
    let fnodes = f.nodes(QUAD, QUAD);
    let gnodes = g.nodes(QUAD, QUAD);
    let mut e = 0.0;
    for (&z, &wz) in fnodes.points.iter().zip(&fnodes.weights) {
        if wz != 0.0 {
            e += wz * potential(f.region, g, &gnodes, z);
        }
    }
    Ok(e)
}

/// Values of a conformal map at nodes: `(φ(z), log φ′(z))`, None when swallowed.
pub type MapValues = [Option<(C64, C64)>];

/// `∫∫ f(z) [G_D(φz, φw) − G_D(z, w)] g(w)`, a smooth integrand whose diagonal is `−Re log φ′(z)`.
pub fn energy_correction(region: Region, a: &NodeSet, ma: &MapValues, b: &NodeSet, mb: &MapValues) -> Result<f64, GffError> {
    let get = |m: &MapValues, k: usize, z: C64| m[k].ok_or(GffError::Swallowed(z));
    let mut s = 0.0;
    for (i, (&z, &wz)) in a.points.iter().zip(&a.weights).enumerate() {
        if wz == 0.0 {
            continue;
        }
        let (pz, lz) = get(ma, i, z)?;
        for (j, (&w, &ww)) in b.points.iter().zip(&b.weights).enumerate() {
            if ww == 0.0 {
                continue;
            }
            let (pw, _) = get(mb, j, w)?;
            let mut v = (pz - pw.conj()).norm().ln() - (z - w.conj()).norm().ln();
            if region == Region::O {
                v += (pz + pw.conj()).norm().ln() - (pz + pw).norm().ln() - (z + w.conj()).norm().ln() + (z + w).norm().ln();
            }
            v -= if z == w { lz.re } else { ((pz - pw) / (z - w)).norm().ln() };
            s += wz * ww * v;
        }
    }
    Ok(s)
}

/// Energy under a map given as a closure returning `(φ(z), log φ′(z))`.
pub fn dirichlet_energy_mapped(f: &TestFn, g: &TestFn, map: &dyn Fn(C64) -> Option<(C64, C64)>) -> Result<f64, GffError> {
    let e0 = dirichlet_energy(f, g)?;
    let a = f.nodes(QUAD, QUAD);
    let b = g.nodes(QUAD, QUAD);
    let ma: Vec<_> = a.points.iter().map(|&z| map(z)).collect();
    let mb: Vec<_> = b.points.iter().map(|&z| map(z)).collect();
    Ok(e0 + energy_correction(f.region, &a, &ma, &b, &mb)?)
}

/// Centred Gaussian vector with covariance `C_ab = E(f_a, f_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPairingModel {
    pub tests: Vec<TestFn>,
    pub covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GaussianPairingModel {
    pub fn new(tests: Vec<TestFn>) -> Result<Self, GffError> {
        let m = tests.len();
        let mut c = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let e = dirichlet_energy(&tests[a], &tests[b])?;
                c[(a, b)] = e;
                c[(b, a)] = e;
            }
        }
        Self::from_covariance(tests, c)
    }

    pub fn from_covariance(tests: Vec<TestFn>, c: DMatrix<f64>) -> Result<Self, GffError> {
        let eig = SymmetricEigen::new(c.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(GffError::Factorization(min));
        }
        let sq = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&sq);
        Ok(GaussianPairingModel { tests, covariance: c, factor })
    }

    pub fn sample_with(&self, r: &mut Rng) -> Vec<f64> {
        let m = self.covariance.nrows();
        let z = nalgebra::DVector::from_fn(m, |_, _| rng::normal(r));
        (&self.factor * z).iter().copied().collect()
    }
}

pub fn sample_pairings(model: &GaussianPairingModel, seed: u64) -> Vec<f64> {
    model.sample_with(&mut rng::stream(seed, 0))
}

/// `⟨(2/√κ) Im M_D(·, t), f⟩` where the state tracks exactly the nodes of f.
pub fn im_m_pairing(state: &LoewnerState, kappa: f64, nodes: &NodeSet) -> Result<f64, GffError> {
    if state.points.len() != nodes.len() {
        return Err(GffError::Parameter("state must track the test-function nodes".into()));
    }
    let mut s = 0.0;
    for (p, &w) in state.points.iter().zip(&nodes.weights) {
        if w == 0.0 {
            continue;
        }
        let m = sle::martingale_observable(state, p, kappa).map_err(|_| GffError::Swallowed(p.z))?;
        s += w * m.im;
    }
    Ok(2.0 / kappa.sqrt() * s)
}

/// `χ = 2/√κ − √κ/2`
pub fn chi(kappa: f64) -> f64 {
    2.0 / kappa.sqrt() - kappa.sqrt() / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityRow {
    pub t: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub initial: f64,
    pub variance: f64,
    pub energy0: f64,
    pub energy_t: f64,
    /// |mean − initial| / se
    pub mean_z: f64,
    /// |Var + E_t − E_0| / E_0
    pub variance_rel: f64,
    pub monotone: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub rows: Vec<StationarityRow>,
    pub replicas: usize,
    pub excluded: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityOptions {
    pub grid_dt: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl Default for StationarityOptions {
    fn default() -> Self {
        StationarityOptions { grid_dt: 0.0025, n_r: 12, n_theta: 12 }
    }
}

/// Monte Carlo check that the coupled field keeps mean and variance of `⟨H_D(·, t), f⟩`.
pub fn stationarity_check(gas: &SleGas, f: &TestFn, t_list: &[f64], replicas: usize, seed: u64, opts: StationarityOptions) -> Result<StationarityReport, GffError> {
    if f.region != gas.region {
        return Err(GffError::Parameter("test function and gas live on different domains".into()));
    }
    if t_list.is_empty() || t_list.iter().any(|&t| !(t >= 0.0)) || replicas < 2 {
        return Err(GffError::Parameter("need nonnegative times and at least 2 replicas".into()));
    }
    let t_end = t_list.iter().cloned().fold(0.0, f64::max);
    let steps = ((t_end / opts.grid_dt).round() as usize).max(1);
    let h = t_end.max(opts.grid_dt) / steps as f64;
    let idx: Vec<usize> = t_list
        .iter()
        .map(|&t| {
            let k = (t / h).round();
            if (k * h - t).abs() > 1e-9 { Err(GffError::Parameter(format!("t = {t} is not on the grid of step {h}"))) } else { Ok(k as usize) }
        })
        .collect::<Result<_, _>>()?;
    let nodes = f.nodes(opts.n_r, opts.n_theta);
    let e0 = dirichlet_energy(f, f)?;
    let st0 = LoewnerState::new(gas.region, gas.delta(), &nodes.points, &gas.initial)?;
    let p0 = im_m_pairing(&st0, gas.kappa, &nodes)?;

    let runs: Vec<Result<Option<Vec<(f64, f64)>>, GffError>> = rng::replicas(seed, replicas, |r, _| {
        let path = gas.sample_path(steps as f64 * h, steps, 1e-3_f64.min(h), r)?;
        let mut k = 0;
        let mut rec: Vec<Option<(f64, f64)>> = vec![None; idx.len()];
        let mut err: Option<GffError> = None;
        gas.flow_with(&path, &nodes.points, |s| {
            for (slot, &want) in idx.iter().enumerate() {
                if want == k && err.is_none() {
                    let vals: Vec<Option<(C64, C64)>> = s.points.iter().map(|p| if p.swallowed.is_none() { Some((p.g, p.log_dg)) } else { None }).collect();
                    let res = im_m_pairing(s, gas.kappa, &nodes)
                        .and_then(|pm| energy_correction(gas.region, &nodes, &vals, &nodes, &vals).map(|c| (pm, e0 + c)));
                    match res {
                        Ok(v) => rec[slot] = Some(v),
                        Err(e) => err = Some(e),
                    }
                }
            }
            k += 1;
        })?;
        match err {
            Some(GffError::Swallowed(_)) => Ok(None),
            Some(e) => Err(e),
            None => Ok(Some(rec.into_iter().map(|v| v.expect("recorded")).collect())),
        }
    });
    let mut kept = Vec::new();
    let mut excluded = 0;
    for r in runs {
        match r? {
            Some(v) => kept.push(v),
            None => excluded += 1,
        }
    }
    if excluded * 100 > replicas {
        return Err(GffError::Exclusions(excluded, replicas));
    }
    let mut rows = Vec::new();
    for (slot, &t) in t_list.iter().enumerate() {
        let ps: Vec<f64> = kept.iter().map(|v| v[slot].0).collect();
        let es: Vec<f64> = kept.iter().map(|v| v[slot].1).collect();
        let (m, se) = rng::mean_se(&ps);
        let n = ps.len() as f64;
        let var = ps.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (n - 1.0);
        let et = es.iter().sum::<f64>() / n;
        let monotone = es.iter().all(|&e| e <= e0 * (1.0 + 1e-9) + 1e-12);
        let mean_z = if se > 0.0 { (m - p0).abs() / se } else if (m - p0).abs() < 1e-12 { 0.0 } else { f64::INFINITY };
        let variance_rel = (var + et - e0).abs() / e0;
        let pass = mean_z < 3.0 && variance_rel < 0.05 && monotone;
        rows.push(StationarityRow { t, mean: m, mean_se: se, initial: p0, variance: var, energy0: e0, energy_t: et, mean_z, variance_rel, monotone, pass });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(StationarityReport { rows, replicas: kept.len(), excluded, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn green_examples() {
        let i = C64::new(0.0, 1.0);
        assert!((green(Region::H, i, 2.0 * i).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!(green(Region::H, i, i).is_err());
        assert!(green(Region::O, C64::new(-1.0, 1.0), i).is_err());
        let mut r = rng::stream(1, 0);
        use rand::Rng as _;
        for _ in 0..100 {
            let z = C64::new(r.random_range(0.01..3.0), r.random_range(0.01..3.0));
            let w = C64::new(r.random_range(0.01..3.0), r.random_range(0.01..3.0));
            let a = green(Region::O, z, w).unwrap();
            assert!((a - green(Region::O, w, z).unwrap()).abs() < 1e-12);
            assert!((a - green(Region::H, z * z, w * w).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_far_supports_and_scaling() {
        let f = TestFn::new(Region::H, C64::new(0.0, 2.0), 0.1).unwrap();
        let g = TestFn::new(Region::H, C64::new(1.5, 1.0), 0.1).unwrap();
        let e = dirichlet_energy(&f, &g).unwrap();
        let want = green(Region::H, f.center, g.center).unwrap() * f.integral() * g.integral();
        assert!((e - want).abs() < 0.02 * want);
        let e2 = dirichlet_energy(&f.scaled(3.0), &g).unwrap();
        assert!((e2 - 3.0 * e).abs() < 1e-12 * e.abs());
        let ff = dirichlet_energy(&f.scaled(2.0), &f.scaled(2.0)).unwrap();
        assert!((ff - 4.0 * dirichlet_energy(&f, &f).unwrap()).abs() < 1e-12 * ff);
    }

    #[test]
    fn self_energy_converged() {
        // radial bump about the center: polar singular quadrature against a refined tensor rule
        let f = TestFn::new(Region::H, C64::new(0.0, 2.0), 0.3).unwrap();
        let e = dirichlet_energy(&f, &f).unwrap();
        // reference: log-potential of a radial density is radial; compare with an independent 1-D reduction
        // −∫∫ f f log|z − w| = −2π∫∫ f(r) f(s) log(max(r, s)) r s dr ds (2π)
        let rule = specfun::composite_legendre(40, 0.0, 0.3, 8);
        let prof = |r: f64| f.eval(f.center + r);
        let mut sing = 0.0;
        for (&r, &wr) in rule.nodes.iter().zip(&rule.weights) {
            for (&s, &ws) in rule.nodes.iter().zip(&rule.weights) {
                sing -= wr * ws * prof(r) * prof(s) * r * s * r.max(s).ln();
            }
        }
        sing *= 4.0 * PI * PI;
        let nodes = f.nodes(64, 64);
        let mut smooth = 0.0;
        for (&z, &wz) in nodes.points.iter().zip(&nodes.weights) {
            for (&w, &ww) in nodes.points.iter().zip(&nodes.weights) {
                smooth += wz * ww * (z - w.conj()).norm().ln();
            }
        }
        assert!((e - (sing + smooth)).abs() < 1e-6, "{e} {}", sing + smooth);
    }

    #[test]
    fn mapped_energy_identity_and_monotone() {
        let f = TestFn::new(Region::H, C64::new(0.5, 2.0), 0.3).unwrap();
        let e0 = dirichlet_energy(&f, &f).unwrap();
        let id = dirichlet_energy_mapped(&f, &f, &|z| Some((z, C64::new(0.0, 0.0)))).unwrap();
        assert!((id - e0).abs() < 1e-12);
        let mut last = e0;
        for t in [0.1, 0.3, 0.5] {
            let m = move |z: C64| {
                let mut g = (z * z + 4.0 * t).sqrt();
                if g.im < 0.0 {
                    g = -g;
                }
                Some((g, (z / g).ln()))
            };
            let e = dirichlet_energy_mapped(&f, &f, &m).unwrap();
            assert!(e <= last);
            last = e;
        }
    }

    #[test]
    fn pairing_sampler_covariance() {
        let f = TestFn::new(Region::H, C64::new(0.0, 2.0), 0.3).unwrap();
        let model = GaussianPairingModel::new(vec![f]).unwrap();
        let c = model.covariance[(0, 0)];
        let xs: Vec<f64> = rng::replicas(3, 100_000, |r, _| model.sample_with(r)[0]);
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var - c).abs() < 3.0 * c * (2.0 / xs.len() as f64).sqrt());
        let cf: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let (m, se) = rng::mean_se(&cf);
        assert!((m - (-c / 2.0).exp()).abs() < 3.0 * se);
        let zero = GaussianPairingModel::from_covariance(vec![f, f], DMatrix::from_row_slice(2, 2, &[c, 0.0, 0.0, 0.0])).unwrap();
        assert!(zero.sample_with(&mut rng::stream(1, 1))[1].abs() < 1e-300);
    }

    #[test]
    fn initial_pairing_is_harmonic_measure_term() {
        let kappa = 2.0;
        let f = TestFn::new(Region::H, C64::new(0.5, 1.0), 0.3).unwrap();
        let nodes = f.nodes(12, 12);
        let st = LoewnerState::new(Region::H, 0.0, &nodes.points, &[0.0]).unwrap();
        let p = im_m_pairing(&st, kappa, &nodes).unwrap();
        let want: f64 = nodes.points.iter().zip(&nodes.weights).map(|(z, w)| -2.0 / kappa.sqrt() * z.arg() * w).sum();
        assert!((p - want).abs() < 1e-14);
        assert!((chi(4.0)).abs() < 1e-15);
    }

    #[test]
    fn test_function_validation() {
        assert!(TestFn::new(Region::H, C64::new(0.0, 0.4), 0.3).is_err());
        assert!(TestFn::new(Region::O, C64::new(0.4, 2.0), 0.3).is_err());
        assert!(TestFn::new(Region::O, C64::new(1.0, 1.0), 0.3).is_ok());
    }
}
