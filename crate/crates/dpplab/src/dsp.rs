//! Martingale functions, determinantal martingales, spatio-temporal kernels and
//! the DMR Monte Carlo comparison for the three processes
//! (Dyson β = 2 / BM, Bru–Wishart β = 2 / BESQ(ν), noncolliding BM on a circle).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels;
use crate::loggas::{self, GasConfig, GasError, GasModel};
use crate::rng::{self, Rng};
use crate::specfun;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("{0} is not in the support of the initial configuration")]
    NotInSupport(f64),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("series did not converge: {0}")]
    Series(String),
    #[error(transparent)]
    Gas(#[from] GasError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Process {
    /// Process 1: noncolliding BM (Dyson β = 2), driven by BM on R.
    Bm,
    /// Process 2: noncolliding BESQ(ν) (Bru–Wishart β = 2).
    Besq(f64),
    /// Process 3: noncolliding BM on the circle of the given radius.
    Circle(f64),
}

impl Process {
    pub fn gas_model(&self) -> GasModel {
        match *self {
            Process::Bm => GasModel::dyson(2.0),
            Process::Besq(nu) => GasModel::bru_wishart(2.0, nu),
            Process::Circle(r) => GasModel::circular(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConfig {
    pub process: Process,
    pub points: Vec<f64>,
    /// `Some(N)`: all N points sit at the origin.
    pub multiple: Option<usize>,
}

impl InitialConfig {
    pub fn simple(process: Process, mut points: Vec<f64>) -> Result<Self, DspError> {
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if points.is_empty() || points.iter().any(|x| !x.is_finite()) {
            return Err(DspError::Parameter("need a nonempty finite configuration".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DspError::Parameter("points must be distinct".into()));
        }
        match process {
            Process::Besq(nu) => {
                if !(nu > -1.0) || points[0] < 0.0 {
                    return Err(DspError::Parameter("BESQ needs nu > -1 and nonnegative points".into()));
                }
            }
            Process::Circle(r) => {
                if !(r > 0.0) || points[0] < 0.0 || *points.last().unwrap() >= 2.0 * PI * r {
                    return Err(DspError::Parameter("circle points must lie in [0, 2 pi r)".into()));
                }
            }
            Process::Bm => {}
        }
        Ok(InitialConfig { process, points, multiple: None })
    }

    pub fn multiple_origin(process: Process, n: usize) -> Result<Self, DspError> {
        if n == 0 {
            return Err(DspError::Parameter("N must be >= 1".into()));
        }
        match process {
            Process::Circle(_) => Err(DspError::Unsupported("multiple point on the circle".into())),
            Process::Besq(nu) if !(nu > -1.0) => Err(DspError::Parameter("nu must exceed -1".into())),
            _ => Ok(InitialConfig { process, points: vec![0.0], multiple: Some(n) }),
        }
    }

    /// Equidistant configuration `w_j = 2πr(j − 1)/N` on the circle.
    pub fn equidistant(radius: f64, n: usize) -> Result<Self, DspError> {
        if n == 0 {
            return Err(DspError::Parameter("N must be >= 1".into()));
        }
        let pts = (0..n).map(|j| 2.0 * PI * radius * j as f64 / n as f64).collect();
        Self::simple(Process::Circle(radius), pts)
    }

    pub fn n(&self) -> usize {
        self.multiple.unwrap_or(self.points.len())
    }
}

// ---------------------------------------------------------------------------
// moments and transition densities

/// Heat polynomial `m_n(t, x) = (t/2)^{n/2} H_n(x / sqrt(2t))`, written as an explicit polynomial.
pub fn heat_moment(n: usize, t: f64, x: f64) -> Result<f64, DspError> {
    if !(t >= 0.0) {
        return Err(DspError::Parameter(format!("t must be >= 0, got {t}")));
    }
    Ok(heat_poly(n, t, x))
}

fn heat_poly(n: usize, t: f64, x: f64) -> f64 {
    // n! / (k! (n-2k)!) (-t/2)^k x^{n-2k}
    let mut s = 0.0;
    let mut c = 1.0; // n! / (k! (n - 2k)!)
    for k in 0..=n / 2 {
        if k > 0 {
            let m = (n - 2 * k) as f64;
            c *= (m + 1.0) * (m + 2.0) / k as f64;
        }
        s += c * (-0.5 * t).powi(k as i32) * x.powi((n - 2 * k) as i32);
    }
    s
}

/// `m_n^{(ν)}(t, x) = (−1)^n n! (2t)^n L_n^{(ν)}(x / 2t)`, written as an explicit polynomial.
pub fn laguerre_moment(n: usize, nu: f64, t: f64, x: f64) -> Result<f64, DspError> {
    if !(t >= 0.0) || !(nu > -1.0) {
        return Err(DspError::Parameter(format!("need t >= 0 and nu > -1, got t={t}, nu={nu}")));
    }
    Ok(laguerre_poly(n, nu, t, x))
}

fn laguerre_poly(n: usize, nu: f64, t: f64, x: f64) -> f64 {
    // (-1)^n n! sum_k (-1)^k C(n+nu, n-k) x^k (2t)^{n-k} / k!
    // coefficient a_k = n!/k! C(n+nu, n-k) = prod_{j=k+1}^{n} j (k + nu + ... ) handled recursively from k = n
    let mut s = 0.0;
    let mut a = 1.0; // a_n = 1
    for k in (0..=n).rev() {
        if k < n {
            // a_k / a_{k+1} = (k+1)(k+1+nu) / (n-k)
            a *= (k as f64 + 1.0) * (k as f64 + 1.0 + nu) / (n - k) as f64;
        }
        let sign = if (n + k) % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * a * x.powi(k as i32) * (2.0 * t).powi((n - k) as i32);
    }
    s
}

pub fn p_bm(t: f64, y: f64, x: f64) -> f64 {
    (-(y - x).powi(2) / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// BESQ(ν) transition density `p^{(ν)}(t, y | x)`.
pub fn p_besq(nu: f64, t: f64, y: f64, x: f64) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    if x <= 0.0 {
        if y == 0.0 {
            return if nu > 0.0 { 0.0 } else if nu == 0.0 { 1.0 / (2.0 * t) } else { f64::INFINITY };
        }
        return (nu * y.ln() - y / (2.0 * t) - (nu + 1.0) * (2.0 * t).ln() - specfun::ln_gamma(nu + 1.0)).exp();
    }
    if y == 0.0 {
        return if nu > 0.0 { 0.0 } else { p_besq(nu, t, 1e-300, x) };
    }
    let z = (x * y).sqrt() / t;
    let i = specfun::bessel_i_scaled(nu, z).unwrap_or(f64::NAN);
    // e^{-(x+y)/2t} I(z) = e^{-(sqrt x - sqrt y)^2 / 2t} I_scaled(z)
    (0.5 * nu * (y / x).ln() - (x.sqrt() - y.sqrt()).powi(2) / (2.0 * t)).exp() / (2.0 * t) * i
}

/// Circle transition density with the sign rule `(−1)^ℓ` for even N, by image sums.
pub fn p_circle(radius: f64, n: usize, t: f64, y: f64, x: f64) -> f64 {
    let p = 2.0 * PI * radius;
    let span = ((100.0 * t).sqrt() / p).ceil() as i64 + 2;
    let base = ((x - y) / p).round() as i64;
    let mut s = 0.0;
    for l in base - span..=base + span {
        let sign = if n % 2 == 0 && l.rem_euclid(2) == 1 { -1.0 } else { 1.0 };
        s += sign * p_bm(t, y + p * l as f64, x);
    }
    s
}

pub fn transition_density(process: Process, n: usize, t: f64, y: f64, x: f64) -> f64 {
    match process {
        Process::Bm => p_bm(t, y, x),
        Process::Besq(nu) => p_besq(nu, t, y, x),
        Process::Circle(r) => p_circle(r, n, t, y, x),
    }
}

// ---------------------------------------------------------------------------
// martingale functions

#[derive(Debug, Clone, PartialEq)]
enum Expansion {
    /// Monomial coefficients, ascending.
    Poly(Vec<f64>),
    /// Coefficients of `e^{i e z / (2r)}` for `e = -d..=d`.
    Exp { coeffs: Vec<C64>, radius: f64 },
}

/// The N martingale functions `M_ξ^{u_k}` of a simple initial configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleFns {
    pub config: InitialConfig,
    expansions: Vec<Expansion>,
}

fn poly_from_roots(roots: &[f64], scale: f64) -> Vec<f64> {
    let mut c = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (k, &a) in c.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= r * a;
        }
        c = next;
    }
    c.iter().map(|a| a / scale).collect()
}

impl MartingaleFns {
    pub fn new(config: &InitialConfig) -> Result<Self, DspError> {
        if config.multiple.is_some() {
            return Err(DspError::Unsupported("martingale functions of a multiple point; use multiple_point_martingale".into()));
        }
        let u = &config.points;
        let mut expansions = Vec::with_capacity(u.len());
        for (k, &v) in u.iter().enumerate() {
            let others: Vec<f64> = u.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, &x)| x).collect();
            let e = match config.process {
                Process::Bm | Process::Besq(_) => {
                    let denom: f64 = others.iter().map(|&o| v - o).product();
                    Expansion::Poly(poly_from_roots(&others, denom))
                }
                Process::Circle(r) => {
                    let d = others.len();
                    let mut c = vec![C64::new(0.0, 0.0); 2 * d + 1];
                    c[d] = C64::new(1.0, 0.0);
                    let mut denom = 1.0;
                    for &o in &others {
                        denom *= ((v - o) / (2.0 * r)).sin();
                        // sin((z - o)/2r) = (e^{-io/2r} w - e^{io/2r} w^{-1}) / 2i
                        let a = C64::from_polar(1.0, -o / (2.0 * r)) / C64::new(0.0, 2.0);
                        let b = -C64::from_polar(1.0, o / (2.0 * r)) / C64::new(0.0, 2.0);
                        let mut next = vec![C64::new(0.0, 0.0); 2 * d + 1];
                        for i in 0..=2 * d {
                            if c[i] == C64::new(0.0, 0.0) {
                                continue;
                            }
                            if i + 1 <= 2 * d {
                                next[i + 1] += c[i] * a;
                            }
                            if i >= 1 {
                                next[i - 1] += c[i] * b;
                            }
                        }
                        c = next;
                    }
                    Expansion::Exp { coeffs: c.into_iter().map(|z| z / denom).collect(), radius: r }
                }
            };
            expansions.push(e);
        }
        Ok(MartingaleFns { config: config.clone(), expansions })
    }

    pub fn len(&self) -> usize {
        self.expansions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expansions.is_empty()
    }

    /// `M_ξ^{u_k}(t, x)`; at t = 0 this is `Φ_ξ^{u_k}(x)`.
    pub fn eval(&self, k: usize, t: f64, x: f64) -> f64 {
        match &self.expansions[k] {
            Expansion::Poly(c) => match self.config.process {
                Process::Besq(nu) => c.iter().enumerate().map(|(n, a)| a * laguerre_poly(n, nu, t, x)).sum(),
                _ => c.iter().enumerate().map(|(n, a)| a * heat_poly(n, t, x)).sum(),
            },
            Expansion::Exp { coeffs, radius } => {
                let d = (coeffs.len() - 1) as i64 / 2;
                let mut s = C64::new(0.0, 0.0);
                for (i, c) in coeffs.iter().enumerate() {
                    if c.norm() == 0.0 {
                        continue;
                    }
                    let kappa = (i as i64 - d) as f64 / (2.0 * radius);
                    s += c * C64::from_polar((0.5 * kappa * kappa * t).exp(), kappa * x);
                }
                s.re
            }
        }
    }
}

/// `M_ξ^v(t, x)` for a support point v.
pub fn martingale_fn(xi: &InitialConfig, v: f64, t: f64, x: f64) -> Result<f64, DspError> {
    if !(t >= 0.0) {
        return Err(DspError::Parameter("t must be >= 0".into()));
    }
    let k = xi.points.iter().position(|&u| u == v).ok_or(DspError::NotInSupport(v))?;
    Ok(MartingaleFns::new(xi)?.eval(k, t, x))
}

/// `det_{j,k}[M_ξ^{u_k}(T, Y_j)]`.
pub fn det_martingale_with(m: &MartingaleFns, t: f64, y: &[f64]) -> Result<f64, DspError> {
    let n = m.len();
    if y.len() != n {
        return Err(DspError::Parameter(format!("need {n} positions, got {}", y.len())));
    }
    let a = DMatrix::from_fn(n, n, |j, k| m.eval(k, t, y[j]));
    let d = a.determinant();
    if !d.is_finite() {
        return Err(DspError::Parameter("singular determinantal martingale evaluation".into()));
    }
    Ok(d)
}

pub fn det_martingale(xi: &InitialConfig, t: f64, y: &[f64]) -> Result<f64, DspError> {
    det_martingale_with(&MartingaleFns::new(xi)?, t, y)
}

/// `M_{Nδ_0}^0((s, x) | (t, y))` for Processes 1 and 2.
pub fn multiple_point_martingale(process: Process, n: usize, s: f64, x: f64, t: f64, y: f64) -> Result<f64, DspError> {
    if !(s > 0.0) || !(t >= 0.0) {
        return Err(DspError::Parameter("need s > 0 and t >= 0".into()));
    }
    match process {
        Process::Bm => {
            let mut sum = 0.0;
            let mut fact = 1.0;
            for k in 0..n {
                if k > 0 {
                    fact *= k as f64 * s;
                }
                sum += heat_poly(k, s, x) * heat_poly(k, t, y) / fact;
            }
            Ok(sum)
        }
        Process::Besq(nu) => {
            let lg1 = specfun::ln_gamma(nu + 1.0);
            let mut sum = 0.0;
            for k in 0..n {
                let kf = k as f64;
                let c = (lg1 - specfun::ln_gamma(kf + 1.0) - specfun::ln_gamma(kf + nu + 1.0) - 2.0 * kf * (2.0 * s).ln()).exp();
                sum += c * laguerre_poly(k, nu, s, x) * laguerre_poly(k, nu, t, y);
            }
            Ok(sum)
        }
        Process::Circle(_) => Err(DspError::Unsupported("multiple point on the circle".into())),
    }
}

// ---------------------------------------------------------------------------
// spatio-temporal kernels

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Background {
    Lebesgue,
    /// `dx / (2πr)`
    UniformCircle(f64),
    /// `p_BM(t, x | 0) dx`
    HeatKernel,
    /// `p^{(ν)}(t, x | 0) dx`
    BesqKernel(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalKernel {
    pub config: InitialConfig,
    pub background: Background,
    fns: Option<MartingaleFns>,
    equidistant: bool,
}

impl SpatioTemporalKernel {
    pub fn new(config: &InitialConfig) -> Result<Self, DspError> {
        let n = config.n();
        let equidistant = match config.process {
            Process::Circle(r) if config.multiple.is_none() => config
                .points
                .iter()
                .enumerate()
                .all(|(j, &w)| (w - 2.0 * PI * r * j as f64 / n as f64).abs() < 1e-12),
            _ => false,
        };
        let background = match (config.multiple, config.process) {
            (Some(_), Process::Bm) => Background::HeatKernel,
            (Some(_), Process::Besq(nu)) => Background::BesqKernel(nu),
            (None, Process::Circle(r)) if equidistant => Background::UniformCircle(r),
            _ => Background::Lebesgue,
        };
        let fns = if config.multiple.is_none() { Some(MartingaleFns::new(config)?) } else { None };
        Ok(SpatioTemporalKernel { config: config.clone(), background, fns, equidistant })
    }

    pub fn background_density(&self, t: f64, x: f64) -> f64 {
        match self.background {
            Background::Lebesgue => 1.0,
            Background::UniformCircle(r) => 1.0 / (2.0 * PI * r),
            Background::HeatKernel => p_bm(t, x, 0.0),
            Background::BesqKernel(nu) => p_besq(nu, t, x, 0.0),
        }
    }

    pub fn eval(&self, s: f64, x: f64, t: f64, y: f64) -> Result<f64, DspError> {
        if !(s > 0.0) || !(t > 0.0) {
            return Err(DspError::Parameter("need s, t > 0".into()));
        }
        let n = self.config.n();
        if let Some(nn) = self.config.multiple {
            return match self.config.process {
                Process::Bm => extended_hermite(nn, s, x, t, y),
                Process::Besq(nu) => extended_laguerre(nn, nu, s, x, t, y),
                Process::Circle(_) => Err(DspError::Unsupported("multiple point on the circle".into())),
            };
        }
        if self.equidistant {
            if let Process::Circle(r) = self.config.process {
                return Ok(relaxation_kernel(n, r, s, x, t, y));
            }
        }
        let m = self.fns.as_ref().expect("simple configuration");
        let p = self.config.process;
        let mut v = 0.0;
        for (k, &u) in self.config.points.iter().enumerate() {
            v += transition_density(p, n, s, x, u) * m.eval(k, t, y);
        }
        if s > t {
            v -= transition_density(p, n, s - t, x, y);
        }
        Ok(v)
    }
}

/// Evaluate the spatio-temporal kernel `bK_ξ(s, x; t, y)` w.r.t. its background measure.
pub fn st_kernel(xi: &InitialConfig, s: f64, x: f64, t: f64, y: f64) -> Result<f64, DspError> {
    SpatioTemporalKernel::new(xi)?.eval(s, x, t, y)
}

const TAIL_TOL: f64 = 1e-10;
const MAX_TERMS: usize = 5000;

/// Extended Hermite kernel w.r.t. `p_BM(t, x|0) dx`.
pub fn extended_hermite(n: usize, s: f64, x: f64, t: f64, y: f64) -> Result<f64, DspError> {
    let (a, b) = (x / (2.0 * s).sqrt(), y / (2.0 * t).sqrt());
    if s <= t {
        let q = (t / s).sqrt();
        let pa = specfun::hermite_phi_all(n, a);
        let pb = specfun::hermite_phi_all(n, b);
        return Ok((0..n).map(|k| q.powi(k as i32) * pa[k] * pb[k]).sum());
    }
    let q = (t / s).sqrt();
    // Cramér: |φ_k(x)| ≤ 1.0865 π^{1/4} e^{x²/2}
    let c = (1.0865 * PI.powf(0.25)).powi(2) * (0.5 * (a * a + b * b)).exp();
    let tail_after = |m: usize| c * q.powi(m as i32) / (1.0 - q);
    let needed = (0..=MAX_TERMS).find(|&m| m >= n && tail_after(m) < TAIL_TOL);
    match needed {
        Some(m) => Ok(-hermite_series(n, m, q, a, b)),
        None => {
            // Mehler closed form minus the first N terms
            let q2 = q * q;
            let mehler = ((2.0 * a * b * q - (a * a + b * b) * q2) / (1.0 - q2)).exp() / (1.0 - q2).sqrt();
            Ok(-(mehler - hermite_series(0, n, q, a, b)))
        }
    }
}

/// `sum_{k=lo}^{hi-1} q^k φ_k(a) φ_k(b)`.
pub fn hermite_series(lo: usize, hi: usize, q: f64, a: f64, b: f64) -> f64 {
    let pa = specfun::hermite_phi_all(hi, a);
    let pb = specfun::hermite_phi_all(hi, b);
    (lo..hi).map(|k| q.powi(k as i32) * pa[k] * pb[k]).sum()
}

/// Extended Laguerre kernel w.r.t. `p^{(ν)}(t, x|0) dx`.
pub fn extended_laguerre(n: usize, nu: f64, s: f64, x: f64, t: f64, y: f64) -> Result<f64, DspError> {
    let (a, b) = (x / (2.0 * s), y / (2.0 * t));
    let q = t / s;
    if s <= t {
        return Ok(laguerre_series(0, n, nu, q, a, b));
    }
    // |φ_k(x)| ≤ e^{x/2} sqrt(Γ(k+ν+1)/(k! Γ(ν+1))) for ν ≥ 0
    let nu_b = nu.max(0.0);
    let growth = |m: usize| {
        let mf = m as f64;
        (specfun::ln_gamma(mf + nu_b + 1.0) - specfun::ln_gamma(mf + 1.0) - specfun::ln_gamma(nu_b + 1.0)).exp()
    };
    let c = (0.5 * (a + b)).exp();
    let tail_after = |m: usize| c * growth(m) * q.powi(m as i32) / (1.0 - q).powf(1.0 + nu_b);
    let needed = if nu >= 0.0 { (0..=MAX_TERMS).find(|&m| m >= n && tail_after(m) < TAIL_TOL) } else { None };
    match needed {
        Some(m) => Ok(-laguerre_series(n, m, nu, q, a, b)),
        None => {
            // Hille–Hardy closed form minus the first N terms
            let z = 2.0 * (a * b * q).sqrt() / (1.0 - q);
            let hh = if z == 0.0 {
                1.0 / (1.0 - q).powf(nu + 1.0) * (-(a + b) * q / (1.0 - q)).exp()
            } else {
                let ln = specfun::ln_gamma(nu + 1.0) - (1.0 - q).ln() - (a + b) * q / (1.0 - q) - 0.5 * nu * (a * b * q).ln() + z;
                ln.exp() * specfun::bessel_i_scaled(nu, z).unwrap_or(f64::NAN)
            };
            Ok(-(hh - laguerre_series(0, n, nu, q, a, b)))
        }
    }
}

pub fn laguerre_series(lo: usize, hi: usize, nu: f64, q: f64, a: f64, b: f64) -> f64 {
    let pa = specfun::laguerre_phi_all(hi, nu, a);
    let pb = specfun::laguerre_phi_all(hi, nu, b);
    (lo..hi).map(|k| q.powi(k as i32) * pa[k] * pb[k]).sum()
}

fn sigma(n: usize, m: i64) -> f64 {
    if n % 2 == 1 { m as f64 } else { m as f64 - 0.5 }
}

/// Indices m with `|σ_N(m)| ≤ (N−1)/2`.
fn sigma_range(n: usize) -> Vec<i64> {
    let h = (n as f64 - 1.0) / 2.0;
    (-(n as i64)..=(n as i64)).filter(|&m| sigma(n, m).abs() <= h + 1e-12).collect()
}

/// Kernel of Process 3 from the equidistant configuration, w.r.t. `dx/(2πr)`.
pub fn relaxation_kernel(n: usize, r: f64, s: f64, x: f64, t: f64, y: f64) -> f64 {
    let ms = sigma_range(n);
    let kmax = ((40.0 * r * r / s).sqrt() / n as f64).ceil() as i64 + 2;
    let mut g = 0.0;
    for k in -kmax..=kmax {
        for &m in &ms {
            let sm = sigma(n, m);
            let sl = sigma(n, m + k * n as i64);
            let expo = (sm * sm * t - sl * sl * s) / (2.0 * r * r);
            g += expo.exp() * (sl * x / r - sm * y / r).cos();
        }
    }
    if s > t {
        g -= 2.0 * PI * r * p_circle(r, n, s - t, x, y);
    }
    g
}

/// Equilibrium kernel of Process 3 w.r.t. `dx/(2πr)`.
pub fn equilibrium_kernel(n: usize, r: f64, s: f64, x: f64, t: f64, y: f64) -> f64 {
    if s == t {
        return kernels::root_kernel(kernels::RootType::A, n, (y - x) / r, 0.0);
    }
    let term = |m: i64| {
        let sm = sigma(n, m);
        (sm * sm * (t - s) / (2.0 * r * r)).exp() * (sm * (y - x) / r).cos()
    };
    if s < t {
        sigma_range(n).into_iter().map(term).sum()
    } else {
        let h = (n as f64 - 1.0) / 2.0;
        let lmax = ((60.0 * r * r / (s - t)).sqrt()).ceil() as i64 + n as i64 + 2;
        -(-lmax..=lmax).filter(|&m| sigma(n, m).abs() > h + 1e-12).map(term).sum::<f64>()
    }
}

// ---------------------------------------------------------------------------
// DMR Monte Carlo

/// Exact one-step samplers for the driving one-particle processes.
pub fn step_bm(x: f64, dt: f64, r: &mut Rng) -> f64 {
    x + dt.sqrt() * rng::normal(r)
}

/// BESQ(ν) from x over dt: `dt · χ'²_{2(ν+1)}(x/dt)` via the Poisson mixture.
pub fn step_besq(nu: f64, x: f64, dt: f64, r: &mut Rng) -> f64 {
    let lambda = x / dt;
    let k = if lambda > 0.0 { Poisson::new(0.5 * lambda).expect("positive mean").sample(r) } else { 0.0 };
    let shape = nu + 1.0 + k;
    dt * Gamma::new(shape, 2.0).expect("positive shape").sample(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TestFn {
    /// `exp(-(x - c)^2 / w^2)`
    Bump { center: f64, width: f64 },
    /// `cos(k x)`
    Cosine { freq: f64 },
}

impl TestFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFn::Bump { center, width } => (-((x - center) / width).powi(2)).exp(),
            TestFn::Cosine { freq } => (freq * x).cos(),
        }
    }
}

/// Bounded symmetric functionals of the configuration path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Functional {
    /// 1{all particles in [a, b] at time t}
    Window { a: f64, b: f64, t: f64 },
    /// (Σ h(X_j(t1))) · (Σ h(X_j(t2)))
    TwoTime { h: TestFn, t1: f64, t2: f64 },
}

impl Functional {
    pub fn times(&self) -> Vec<f64> {
        match *self {
            Functional::Window { t, .. } => vec![t],
            Functional::TwoTime { t1, t2, .. } => vec![t1, t2],
        }
    }

    /// Evaluate on the states at `self.times()`.
    pub fn eval(&self, states: &[Vec<f64>]) -> f64 {
        match *self {
            Functional::Window { a, b, .. } => {
                if states[0].iter().all(|&x| x >= a && x <= b) { 1.0 } else { 0.0 }
            }
            Functional::TwoTime { h, .. } => {
                let s1: f64 = states[0].iter().map(|&x| h.eval(x)).sum();
                let s2: f64 = states[1].iter().map(|&x| h.eval(x)).sum();
                s1 * s2
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmrEstimate {
    pub direct: f64,
    pub direct_se: f64,
    pub weighted: f64,
    pub weighted_se: f64,
    pub replicas: usize,
}

impl DmrEstimate {
    /// |direct − weighted| in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        (self.direct - self.weighted).abs() / (self.direct_se.powi(2) + self.weighted_se.powi(2)).sqrt()
    }
}

fn wrap_states(process: Process, states: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    match process {
        Process::Circle(r) => states.into_iter().map(|s| loggas::circular_positions(&s, r).0).collect(),
        _ => states,
    }
}

/// Weighted side: independent one-particle paths, weighted by the determinantal martingale at the last time.
pub fn weighted_sample(m: &MartingaleFns, times: &[f64], r: &mut Rng) -> Result<(Vec<Vec<f64>>, f64), DspError> {
    let p = m.config.process;
    let mut y = m.config.points.clone();
    let mut t = 0.0;
    let mut states = Vec::with_capacity(times.len());
    for &tt in times {
        let dt = tt - t;
        for v in y.iter_mut() {
            *v = match p {
                Process::Besq(nu) => step_besq(nu, *v, dt, r),
                _ => step_bm(*v, dt, r),
            };
        }
        t = tt;
        states.push(y.clone());
    }
    let d = det_martingale_with(m, t, &y)?;
    Ok((wrap_states(p, states), d))
}

/// Direct and DMR-weighted Monte Carlo estimates of `E_ξ[F]`.
pub fn dmr_expectation(xi: &InitialConfig, f: &Functional, replicas: usize, dt_max: f64, seed: u64) -> Result<DmrEstimate, DspError> {
    let n = xi.n();
    if xi.multiple.is_some() || n > 4 {
        return Err(DspError::Unsupported("DMR comparison needs a simple configuration with N <= 4".into()));
    }
    let times = f.times();
    if times.len() > 2 || times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
        return Err(DspError::Parameter("need 1 or 2 increasing positive times".into()));
    }
    if replicas < 2 {
        return Err(DspError::Parameter("need at least 2 replicas".into()));
    }
    let gas = GasConfig::new(xi.process.gas_model(), xi.points.clone())?;
    let direct: Vec<Result<f64, GasError>> = rng::replicas(seed, replicas, |r, _| {
        let tr = loggas::simulate_at(&gas, &times, dt_max, r)?;
        Ok(f.eval(&wrap_states(xi.process, tr.states)))
    });
    let direct: Vec<f64> = direct.into_iter().collect::<Result<_, _>>()?;
    let m = MartingaleFns::new(xi)?;
    let weighted: Vec<Result<f64, DspError>> = rng::replicas(seed ^ 0x5eed_0f_d3e7, replicas, |r, _| {
        let (states, d) = weighted_sample(&m, &times, r)?;
        Ok(f.eval(&states) * d)
    });
    let weighted: Vec<f64> = weighted.into_iter().collect::<Result<_, _>>()?;
    let (dm, dse) = rng::mean_se(&direct);
    let (wm, wse) = rng::mean_se(&weighted);
    Ok(DmrEstimate { direct: dm, direct_se: dse, weighted: wm, weighted_se: wse, replicas })
}

// ---------------------------------------------------------------------------
// relaxation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub distance: f64,
    pub max_std_error: f64,
    pub bins: usize,
    pub replicas: usize,
}

/// Sup-bin distance between the empirical two-point function of Process 3 at time t
/// (from the equidistant start) and the CUE determinant `(N² − K_eq²)/(2πr)²`.
pub fn relaxation_distance(n: usize, radius: f64, t: f64, replicas: usize, seed: u64) -> Result<RelaxationReport, DspError> {
    relaxation_distance_binned(n, radius, t, replicas, 16, 1e-2, seed)
}

pub fn relaxation_distance_binned(n: usize, radius: f64, t: f64, replicas: usize, bins: usize, dt_max: f64, seed: u64) -> Result<RelaxationReport, DspError> {
    if !(t > 0.0) || n < 2 || bins == 0 {
        return Err(DspError::Parameter("need t > 0, N >= 2 and bins >= 1".into()));
    }
    let xi = InitialConfig::equidistant(radius, n)?;
    let gas = GasConfig::new(Process::Circle(radius).gas_model(), xi.points.clone())?;
    let samples: Vec<Result<Vec<f64>, GasError>> = rng::replicas(seed, replicas, |r, _| {
        let tr = loggas::simulate_at(&gas, &[t], dt_max, r)?;
        Ok(loggas::circular_positions(tr.last(), radius).0)
    });
    let samples: Vec<Vec<f64>> = samples.into_iter().collect::<Result<_, _>>()?;
    let grid = crate::dpp::Bins::new(0.0, 2.0 * PI * radius, bins);
    let est = crate::dpp::estimate_correlation(&samples, 2, &grid).map_err(|e| DspError::Parameter(e.to_string()))?;
    let c = 1.0 / (2.0 * PI * radius).powi(2);
    let nf = n as f64;
    let mut dist: f64 = 0.0;
    let mut max_se: f64 = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let exact = crate::dpp::bin_average2(
                |x, y| {
                    let k = kernels::root_kernel(kernels::RootType::A, n, (y - x) / radius, 0.0);
                    c * (nf * nf - k * k)
                },
                grid.edges(i),
                grid.edges(j),
            );
            dist = dist.max((est.values[i * bins + j] - exact).abs());
            max_se = max_se.max(est.std_errors[i * bins + j]);
        }
    }
    Ok(RelaxationReport { distance: dist, max_std_error: max_se, bins, replicas })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_moment_examples() {
        for &(t, x) in &[(0.5, 1.3), (2.0, -0.4), (1e-3, 0.7)] {
            assert_eq!(heat_moment(0, t, x).unwrap(), 1.0);
            assert!((heat_moment(1, t, x).unwrap() - x).abs() < 1e-15);
            assert!((heat_moment(2, t, x).unwrap() - (x * x - t)).abs() < 1e-14);
            for n in 0..8 {
                let h = specfun::hermite(n, x / (2.0 * t).sqrt());
                let want = (t / 2.0).powf(n as f64 / 2.0) * h;
                assert!((heat_moment(n, t, x).unwrap() - want).abs() < 1e-10 * (1.0 + want.abs()));
            }
        }
        assert!(heat_moment(1, -1.0, 0.0).is_err());
    }

    #[test]
    fn laguerre_moment_matches_definition() {
        for &nu in &[-0.5, 0.0, 1.5] {
            for &(t, x) in &[(0.5, 1.3), (2.0, 0.4)] {
                assert!((laguerre_moment(1, nu, t, x).unwrap() - (x - 2.0 * t * (nu + 1.0))).abs() < 1e-13);
                for n in 0..7 {
                    let mut f = 1.0;
                    for k in 1..=n {
                        f *= k as f64;
                    }
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    let want = sign * f * (2.0 * t).powi(n as i32) * specfun::laguerre(n, nu, x / (2.0 * t)).unwrap();
                    let got = laguerre_moment(n, nu, t, x).unwrap();
                    assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()), "n={n}: {got} {want}");
                }
            }
        }
    }

    #[test]
    fn transform_of_q_reproduces_moments() {
        // m_n(t, x) = ∫ (i w)^n q(t, w | x) dw with q = e^{-(ix + w)^2/2t}/sqrt(2πt)
        let rule = specfun::composite_legendre(40, -30.0, 30.0, 20);
        let (t, x) = (0.8, 0.6);
        for n in 0..5 {
            let v: C64 = rule.nodes.iter().zip(&rule.weights).map(|(&w, &wt)| {
                let z = C64::new(w, x);
                C64::new(0.0, w).powi(n as i32) * (-(z * z) / (2.0 * t)).exp() / (2.0 * PI * t).sqrt() * wt
            }).sum();
            assert!((v.re - heat_poly(n, t, x)).abs() < 1e-10 && v.im.abs() < 1e-10, "n={n}: {v}");
        }
    }

    #[test]
    fn martingale_function_examples() {
        let xi = InitialConfig::simple(Process::Bm, vec![0.5]).unwrap();
        assert_eq!(martingale_fn(&xi, 0.5, 1.0, 3.0).unwrap(), 1.0);
        let xi = InitialConfig::simple(Process::Bm, vec![-1.0, 2.0]).unwrap();
        let v = martingale_fn(&xi, -1.0, 0.7, 0.4).unwrap();
        assert!((v - (0.4 - 2.0) / (-1.0 - 2.0)).abs() < 1e-14);
        assert!(martingale_fn(&xi, 0.0, 0.7, 0.4).is_err());
        // (M2)/(M3): at t = 0 the matrix M^{u_k}(0, u_j) is the identity
        for p in [Process::Bm, Process::Besq(0.5), Process::Circle(1.0)] {
            let xi = InitialConfig::simple(p, vec![0.3, 1.1, 2.0, 4.0]).unwrap();
            let m = MartingaleFns::new(&xi).unwrap();
            for j in 0..4 {
                for k in 0..4 {
                    let want = if j == k { 1.0 } else { 0.0 };
                    assert!((m.eval(k, 0.0, xi.points[j]) - want).abs() < 1e-12, "{p:?}");
                }
            }
            assert!((det_martingale(&xi, 0.0, &xi.points).unwrap() - 1.0).abs() < 1e-12);
            let mut y = xi.points.clone();
            y.swap(0, 1);
            assert!((det_martingale(&xi, 0.0, &y).unwrap() + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_martingale_antiperiodic_for_even_n() {
        let r = 0.8;
        let xi = InitialConfig::simple(Process::Circle(r), vec![0.1, 2.0]).unwrap();
        let m = MartingaleFns::new(&xi).unwrap();
        for &x in &[0.3, 1.7] {
            let a = m.eval(0, 0.4, x);
            let b = m.eval(0, 0.4, x + 2.0 * PI * r);
            assert!((a + b).abs() < 1e-12);
        }
        let xi = InitialConfig::simple(Process::Circle(r), vec![0.1, 2.0, 3.0]).unwrap();
        let m = MartingaleFns::new(&xi).unwrap();
        assert!((m.eval(1, 0.4, 0.9) - m.eval(1, 0.4, 0.9 + 2.0 * PI * r)).abs() < 1e-12);
    }

    #[test]
    fn densities_integrate_to_one() {
        // y = u² removes the y^ν singularity at the origin
        let rule = specfun::composite_legendre(40, 0.0, 8.0, 40);
        for &nu in &[-0.5, 0.0, 2.0] {
            for &x in &[0.0, 0.5, 3.0] {
                let m = rule.integrate(|u| 2.0 * u * p_besq(nu, 1.3, u * u, x));
                assert!((m - 1.0).abs() < 1e-6, "nu={nu} x={x}: {m}");
            }
        }
        let r = 0.7;
        let rule = specfun::composite_legendre(40, 0.0, 2.0 * PI * r, 10);
        assert!((rule.integrate(|y| p_circle(r, 3, 0.9, y, 1.0)) - 1.0).abs() < 1e-12);
        // even N: signed density integrates to sum (-1)^l P(winding l)
        let fourier = |y: f64| -> f64 {
            (-60..=60).map(|l| {
                let s = l as f64 - 0.5;
                (-(s * s) * 0.9 / (2.0 * r * r)).exp() * (s * (y - 1.0) / r).cos()
            }).sum::<f64>() / (2.0 * PI * r)
        };
        for &y in &[0.0, 1.0, 3.0] {
            assert!((p_circle(r, 2, 0.9, y, 1.0) - fourier(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn extended_kernel_equal_time() {
        let xi = InitialConfig::multiple_origin(Process::Bm, 4).unwrap();
        let k = SpatioTemporalKernel::new(&xi).unwrap();
        let t = 0.7f64;
        for &(x, y) in &[(0.2, -0.5), (1.0, 1.0)] {
            let c = (2.0 * t).sqrt();
            let want = kernels::hermite_kernel(4, x / c, y / c);
            assert!((k.eval(t, x, t, y).unwrap() - want).abs() < 1e-12);
        }
        let xi = InitialConfig::multiple_origin(Process::Besq(0.5), 3).unwrap();
        let k = SpatioTemporalKernel::new(&xi).unwrap();
        let want = kernels::laguerre_kernel(3, 0.5, 0.4 / (2.0 * t), 2.0 / (2.0 * t));
        assert!((k.eval(t, 0.4, t, 2.0).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn extended_kernel_tail_consistency() {
        // s > t, x = y: minus the tail sum; 500 vs 1000 terms agree, and the closed-form fallback matches
        let (s, t, x) = (1.0f64, 0.6f64, 0.4f64);
        let q = (t / s).sqrt();
        let (a, b) = (x / (2.0 * s).sqrt(), x / (2.0 * t).sqrt());
        let t500 = hermite_series(4, 500, q, a, b);
        let t1000 = hermite_series(4, 1000, q, a, b);
        assert!((t500 - t1000).abs() < 1e-12);
        let v = extended_hermite(4, s, x, t, x).unwrap();
        assert!((v + t1000).abs() < 1e-10);
        // near-diagonal times force the Mehler fallback
        let (s, t) = (1.0f64, 0.999_999f64);
        let q = (t / s).sqrt();
        let v = extended_hermite(3, s, 0.3, t, 0.2).unwrap();
        let q2 = q * q;
        let (a, b) = (0.3 / 2f64.sqrt(), 0.2 / (2.0 * t).sqrt());
        let mehler = ((2.0 * a * b * q - (a * a + b * b) * q2) / (1.0 - q2)).exp() / (1.0 - q2).sqrt();
        assert!((v + mehler - hermite_series(0, 3, q, a, b)).abs() < 1e-10);
        let (q, a, b) = (0.9f64, 0.7f64, -0.3f64);
        let q2 = q * q;
        let mehler = ((2.0 * a * b * q - (a * a + b * b) * q2) / (1.0 - q2)).exp() / (1.0 - q2).sqrt();
        assert!((mehler - hermite_series(0, 1500, q, a, b)).abs() < 1e-10);
        // Laguerre: series and Hille–Hardy agree
        let (s, t, nu) = (1.0, 0.5, 0.5);
        let series = -laguerre_series(3, 400, nu, t / s, 0.3, 0.8);
        let v = extended_laguerre(3, nu, s, 0.6, t, 0.8).unwrap();
        assert!((v - series).abs() < 1e-10, "{v} {series}");
        let a = 0.3f64;
        let b = 0.8f64;
        let q = 0.5f64;
        let z = 2.0 * (a * b * q).sqrt() / (1.0 - q);
        let hh = specfun::gamma(nu + 1.0) / (1.0 - q) * (-(a + b) * q / (1.0 - q)).exp() * (a * b * q).powf(-nu / 2.0) * specfun::bessel_i(nu, z).unwrap();
        assert!((hh - laguerre_series(0, 400, nu, q, a, b)).abs() < 1e-10);
    }

    #[test]
    fn kk1_reduces_to_relaxation_kernel() {
        for n in [2, 3, 4] {
            let r = 0.9;
            let xi = InitialConfig::equidistant(r, n).unwrap();
            let fns = MartingaleFns::new(&xi).unwrap();
            let general = |s: f64, x: f64, t: f64, y: f64| {
                let mut v = 0.0;
                for (k, &u) in xi.points.iter().enumerate() {
                    v += p_circle(r, n, s, x, u) * fns.eval(k, t, y);
                }
                if s > t {
                    v -= p_circle(r, n, s - t, x, y);
                }
                v * 2.0 * PI * r
            };
            for &(s, x, t, y) in &[(0.3, 1.0, 0.8, 2.5), (1.2, 0.1, 0.4, 4.0), (0.5, 3.0, 0.5, 3.3)] {
                let a = general(s, x, t, y);
                let b = relaxation_kernel(n, r, s, x, t, y);
                assert!((a - b).abs() < 1e-9, "N={n} ({s},{x},{t},{y}): {a} {b}");
            }
        }
    }

    #[test]
    fn relaxation_to_equilibrium_kernel() {
        let (n, r) = (4, 1.0);
        for &(s, x, t, y) in &[(0.3, 1.0, 0.8, 2.5), (1.0, 0.1, 0.4, 4.0), (0.5, 3.0, 0.5, 3.3)] {
            let a = relaxation_kernel(n, r, s + 60.0, x, t + 60.0, y);
            let b = equilibrium_kernel(n, r, s, x, t, y);
            assert!((a - b).abs() < 1e-9, "({s},{x},{t},{y}): {a} {b}");
        }
        let v = equilibrium_kernel(n, r, 0.5, 1.0, 0.5, 1.0);
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn besq_step_mean() {
        // E[Y_t] = x + 2(ν+1)t
        let xs: Vec<f64> = rng::replicas(4, 40_000, |r, _| step_besq(0.5, 1.2, 0.7, r));
        let (m, se) = rng::mean_se(&xs);
        assert!((m - (1.2 + 3.0 * 0.7)).abs() < 4.0 * se);
        let zs: Vec<f64> = rng::replicas(5, 40_000, |r, _| step_besq(-0.5, 0.0, 1.0, r));
        let (m, se) = rng::mean_se(&zs);
        assert!((m - 1.0).abs() < 4.0 * se);
    }

    #[test]
    fn dmr_single_particle() {
        let xi = InitialConfig::simple(Process::Bm, vec![0.2]).unwrap();
        let f = Functional::Window { a: -0.5, b: 1.0, t: 0.5 };
        let e = dmr_expectation(&xi, &f, 20_000, 1e-2, 3).unwrap();
        assert!(e.z_score() < 4.0, "{e:?}");
    }
}
