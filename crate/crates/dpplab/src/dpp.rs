//! Matrix-model samplers, Gram restrictions, counting laws and correlation estimators.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{self, PointConfiguration};
use crate::rng::{self, Rng};
use crate::specfun;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DppError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("quadrature and closed form disagree by {0:e}")]
    Quadrature(f64),
    #[error("eigenvalue {0} outside [0, 1]")]
    Spectrum(f64),
}

fn check_n(n: usize) -> Result<(), DppError> {
    if n == 0 {
        return Err(DppError::Parameter("N must be >= 1".into()));
    }
    Ok(())
}

fn cnormal(r: &mut Rng, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    C64::new(s * rng::normal(r), s * rng::normal(r))
}

fn hermitian_eigenvalues(m: DMatrix<C64>) -> Result<Vec<f64>, DppError> {
    let e = SymmetricEigen::try_new(m, 1e-15, 10_000).ok_or_else(|| DppError::Eigen("Hermitian eigensolver did not converge".into()))?;
    let mut v: Vec<f64> = e.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

fn general_eigenvalues(m: DMatrix<C64>) -> Result<Vec<C64>, DppError> {
    let s = m.try_schur(1e-15, 10_000).ok_or_else(|| DppError::Eigen("Schur iteration did not converge".into()))?;
    let ev = s.eigenvalues().ok_or_else(|| DppError::Eigen("no eigenvalues from Schur form".into()))?;
    Ok(ev.iter().copied().collect())
}

/// GUE eigenvalues with density proportional to |Δ(x)|² e^{-|x|²}.
pub fn gue_eigenvalues(n: usize, r: &mut Rng) -> Result<Vec<f64>, DppError> {
    let mut m = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = C64::new(0.5f64.sqrt() * rng::normal(r), 0.0);
        for k in j + 1..n {
            let z = cnormal(r, 0.5);
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
    }
    hermitian_eigenvalues(m)
}

pub fn sample_gue(n: usize, seed: u64) -> Result<PointConfiguration, DppError> {
    check_n(n)?;
    Ok(PointConfiguration::from_reals(gue_eigenvalues(n, &mut rng::stream(seed, 0))?))
}

/// Eigenvalues of M†M for an (N+ν)×N standard complex Gaussian M.
pub fn chgue_eigenvalues(n: usize, nu: usize, r: &mut Rng) -> Result<Vec<f64>, DppError> {
    let m = DMatrix::<C64>::from_fn(n + nu, n, |_, _| cnormal(r, 1.0));
    let w = m.adjoint() * &m;
    Ok(hermitian_eigenvalues(w)?.into_iter().map(|x| x.max(0.0)).collect())
}

pub fn sample_chgue(n: usize, nu: usize, seed: u64) -> Result<PointConfiguration, DppError> {
    check_n(n)?;
    Ok(PointConfiguration::from_reals(chgue_eigenvalues(n, nu, &mut rng::stream(seed, 0))?))
}

/// Haar unitary via QR of a Ginibre matrix with the phases of R divided out.
pub fn haar_unitary(n: usize, r: &mut Rng) -> DMatrix<C64> {
    let z = DMatrix::<C64>::from_fn(n, n, |_, _| cnormal(r, 1.0));
    let qr = z.qr();
    let (mut q, rr) = (qr.q(), qr.r());
    for k in 0..n {
        let d = rr[(k, k)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for j in 0..n {
            q[(j, k)] *= ph;
        }
    }
    q
}

pub fn cue_angles(n: usize, r: &mut Rng) -> Result<Vec<f64>, DppError> {
    let u = haar_unitary(n, r);
    let mut a: Vec<f64> = general_eigenvalues(u)?.iter().map(|z| z.arg().rem_euclid(2.0 * PI)).collect();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(a)
}

pub fn sample_cue(n: usize, seed: u64) -> Result<Vec<f64>, DppError> {
    check_n(n)?;
    cue_angles(n, &mut rng::stream(seed, 0))
}

/// Eigenvalues of an N×N matrix with i.i.d. entries of law N(0, 1; C) (E|z|² = 1).
pub fn ginibre_eigenvalues(n: usize, r: &mut Rng) -> Result<Vec<C64>, DppError> {
    general_eigenvalues(DMatrix::<C64>::from_fn(n, n, |_, _| cnormal(r, 1.0)))
}

pub fn sample_ginibre(n: usize, seed: u64) -> Result<PointConfiguration, DppError> {
    check_n(n)?;
    Ok(PointConfiguration::from_complex(ginibre_eigenvalues(n, &mut rng::stream(seed, 0))?))
}

// ---------------------------------------------------------------------------
// Gram restriction and counting laws

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GramFamily {
    Hermite,
    Laguerre(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramRestriction {
    pub family: GramFamily,
    pub n: usize,
    /// the window is [r, ∞)
    pub r: f64,
    pub matrix: DMatrix<f64>,
    /// max |quadrature − closed form| over entries
    pub discrepancy: f64,
}

impl GramRestriction {
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

fn hermite_gram_quadrature(n: usize, r: f64) -> DMatrix<f64> {
    let a = r.max(-14.0);
    let b = r.max(0.0) + 14.0;
    let rule = specfun::composite_legendre(40, a, b, 24);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let p = specfun::hermite_phi_all(n, x);
        let wx = w * (-x * x).exp() / PI.sqrt();
        for j in 0..n {
            for k in 0..=j {
                m[(j, k)] += wx * p[j] * p[k];
            }
        }
    }
    m.fill_upper_triangle_with_lower_triangle();
    m
}

/// `A_{nm} = ∫_r^∞ φ_n φ_m dλ` for n, m < N, by quadrature and by closed form.
pub fn gram_restriction(family: GramFamily, n: usize, r: f64) -> Result<GramRestriction, DppError> {
    if n == 0 || n > 30 {
        return Err(DppError::Parameter(format!("Gram restriction needs 1 <= N <= 30, got {n}")));
    }
    if !r.is_finite() {
        return Err(DppError::Parameter("r must be finite".into()));
    }
    let (quad, closed) = match family {
        GramFamily::Hermite => {
            let q = hermite_gram_quadrature(n, r);
            let c = DMatrix::from_fn(n, n, |j, k| kernels::discrete_hermite(r, j, k));
            (q, c)
        }
        GramFamily::Laguerre(nu) => {
            if !(r > 0.0) || !(nu > -1.0) {
                return Err(DppError::Parameter(format!("Laguerre Gram needs r > 0 and nu > -1, got r={r}, nu={nu}")));
            }
            let q = DMatrix::from_fn(n, n, |j, k| kernels::discrete_laguerre_quadrature(r, nu, j, k));
            let c = DMatrix::from_fn(n, n, |j, k| kernels::discrete_laguerre(r, nu, j, k));
            (q, c)
        }
    };
    let disc = (&quad - &closed).amax();
    if !(disc <= 1e-8) {
        return Err(DppError::Quadrature(disc));
    }
    Ok(GramRestriction { family, n, r, matrix: closed, discrepancy: disc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingLaw {
    pub bernoulli_params: Vec<f64>,
    pub pmf: Vec<f64>,
}

impl CountingLaw {
    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

/// Law of a sum of independent Bernoulli(p_i), by DP convolution.
pub fn poisson_binomial(params: &[f64]) -> CountingLaw {
    let mut pmf = vec![0.0; params.len() + 1];
    pmf[0] = 1.0;
    for (i, &p) in params.iter().enumerate() {
        for k in (0..=i + 1).rev() {
            let stay = pmf[k] * (1.0 - p);
            let up = if k > 0 { pmf[k - 1] * p } else { 0.0 };
            pmf[k] = stay + up;
        }
    }
    CountingLaw { bernoulli_params: params.to_vec(), pmf }
}

pub fn counting_law(gram: &GramRestriction) -> Result<CountingLaw, DppError> {
    let mut ps = gram.eigenvalues();
    for p in ps.iter_mut() {
        if *p < -1e-8 || *p > 1.0 + 1e-8 {
            return Err(DppError::Spectrum(*p));
        }
        *p = p.clamp(0.0, 1.0);
    }
    Ok(poisson_binomial(&ps))
}

/// Bernoulli parameters `λ_n(r) = P(Po(r²) ≥ n + 1)` for the Ginibre count in the disc of radius r.
pub fn ginibre_radial_law(r: f64, n_max: usize) -> Result<CountingLaw, DppError> {
    if !(r > 0.0) {
        return Err(DppError::Parameter(format!("radius must be positive, got {r}")));
    }
    let r2 = r * r;
    if (n_max as f64) < r2 + 10.0 * r {
        return Err(DppError::Parameter(format!("n_max = {n_max} too small for r = {r}; need >= {}", (r2 + 10.0 * r).ceil())));
    }
    let lam = |k: usize| specfun::gamma_p(k as f64 + 1.0, r2);
    let params: Vec<f64> = (0..n_max).map(lam).collect();
    let mut tail = 0.0;
    let mut k = n_max;
    loop {
        let t = lam(k);
        tail += t;
        if t < 1e-18 || k > n_max + 10_000 {
            break;
        }
        k += 1;
    }
    if tail > 1e-10 {
        return Err(DppError::Parameter(format!("truncation tail {tail:e} exceeds 1e-10")));
    }
    Ok(poisson_binomial(&params))
}

/// Empirical law of integer counts, padded to `len` entries.
pub fn empirical_law(counts: &[usize], len: usize) -> Vec<f64> {
    let mut p = vec![0.0; len.max(counts.iter().max().map_or(0, |m| m + 1))];
    for &c in counts {
        p[c] += 1.0;
    }
    let n = counts.len() as f64;
    p.iter_mut().for_each(|v| *v /= n);
    p
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    0.5 * (0..n).map(|i| (p.get(i).unwrap_or(&0.0) - q.get(i).unwrap_or(&0.0)).abs()).sum::<f64>()
}

// ---------------------------------------------------------------------------
// correlation estimators

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Bins {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        Bins { lo, hi, count }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    pub fn index(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        Some((((x - self.lo) / self.width()) as usize).min(self.count - 1))
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        (self.lo + i as f64 * self.width(), self.lo + (i + 1) as f64 * self.width())
    }
}

/// Binned estimate of ρ¹ (length `bins.count`) or ρ² (row-major `count × count`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedEstimate {
    pub order: usize,
    pub bins: Bins,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub empty: Vec<bool>,
}

/// Unbiased binned estimates of ρ¹ / ρ² (w.r.t. Lebesgue) from samples of real configurations.
pub fn estimate_correlation(samples: &[Vec<f64>], order: usize, bins: &Bins) -> Result<BinnedEstimate, DppError> {
    if samples.len() < 1000 {
        return Err(DppError::Parameter(format!("need at least 1000 samples, got {}", samples.len())));
    }
    if !(1..=2).contains(&order) || bins.count == 0 || !(bins.hi > bins.lo) {
        return Err(DppError::Parameter("order must be 1 or 2 and bins non-degenerate".into()));
    }
    let cells = bins.count.pow(order as u32);
    let mut sum = vec![0.0; cells];
    let mut sum2 = vec![0.0; cells];
    let mut local = vec![0.0; cells];
    for s in samples {
        local.iter_mut().for_each(|v| *v = 0.0);
        let idx: Vec<Option<usize>> = s.iter().map(|&x| bins.index(x)).collect();
        if order == 1 {
            for i in idx.iter().flatten() {
                local[*i] += 1.0;
            }
        } else {
            for (a, ia) in idx.iter().enumerate() {
                for (b, ib) in idx.iter().enumerate() {
                    if a != b {
                        if let (Some(i), Some(j)) = (ia, ib) {
                            local[i * bins.count + j] += 1.0;
                        }
                    }
                }
            }
        }
        for c in 0..cells {
            sum[c] += local[c];
            sum2[c] += local[c] * local[c];
        }
    }
    let n = samples.len() as f64;
    let vol = bins.width().powi(order as i32);
    let mut values = vec![0.0; cells];
    let mut se = vec![0.0; cells];
    for c in 0..cells {
        let m = sum[c] / n;
        let var = (sum2[c] / n - m * m).max(0.0) * n / (n - 1.0);
        values[c] = m / vol;
        se[c] = (var / n).sqrt() / vol;
    }
    let empty = sum.iter().map(|&s| s == 0.0).collect();
    Ok(BinnedEstimate { order, bins: bins.clone(), values, std_errors: se, empty })
}

/// Bin average of `f` over `[a, b]` by 8-point Gauss–Legendre.
pub fn bin_average(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    specfun::gauss_legendre(8).on_interval(a, b).integrate(f) / (b - a)
}

/// Bin average of `f(x, y)` over a rectangle.
pub fn bin_average2(f: impl Fn(f64, f64) -> f64, (a, b): (f64, f64), (c, d): (f64, f64)) -> f64 {
    let rx = specfun::gauss_legendre(8).on_interval(a, b);
    let ry = specfun::gauss_legendre(8).on_interval(c, d);
    rx.integrate(|x| ry.integrate(|y| f(x, y))) / ((b - a) * (d - c))
}
