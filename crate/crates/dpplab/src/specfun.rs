//! Special functions and orthonormal polynomial families.
//!
//! Conventions: `H_n` are the physicists' Hermite polynomials, orthogonal for
//! `e^{-x^2}`; `L_n^{(nu)}` are generalized Laguerre polynomials, orthogonal for
//! `x^nu e^{-x}`. The normalized families `phi_n` are orthonormal with respect
//! to the probability measures `N(0, 1/2)` and `Gamma(nu + 1, 1)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma as sgamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolyKind {
    Hermite,
    Laguerre(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyFamily {
    pub kind: PolyKind,
    pub degree: usize,
}

impl PolyFamily {
    pub fn hermite(degree: usize) -> Self {
        PolyFamily { kind: PolyKind::Hermite, degree }
    }

    pub fn laguerre(degree: usize, nu: f64) -> Result<Self, SpecError> {
        check_nu(nu)?;
        Ok(PolyFamily { kind: PolyKind::Laguerre(nu), degree })
    }
}

fn check_nu(nu: f64) -> Result<(), SpecError> {
    if nu > -1.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(SpecError::Parameter(format!("Laguerre parameter nu = {nu} must exceed -1")))
    }
}

pub fn gamma(x: f64) -> f64 {
    sgamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    sgamma::ln_gamma(x)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    sgamma::gamma_lr(a, x)
}

pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

pub fn laguerre(n: usize, nu: f64, x: f64) -> Result<f64, SpecError> {
    check_nu(nu)?;
    Ok(laguerre_unchecked(n, nu, x))
}

pub(crate) fn laguerre_unchecked(n: usize, nu: f64, x: f64) -> f64 {
    let (mut l0, mut l1) = (1.0, 1.0 + nu - x);
    if n == 0 {
        return l0;
    }
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 + nu - x) * l1 - (kf + nu) * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// `phi_0(x), ..., phi_{n-1}(x)` for the Hermite family, orthonormal in `N(0, 1/2)`.
pub fn hermite_phi_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(1.0);
    if n == 1 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * x);
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = (std::f64::consts::SQRT_2 * x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
        out.push(next);
    }
    out
}

/// `phi_0^{(nu)}(x), ..., phi_{n-1}^{(nu)}(x)`, orthonormal in `Gamma(nu + 1, 1)`.
pub fn laguerre_phi_all(n: usize, nu: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(1.0);
    if n == 1 {
        return out;
    }
    out.push((1.0 + nu - x) / (1.0 + nu).sqrt());
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + nu - x) * out[k] - (kf * (kf + nu)).sqrt() * out[k - 1])
            / ((kf + 1.0) * (kf + nu + 1.0)).sqrt();
        out.push(next);
    }
    out
}

/// Laguerre `phi_k^{(nu)}` and their x-derivatives for `k < n`.
pub fn laguerre_phi_all_deriv(n: usize, nu: f64, x: f64) -> (Vec<f64>, Vec<f64>) {
    let p = laguerre_phi_all(n, nu, x);
    let mut d = Vec::with_capacity(n);
    if n == 0 {
        return (p, d);
    }
    d.push(0.0);
    if n == 1 {
        return (p, d);
    }
    d.push(-1.0 / (1.0 + nu).sqrt());
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + nu - x) * d[k] - p[k] - (kf * (kf + nu)).sqrt() * d[k - 1])
            / ((kf + 1.0) * (kf + nu + 1.0)).sqrt();
        d.push(next);
    }
    (p, d)
}

pub fn phi_normalized(family: PolyFamily, x: f64) -> Result<f64, SpecError> {
    let n = family.degree;
    match family.kind {
        PolyKind::Hermite => Ok(hermite_phi_all(n + 1, x)[n]),
        PolyKind::Laguerre(nu) => {
            check_nu(nu)?;
            Ok(laguerre_phi_all(n + 1, nu, x)[n])
        }
    }
}

/// Hermite functions `phi_n(x) e^{-x^2/2} / pi^{1/4}`, orthonormal in `L^2(R, dx)`.
/// Computed from the recurrence seeded at `n = 0`, so large degrees do not overflow.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push((-0.5 * x * x).exp() / PI.powf(0.25));
    if n == 1 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * x * out[0]);
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = (std::f64::consts::SQRT_2 * x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
        out.push(next);
    }
    out
}

/// Laguerre functions `phi_n^{(nu)}(x) sqrt(x^nu e^{-x} / Gamma(nu + 1))`, orthonormal in `L^2(R_+, dx)`.
pub fn laguerre_functions(n: usize, nu: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let w = if x > 0.0 {
        (0.5 * (nu * x.ln() - x - ln_gamma(nu + 1.0))).exp()
    } else if nu == 0.0 {
        1.0
    } else if nu > 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    out.push(w);
    if n == 1 {
        return out;
    }
    out.push((1.0 + nu - x) / (1.0 + nu).sqrt() * w);
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + nu - x) * out[k] - (kf * (kf + nu)).sqrt() * out[k - 1])
            / ((kf + 1.0) * (kf + nu + 1.0)).sqrt();
        out.push(next);
    }
    out
}

// ---------------------------------------------------------------------------
// Bessel functions

fn bessel_j_series(nu: f64, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = if h == 0.0 {
        if nu == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (nu * h.ln() - ln_gamma(nu + 1.0)).exp()
    };
    if nu < 0.0 && gamma(nu + 1.0) < 0.0 {
        term = -term;
    }
    let mut sum = term;
    for k in 1..300 {
        let kf = k as f64;
        term *= -h * h / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `J_{nu + k}(x)` for `k = 0, 1, ...` obtained by Miller's backward recurrence,
/// normalized with `(x/2)^nu = sum_k (nu + 2k) Gamma(nu + k) / k! J_{nu+2k}(x)`.
fn bessel_j_miller(nu: f64, x: f64, count: usize) -> Vec<f64> {
    let start = ((x + 40.0 + 8.0 * x.cbrt()).ceil() as usize).max(count + 20);
    let start = start + start % 2;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for m in (1..=start).rev() {
        let mu = nu + m as f64;
        vals[m - 1] = 2.0 * mu / x * vals[m] - vals[m + 1];
        if vals[m - 1].abs() > 1e250 {
            for v in vals.iter_mut().skip(m - 1) {
                *v *= 1e-250;
            }
        }
    }
    // normalization sum over even offsets
    let mut c = gamma(nu + 1.0); // Gamma(nu + k) / k! at k = 1
    let mut norm = if nu == 0.0 { vals[0] } else { c * vals[0] };
    let mut k = 1;
    while 2 * k <= start {
        if k > 1 {
            let kf = k as f64;
            c *= (nu + kf - 1.0) / kf;
        }
        let weight = if nu == 0.0 { 2.0 } else { (nu + 2.0 * k as f64) * c };
        norm += weight * vals[2 * k];
        k += 1;
    }
    let scale = (0.5 * x).powf(nu) / norm;
    vals.truncate(count);
    vals.iter().map(|v| v * scale).collect()
}

fn bessel_j_any(nu: f64, x: f64) -> f64 {
    if x <= 2.0 || (nu > 0.0 && x < 0.2 * nu) {
        return bessel_j_series(nu, x);
    }
    if nu > -1.0 {
        return bessel_j_miller(nu, x, 1)[0];
    }
    // shift up and recur downward: J_{mu-1} = (2 mu / x) J_mu - J_{mu+1}
    let shift = (-nu).ceil() as usize;
    let base = nu + shift as f64;
    let v = bessel_j_miller(base, x, 2);
    let (mut j1, mut j0) = (v[1], v[0]);
    let mut mu = base;
    for _ in 0..shift {
        let jm = 2.0 * mu / x * j0 - j1;
        j1 = j0;
        j0 = jm;
        mu -= 1.0;
    }
    j0
}

/// Bessel function of the first kind `J_nu(x)` for `nu > -1`, `x >= 0`.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64, SpecError> {
    check_nu(nu)?;
    if !(x >= 0.0) {
        return Err(SpecError::Domain(format!("bessel_j needs x >= 0, got {x}")));
    }
    Ok(bessel_j_any(nu, x))
}

/// `J_nu(x)` and its derivative `J_nu'(x)`; orders below -1 are reached by recurrence.
pub(crate) fn bessel_j_and_deriv(nu: f64, x: f64) -> (f64, f64) {
    let j = bessel_j_any(nu, x);
    let jp1 = bessel_j_any(nu + 1.0, x);
    (j, nu / x * j - jp1)
}

pub(crate) fn bessel_j_unchecked(nu: f64, x: f64) -> f64 {
    bessel_j_any(nu, x)
}

/// `e^{-x} I_nu(x)`, safe for large `x`.
pub fn bessel_i_scaled(nu: f64, x: f64) -> Result<f64, SpecError> {
    check_nu(nu)?;
    if !(x >= 0.0) {
        return Err(SpecError::Domain(format!("bessel_i needs x >= 0, got {x}")));
    }
    if x <= 60.0 {
        return Ok(bessel_i_series(nu, x) * (-x).exp());
    }
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    Ok(sum / (2.0 * PI * x).sqrt())
}

fn bessel_i_series(nu: f64, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = if h == 0.0 {
        if nu == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (nu * h.ln() - ln_gamma(nu + 1.0)).exp()
    };
    if nu < 0.0 && gamma(nu + 1.0) < 0.0 {
        term = -term;
    }
    let mut sum = term;
    for k in 1..500 {
        let kf = k as f64;
        term *= h * h / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Modified Bessel function of the first kind `I_nu(x)`.
pub fn bessel_i(nu: f64, x: f64) -> Result<f64, SpecError> {
    check_nu(nu)?;
    if !(x >= 0.0) {
        return Err(SpecError::Domain(format!("bessel_i needs x >= 0, got {x}")));
    }
    if x <= 60.0 {
        Ok(bessel_i_series(nu, x))
    } else {
        Ok(bessel_i_scaled(nu, x)? * x.exp())
    }
}

// ---------------------------------------------------------------------------
// Airy functions

const AI0: f64 = 0.355_028_053_887_817_24;
const AIP0: f64 = 0.258_819_403_792_806_8;

fn airy_maclaurin(x: f64) -> (f64, f64) {
    // f = sum 3^k (1/3)_k x^{3k} / (3k)!, g = sum 3^k (2/3)_k x^{3k+1} / (3k+1)!
    let x3 = x * x * x;
    let (mut f, mut g) = (1.0, x);
    let (mut tf, mut tg) = (1.0, x);
    let (mut fp, mut gp) = (0.0, 1.0);
    for k in 1..200 {
        let kf = k as f64;
        tf *= x3 / ((3.0 * kf - 1.0) * (3.0 * kf));
        tg *= x3 / ((3.0 * kf) * (3.0 * kf + 1.0));
        f += tf;
        g += tg;
        fp += 3.0 * kf * tf / x;
        gp += (3.0 * kf + 1.0) * tg / x;
        if tf.abs() + tg.abs() < 1e-18 * (f.abs() + g.abs()) {
            break;
        }
    }
    if x == 0.0 {
        fp = 0.0;
        gp = 1.0;
    }
    (AI0 * f - AIP0 * g, AI0 * fp - AIP0 * gp)
}

fn airy_coeffs(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![1.0];
    let mut v = vec![1.0];
    for k in 1..count {
        let kf = k as f64;
        let uk = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        u.push(uk);
        v.push(-(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * uk);
    }
    (u, v)
}

fn airy_asymptotic(x: f64) -> (f64, f64) {
    let (u, v) = airy_coeffs(30);
    let z = x.abs();
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    if x > 0.0 {
        let (mut su, mut sv) = (0.0, 0.0);
        let mut p = 1.0;
        for k in 0..30 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let tu = sign * u[k] * p;
            if k > 0 && tu.abs() < 1e-18 {
                break;
            }
            su += tu;
            sv += sign * v[k] * p;
            p /= zeta;
        }
        let e = (-zeta).exp() / (2.0 * PI.sqrt());
        (e / z.powf(0.25) * su, -e * z.powf(0.25) * sv)
    } else {
        let (mut pu, mut qu, mut pv, mut qv) = (0.0, 0.0, 0.0, 0.0);
        let mut p = 1.0;
        for k in 0..30 {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k > 0 && u[k] * p < 1e-18 {
                break;
            }
            if k % 2 == 0 {
                pu += sign * u[k] * p;
                pv += sign * v[k] * p;
            } else {
                qu += sign * u[k] * p;
                qv += sign * v[k] * p;
            }
            p /= zeta;
        }
        let (s, c) = (zeta - PI / 4.0).sin_cos();
        let ai = (c * pu + s * qu) / (PI.sqrt() * z.powf(0.25));
        let aip = z.powf(0.25) / PI.sqrt() * (s * pv - c * qv);
        (ai, aip)
    }
}

fn airy_both(x: f64) -> (f64, f64) {
    if x.abs() <= 6.0 {
        airy_maclaurin(x)
    } else {
        airy_asymptotic(x)
    }
}

pub fn airy(x: f64) -> f64 {
    airy_both(x).0
}

pub fn airy_prime(x: f64) -> f64 {
    airy_both(x).1
}

pub(crate) fn airy_pair(x: f64) -> (f64, f64) {
    airy_both(x)
}

// ---------------------------------------------------------------------------
// Gauss rules

/// Nodes and weights of an n-point Gauss rule.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Rescale a rule on [-1, 1] to [a, b].
    pub fn on_interval(&self, a: f64, b: f64) -> GaussRule {
        let h = 0.5 * (b - a);
        let m = 0.5 * (b + a);
        GaussRule {
            nodes: self.nodes.iter().map(|t| m + h * t).collect(),
            weights: self.weights.iter().map(|w| w * h).collect(),
        }
    }
}

/// Rule from the Jacobi matrix of a three-term recurrence: diagonal `a(k)`,
/// off-diagonal `b(k)` (k >= 1) and total mass `mu0`. Nodes from the
/// eigenvalues are polished by Newton steps and weights come from the
/// Christoffel function, which keeps tiny weights accurate to full relative precision.
fn jacobi_rule(n: usize, a: impl Fn(usize) -> f64, b: impl Fn(usize) -> f64, mu0: f64) -> GaussRule {
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jm[(k, k)] = a(k);
        if k + 1 < n {
            jm[(k, k + 1)] = b(k + 1);
            jm[(k + 1, k)] = b(k + 1);
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jm).eigenvalues.iter().copied().collect();
    nodes.sort_by(|p, q| p.partial_cmp(q).unwrap());

    // orthonormal recurrence with running rescale; returns (p_n, p_n', sum_{k<n} p_k^2) up to a common factor s
    let eval = |x: f64| -> (f64, f64, f64, f64) {
        let (mut p0, mut p1) = (0.0, 1.0);
        let (mut d0, mut d1) = (0.0, 0.0);
        let mut sum = 0.0;
        let mut log_scale = 0.0;
        for k in 0..n {
            sum += p1 * p1;
            let bk = if k == 0 { 0.0 } else { b(k) };
            let bn = b(k + 1);
            let p2 = ((x - a(k)) * p1 - bk * p0) / bn;
            let d2 = ((x - a(k)) * d1 + p1 - bk * d0) / bn;
            p0 = p1;
            p1 = p2;
            d0 = d1;
            d1 = d2;
            let m = p1.abs().max(p0.abs());
            if m > 1e100 {
                p0 /= m;
                p1 /= m;
                d0 /= m;
                d1 /= m;
                sum /= m * m;
                log_scale += m.ln();
            }
        }
        (p1, d1, sum, log_scale)
    };
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, d, _, _) = eval(*x);
            if d != 0.0 && d.is_finite() {
                let step = p / d;
                if step.is_finite() {
                    *x -= step;
                }
            }
        }
        let (_, _, sum, log_scale) = eval(*x);
        let lw = mu0.ln() - sum.ln() - 2.0 * log_scale;
        weights.push(lw.exp());
    }
    GaussRule { nodes, weights }
}

/// Gauss–Hermite rule for the weight `e^{-x^2}` on R.
pub fn gauss_hermite(n: usize) -> GaussRule {
    jacobi_rule(n, |_| 0.0, |k| (k as f64 / 2.0).sqrt(), PI.sqrt())
}

/// Generalized Gauss–Laguerre rule for the weight `x^alpha e^{-x}` on R_+.
pub fn gauss_laguerre(n: usize, alpha: f64) -> GaussRule {
    jacobi_rule(
        n,
        |k| 2.0 * k as f64 + alpha + 1.0,
        |k| (k as f64 * (k as f64 + alpha)).sqrt(),
        gamma(alpha + 1.0),
    )
}

/// Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> GaussRule {
    jacobi_rule(
        n,
        |_| 0.0,
        |k| {
            let kf = k as f64;
            kf / (4.0 * kf * kf - 1.0).sqrt()
        },
        2.0,
    )
}

/// Composite Gauss–Legendre over `[a, b]` split into `pieces` panels.
pub fn composite_legendre(n: usize, a: f64, b: f64, pieces: usize) -> GaussRule {
    let base = gauss_legendre(n);
    let mut nodes = Vec::with_capacity(n * pieces);
    let mut weights = Vec::with_capacity(n * pieces);
    let h = (b - a) / pieces as f64;
    for p in 0..pieces {
        let r = base.on_interval(a + p as f64 * h, a + (p + 1) as f64 * h);
        nodes.extend(r.nodes);
        weights.extend(r.weights);
    }
    GaussRule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hermite_series(n: usize, x: f64) -> f64 {
        // n! sum_{k <= n/2} (-1)^k (2x)^{n-2k} / (k! (n-2k)!)
        let fact = |m: usize| (1..=m).map(|i| i as f64).product::<f64>();
        (0..=n / 2)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                s * fact(n) * (2.0 * x).powi((n - 2 * k) as i32) / (fact(k) * fact(n - 2 * k))
            })
            .sum()
    }

    fn laguerre_series(n: usize, nu: f64, x: f64) -> f64 {
        // sum_k (-1)^k Gamma(n + nu + 1) / (Gamma(k + nu + 1) (n - k)! k!) x^k
        let fact = |m: usize| (1..=m).map(|i| i as f64).product::<f64>();
        (0..=n)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                let ratio: f64 = (k + 1..=n).map(|j| j as f64 + nu).product();
                s * ratio / (fact(n - k) * fact(k))
                    * x.powi(k as i32)
            })
            .sum()
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite(0, 3.7), 1.0);
        assert_eq!(hermite(1, 2.0), 4.0);
        assert_eq!(hermite(3, 1.0), -4.0);
    }

    #[test]
    fn hermite_matches_series() {
        for n in 0..=12 {
            for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
                let a = hermite(n, x);
                let b = hermite_series(n, x);
                assert!((a - b).abs() <= 1e-11 * b.abs().max(1.0), "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn laguerre_examples() {
        assert_eq!(laguerre(0, 0.5, 9.0).unwrap(), 1.0);
        assert_eq!(laguerre(1, 0.0, 2.0).unwrap(), -1.0);
        assert_eq!(laguerre(2, 0.0, 0.0).unwrap(), 1.0);
        assert!(laguerre(2, -1.0, 0.3).is_err());
        assert!(laguerre(2, -1.5, 0.3).is_err());
    }

    #[test]
    fn laguerre_matches_series() {
        for n in 0..=12 {
            for &nu in &[-0.5, 0.0, 1.0, 2.3] {
                for &x in &[0.0, 0.3, 1.7, 6.0] {
                    let a = laguerre(n, nu, x).unwrap();
                    let b = laguerre_series(n, nu, x);
                    assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "n={n} nu={nu} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_normalized(PolyFamily::hermite(0), 5.0).unwrap(), 1.0);
        let v = phi_normalized(PolyFamily::hermite(2), 0.0).unwrap();
        assert!((v + 2.0 / 8f64.sqrt()).abs() < 1e-15);
        let l = phi_normalized(PolyFamily::laguerre(1, 0.0).unwrap(), 0.0).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalized_families_match_definitions() {
        for n in 0..15 {
            let x = 0.83;
            let direct = hermite(n, x) / (2f64.powi(n as i32) * gamma(n as f64 + 1.0)).sqrt();
            let v = hermite_phi_all(n + 1, x)[n];
            assert!((v - direct).abs() < 1e-12 * direct.abs().max(1.0));
            let nu = 0.7;
            let w = (gamma(n as f64 + 1.0) * gamma(nu + 1.0) / gamma(n as f64 + nu + 1.0)).sqrt();
            let direct = w * laguerre(n, nu, 2.1).unwrap();
            let v = laguerre_phi_all(n + 1, nu, 2.1)[n];
            assert!((v - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn gamma_values() {
        let mut f = 1.0;
        for k in 1..30 {
            f *= k as f64;
            let g = gamma(k as f64 + 1.0);
            assert!((g - f).abs() < 1e-12 * f, "Gamma({}) = {g} vs {f}", k + 1);
        }
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bessel_examples() {
        assert!(bessel_j(0.5, PI).unwrap().abs() < 1e-14);
        assert!((bessel_j(0.5, PI / 2.0).unwrap() - 2.0 / PI).abs() < 1e-14);
        assert_eq!(bessel_i(0.0, 0.0).unwrap(), 1.0);
        assert!(bessel_j(0.5, -1.0).is_err());
        assert!(bessel_j(-1.0, 1.0).is_err());
    }

    #[test]
    fn bessel_half_orders_closed_form() {
        let mut x = 0.1;
        while x <= 40.0 {
            let c = (2.0 / (PI * x)).sqrt();
            assert!((bessel_j(0.5, x).unwrap() - c * x.sin()).abs() < 1e-12, "x={x}");
            assert!((bessel_j(-0.5, x).unwrap() - c * x.cos()).abs() < 1e-12, "x={x}");
            x += 0.173;
        }
    }

    #[test]
    fn bessel_j_seam_is_continuous() {
        for &nu in &[-0.7, 0.0, 0.3, 1.0, 4.5] {
            let a = bessel_j_series(nu, 2.0);
            let b = bessel_j_miller(nu, 2.0, 1)[0];
            assert!((a - b).abs() < 1e-13, "nu={nu}: {a} {b}");
            let a = bessel_j_series(nu, 9.0);
            let b = bessel_j_miller(nu, 9.0, 1)[0];
            assert!((a - b).abs() < 1e-11, "nu={nu}: {a} {b}");
        }
    }

    #[test]
    fn bessel_j_reference_values() {
        // tabulated J_0, J_1 values
        let cases = [
            (0.0, 1.0, 0.765_197_686_557_966_6),
            (0.0, 10.0, -0.245_935_764_451_348_3),
            (1.0, 10.0, 0.043_472_746_168_861_44),
            (0.0, 50.0, 0.055_812_327_669_251_82),
            (1.0, 2.5, 0.497_094_102_464_274_4),
        ];
        for (nu, x, want) in cases {
            let got = bessel_j(nu, x).unwrap();
            assert!((got - want).abs() < 1e-13, "J_{nu}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn bessel_i_reference_and_scaled() {
        assert!((bessel_i(0.0, 1.0).unwrap() - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i(1.0, 1.0).unwrap() - 0.565_159_103_992_485_1).abs() < 1e-14);
        let c = (2.0 / (PI * 70.0)).sqrt();
        // I_{1/2}(x) = sqrt(2/(pi x)) sinh x
        let s = bessel_i_scaled(0.5, 70.0).unwrap();
        assert!((s - c * 0.5 * (1.0 - (-140f64).exp())).abs() < 1e-14);
        let s = bessel_i_scaled(0.5, 30.0).unwrap();
        let c = (2.0 / (PI * 30.0)).sqrt();
        assert!((s - c * 0.5 * (1.0 - (-60f64).exp())).abs() < 1e-14);
    }

    fn airy_oracle(x: f64) -> f64 {
        // rotate the cosine integral onto the ray t = s e^{i pi / 6}
        let rule = composite_legendre(40, 0.0, 12.0, 24);
        let w = nalgebra::Complex::new((2.0 * PI / 3.0).cos(), (2.0 * PI / 3.0).sin());
        let rot = nalgebra::Complex::new((PI / 6.0).cos(), (PI / 6.0).sin());
        let mut acc = nalgebra::Complex::new(0.0, 0.0);
        for (&s, &wt) in rule.nodes.iter().zip(&rule.weights) {
            acc += (w * (x * s) - s * s * s / 3.0).exp() * wt;
        }
        (rot * acc).re / PI
    }

    #[test]
    fn airy_examples() {
        assert!((airy(0.0) - 0.355_028_053_8).abs() < 1e-9);
        assert!((airy_prime(0.0) + 0.258_819_403_7).abs() < 1e-9);
        assert!(airy(10.0).abs() < 1e-9);
    }

    #[test]
    fn airy_matches_integral_oracle() {
        for &x in &[-9.5, -6.5, -5.9, -2.0, 0.0, 1.3, 5.9, 6.1] {
            let a = airy(x);
            let o = airy_oracle(x);
            assert!((a - o).abs() < 1e-10, "Ai({x}) = {a} vs {o}");
        }
    }

    #[test]
    fn airy_seams_continuous() {
        for &x in &[-6.0, 6.0] {
            let (a, ap) = airy_maclaurin(x);
            let (b, bp) = airy_asymptotic(x);
            assert!((a - b).abs() < 5e-9 && (ap - bp).abs() < 5e-9, "x={x}: {a} {b} {ap} {bp}");
        }
    }

    #[test]
    fn airy_wronskian_type_identity() {
        // Ai'' = x Ai, checked by central differences
        for &x in &[-8.0, -3.0, 0.5, 4.0, 8.0] {
            let h = 1e-3;
            let d2 = (airy_prime(x + h) - airy_prime(x - h)) / (2.0 * h);
            assert!((d2 - x * airy(x)).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn gauss_rules_integrate_moments() {
        let gh = gauss_hermite(200);
        assert!((gh.integrate(|_| 1.0) - PI.sqrt()).abs() < 1e-13);
        assert!((gh.integrate(|x| x * x) - PI.sqrt() / 2.0).abs() < 1e-13);
        let gl = gauss_laguerre(200, 1.5);
        assert!((gl.integrate(|x| x) - gamma(3.5)).abs() < 1e-11);
        let lg = gauss_legendre(32);
        assert!((lg.integrate(|x| x.powi(6)) - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn orthonormality_by_quadrature() {
        let gh = gauss_hermite(200);
        let ps: Vec<Vec<f64>> = gh.nodes.iter().map(|&x| hermite_phi_all(21, x)).collect();
        for n in 0..=20 {
            for m in 0..=20 {
                let v: f64 = ps.iter().zip(&gh.weights).map(|(p, w)| w * p[n] * p[m]).sum::<f64>() / PI.sqrt();
                let want = if n == m { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-8, "hermite n={n} m={m}: {v}");
            }
        }
        for &nu in &[-0.5, 0.0, 2.0] {
            let gl = gauss_laguerre(200, nu);
            let ps: Vec<Vec<f64>> = gl.nodes.iter().map(|&x| laguerre_phi_all(21, nu, x)).collect();
            for n in 0..=20 {
                for m in 0..=20 {
                    let v: f64 = ps.iter().zip(&gl.weights).map(|(p, w)| w * p[n] * p[m]).sum::<f64>() / gamma(nu + 1.0);
                    let want = if n == m { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-8, "laguerre nu={nu} n={n} m={m}: {v}");
                }
            }
        }
    }

    #[test]
    fn hermite_three_term_against_series() {
        for n in 1..30 {
            for &x in &[-10.0, -4.1, 0.2, 3.3, 10.0] {
                let lhs = hermite(n + 1, x);
                let rhs = 2.0 * x * hermite(n, x) - 2.0 * n as f64 * hermite(n - 1, x);
                assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
                if n + 1 <= 20 {
                    let s = hermite_series(n + 1, x);
                    assert!((lhs - s).abs() <= 1e-10 * s.abs().max(1.0), "n={} x={x}", n + 1);
                }
            }
        }
    }
}
