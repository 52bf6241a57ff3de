//! Correlation kernels, determinantal correlation functions and kernel identities.
//!
//! Every kernel is evaluated with respect to its own background measure
//! (see [`Measure`]); [`KernelSpec::background_density`] converts to Lebesgue.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{self, GaussRule, SpecError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("point outside the kernel domain: {0}")]
    Domain(String),
    #[error("invalid kernel parameter: {0}")]
    Parameter(String),
    #[error("non-finite or singular evaluation: {0}")]
    Singular(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootType {
    A,
    B,
    C,
    D,
}

impl RootType {
    pub const ALL: [RootType; 4] = [RootType::A, RootType::B, RootType::C, RootType::D];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    HermiteN { n: usize },
    LaguerreN { n: usize, nu: f64 },
    RootSystem { ty: RootType, n: usize },
    Sinc,
    Airy,
    Bessel { nu: f64 },
    GinibreA,
    GinibreC,
    GinibreD,
    GinibreType { q: usize },
    Euclidean { d: usize },
    Heisenberg { d: usize },
    DiscreteHermite { r: f64 },
    DiscreteLaguerre { r: f64, nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Real,
    HalfLine,
    Circle,
    HalfCircle,
    Complex,
    ComplexD(usize),
    RealD(usize),
    Naturals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Measure {
    Lebesgue,
    /// N(0, 1/2): density e^{-x^2}/sqrt(pi)
    Gaussian,
    /// Gamma(nu + 1, 1): density x^nu e^{-x}/Gamma(nu + 1)
    GammaLaw(f64),
    /// dx/(2 pi) on [0, 2 pi)
    UniformCircle,
    /// dx/pi on [0, pi]
    UniformHalfCircle,
    /// pi^{-d} e^{-|x|^2} on C^d
    ComplexGaussian(usize),
    Counting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelOp {
    Shift(f64),
    Dilate(f64),
    SqrtMap,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Real(f64),
    Complex(C64),
    Vector(Vec<f64>),
    CVector(Vec<C64>),
    Index(u64),
}

impl Point {
    fn finite(&self) -> bool {
        match self {
            Point::Real(x) => x.is_finite(),
            Point::Complex(z) => z.re.is_finite() && z.im.is_finite(),
            Point::Vector(v) => v.iter().all(|x| x.is_finite()),
            Point::CVector(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            Point::Index(_) => true,
        }
    }

    fn map_real(&self, f: impl Fn(f64) -> f64) -> Point {
        match self {
            Point::Real(x) => Point::Real(f(*x)),
            Point::Complex(z) => Point::Complex(C64::new(f(z.re), z.im)),
            other => other.clone(),
        }
    }

    fn scale(&self, c: f64) -> Point {
        match self {
            Point::Real(x) => Point::Real(x * c),
            Point::Complex(z) => Point::Complex(z * c),
            Point::Vector(v) => Point::Vector(v.iter().map(|x| x * c).collect()),
            Point::CVector(v) => Point::CVector(v.iter().map(|z| z * c).collect()),
            Point::Index(i) => Point::Index(*i),
        }
    }
}

/// A finite point configuration, kept sorted when the domain is ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration {
    pub positions: Vec<Point>,
}

impl PointConfiguration {
    pub fn from_reals(mut xs: Vec<f64>) -> Self {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        PointConfiguration { positions: xs.into_iter().map(Point::Real).collect() }
    }

    pub fn from_complex(zs: Vec<C64>) -> Self {
        PointConfiguration { positions: zs.into_iter().map(Point::Complex).collect() }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn reals(&self) -> Vec<f64> {
        self.positions
            .iter()
            .filter_map(|p| if let Point::Real(x) = p { Some(*x) } else { None })
            .collect()
    }

    pub fn complexes(&self) -> Vec<C64> {
        self.positions
            .iter()
            .filter_map(|p| if let Point::Complex(z) = p { Some(*z) } else { None })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: Family,
    pub ops: Vec<KernelOp>,
}

impl KernelSpec {
    pub fn new(family: Family) -> Result<Self, KernelError> {
        validate(&family)?;
        Ok(KernelSpec { family, ops: Vec::new() })
    }

    pub fn base_domain(&self) -> Domain {
        match &self.family {
            Family::HermiteN { .. } | Family::Sinc | Family::Airy => Domain::Real,
            Family::LaguerreN { .. } | Family::Bessel { .. } => Domain::HalfLine,
            Family::RootSystem { ty: RootType::A, .. } => Domain::Circle,
            Family::RootSystem { .. } => Domain::HalfCircle,
            Family::GinibreA | Family::GinibreC | Family::GinibreD | Family::GinibreType { .. } => Domain::Complex,
            Family::Euclidean { d } => Domain::RealD(*d),
            Family::Heisenberg { d } => Domain::ComplexD(*d),
            Family::DiscreteHermite { .. } | Family::DiscreteLaguerre { .. } => Domain::Naturals,
        }
    }

    pub fn domain(&self) -> Domain {
        self.base_domain()
    }

    pub fn measure(&self) -> Measure {
        match &self.family {
            Family::HermiteN { .. } => Measure::Gaussian,
            Family::LaguerreN { nu, .. } => Measure::GammaLaw(*nu),
            Family::RootSystem { ty: RootType::A, .. } => Measure::UniformCircle,
            Family::RootSystem { .. } => Measure::UniformHalfCircle,
            Family::GinibreA | Family::GinibreC | Family::GinibreD | Family::GinibreType { .. } => {
                Measure::ComplexGaussian(1)
            }
            Family::Heisenberg { d } => Measure::ComplexGaussian(*d),
            Family::Sinc | Family::Airy | Family::Bessel { .. } | Family::Euclidean { .. } => Measure::Lebesgue,
            Family::DiscreteHermite { .. } | Family::DiscreteLaguerre { .. } => Measure::Counting,
        }
    }

    /// Map a point of the transformed kernel back to the base kernel's argument.
    fn pull_back(&self, p: &Point) -> Point {
        let mut q = p.clone();
        for op in self.ops.iter().rev() {
            q = match op {
                KernelOp::Shift(u) => q.map_real(|x| x + u),
                KernelOp::Dilate(c) => q.scale(1.0 / c),
                KernelOp::SqrtMap => q.map_real(|x| x * x),
            };
        }
        q
    }

    /// Density of the (transformed) background measure with respect to Lebesgue measure.
    pub fn background_density(&self, p: &Point) -> f64 {
        // walk the ops from the outside in, accumulating the Jacobian
        let mut q = p.clone();
        let mut jac = 1.0;
        for op in self.ops.iter().rev() {
            match op {
                KernelOp::Shift(u) => q = q.map_real(|x| x + u),
                KernelOp::Dilate(c) => {
                    let dim = match &q {
                        Point::Complex(_) => 2,
                        Point::Vector(v) => v.len(),
                        Point::CVector(v) => 2 * v.len(),
                        _ => 1,
                    };
                    jac /= c.abs().powi(dim as i32);
                    q = q.scale(1.0 / c);
                }
                KernelOp::SqrtMap => {
                    if let Point::Real(x) = q {
                        jac *= 2.0 * x.abs();
                        q = Point::Real(x * x);
                    }
                }
            }
        }
        jac * base_background(self.measure(), &q)
    }
}

fn base_background(m: Measure, p: &Point) -> f64 {
    match (m, p) {
        (Measure::Lebesgue, _) | (Measure::Counting, _) => 1.0,
        (Measure::Gaussian, Point::Real(x)) => (-x * x).exp() / PI.sqrt(),
        (Measure::GammaLaw(nu), Point::Real(x)) => {
            if *x <= 0.0 {
                0.0
            } else {
                (nu * x.ln() - x - specfun::ln_gamma(nu + 1.0)).exp()
            }
        }
        (Measure::UniformCircle, _) => 1.0 / (2.0 * PI),
        (Measure::UniformHalfCircle, _) => 1.0 / PI,
        (Measure::ComplexGaussian(_), Point::Complex(z)) => (-z.norm_sqr()).exp() / PI,
        (Measure::ComplexGaussian(d), Point::CVector(v)) => {
            (-v.iter().map(|z| z.norm_sqr()).sum::<f64>()).exp() / PI.powi(d as i32)
        }
        _ => f64::NAN,
    }
}

fn validate(f: &Family) -> Result<(), KernelError> {
    let bad = |s: String| Err(KernelError::Parameter(s));
    match f {
        Family::HermiteN { n } | Family::RootSystem { n, .. } if *n == 0 => bad("N must be >= 1".into()),
        Family::LaguerreN { n, .. } if *n == 0 => bad("N must be >= 1".into()),
        Family::LaguerreN { nu, .. } | Family::Bessel { nu } if !(*nu > -1.0) => bad(format!("nu = {nu} must exceed -1")),
        Family::Euclidean { d } | Family::Heisenberg { d } if *d == 0 => bad("dimension must be >= 1".into()),
        Family::DiscreteLaguerre { r, nu } => {
            if !(*r > 0.0) {
                bad(format!("DiscreteLaguerre needs r > 0, got {r}"))
            } else if !(*nu > -1.0) {
                bad(format!("nu = {nu} must exceed -1"))
            } else {
                Ok(())
            }
        }
        Family::DiscreteHermite { r } if !r.is_finite() => bad("r must be finite".into()),
        _ => Ok(()),
    }
}

/// Apply a basic operation (shift, dilation, square-root map) to a kernel.
pub fn transform_kernel(spec: &KernelSpec, op: KernelOp) -> Result<KernelSpec, KernelError> {
    let dom = spec.domain();
    match op {
        KernelOp::SqrtMap if dom != Domain::HalfLine => {
            return Err(KernelError::Domain("square-root map needs a kernel on [0, inf)".into()));
        }
        KernelOp::Shift(_) if !matches!(dom, Domain::Real | Domain::Complex | Domain::Circle) => {
            return Err(KernelError::Domain(format!("shift is not defined on {dom:?}")));
        }
        KernelOp::Dilate(c) if !(c > 0.0) || matches!(dom, Domain::Naturals | Domain::Circle | Domain::HalfCircle) => {
            return Err(KernelError::Domain(format!("dilation by {c} not defined on {dom:?}")));
        }
        KernelOp::Shift(u) if !u.is_finite() => return Err(KernelError::Parameter("shift must be finite".into())),
        _ => {}
    }
    let mut out = spec.clone();
    out.ops.push(op);
    Ok(out)
}

fn real_of(p: &Point, dom: Domain) -> Result<f64, KernelError> {
    match (p, dom) {
        (Point::Real(x), Domain::Real) => Ok(*x),
        (Point::Real(x), Domain::HalfLine) if *x >= 0.0 => Ok(*x),
        (Point::Real(x), Domain::Circle) => Ok(*x),
        (Point::Real(x), Domain::HalfCircle) if *x >= -1e-12 && *x <= PI + 1e-12 => Ok(*x),
        _ => Err(KernelError::Domain(format!("{p:?} not in {dom:?}"))),
    }
}

fn complex_of(p: &Point) -> Result<C64, KernelError> {
    match p {
        Point::Complex(z) => Ok(*z),
        Point::Real(x) => Ok(C64::new(*x, 0.0)),
        Point::CVector(v) if v.len() == 1 => Ok(v[0]),
        _ => Err(KernelError::Domain(format!("{p:?} is not a complex point"))),
    }
}

/// Evaluate `K(x, x')` with respect to the kernel's background measure.
pub fn eval_kernel(spec: &KernelSpec, x: &Point, y: &Point) -> Result<C64, KernelError> {
    if !x.finite() || !y.finite() {
        return Err(KernelError::Domain("non-finite coordinate".into()));
    }
    let (x, y) = (spec.pull_back(x), spec.pull_back(y));
    let dom = spec.base_domain();
    let re = |v: f64| Ok(C64::new(v, 0.0));
    match &spec.family {
        Family::HermiteN { n } => re(hermite_kernel(*n, real_of(&x, dom)?, real_of(&y, dom)?)),
        Family::LaguerreN { n, nu } => re(laguerre_kernel(*n, *nu, real_of(&x, dom)?, real_of(&y, dom)?)),
        Family::RootSystem { ty, n } => re(root_kernel(*ty, *n, real_of(&x, dom)?, real_of(&y, dom)?)),
        Family::Sinc => re(sinc_kernel(real_of(&x, dom)?, real_of(&y, dom)?)),
        Family::Airy => re(airy_kernel(real_of(&x, dom)?, real_of(&y, dom)?)),
        Family::Bessel { nu } => re(bessel_kernel(*nu, real_of(&x, dom)?, real_of(&y, dom)?)),
        Family::GinibreA => Ok((complex_of(&x)? * complex_of(&y)?.conj()).exp()),
        Family::GinibreC => Ok((complex_of(&x)? * complex_of(&y)?.conj()).sinh()),
        Family::GinibreD => Ok((complex_of(&x)? * complex_of(&y)?.conj()).cosh()),
        Family::GinibreType { q } => {
            let (a, b) = (complex_of(&x)?, complex_of(&y)?);
            let l = specfun::laguerre_unchecked(*q, 0.0, (a - b).norm_sqr());
            Ok((a * b.conj()).exp() * l)
        }
        Family::Euclidean { d } => {
            let (a, b) = (vector_of(&x, *d)?, vector_of(&y, *d)?);
            let r = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            re(euclidean_kernel(*d, r))
        }
        Family::Heisenberg { d } => {
            let (a, b) = (cvector_of(&x, *d)?, cvector_of(&y, *d)?);
            let s: C64 = a.iter().zip(&b).map(|(p, q)| p * q.conj()).sum();
            Ok(s.exp())
        }
        Family::DiscreteHermite { r } => re(discrete_hermite(*r, index_of(&x)?, index_of(&y)?)),
        Family::DiscreteLaguerre { r, nu } => re(discrete_laguerre(*r, *nu, index_of(&x)?, index_of(&y)?)),
    }
}

fn vector_of(p: &Point, d: usize) -> Result<Vec<f64>, KernelError> {
    match p {
        Point::Vector(v) if v.len() == d => Ok(v.clone()),
        Point::Real(x) if d == 1 => Ok(vec![*x]),
        _ => Err(KernelError::Domain(format!("{p:?} is not a point of R^{d}"))),
    }
}

fn cvector_of(p: &Point, d: usize) -> Result<Vec<C64>, KernelError> {
    match p {
        Point::CVector(v) if v.len() == d => Ok(v.clone()),
        Point::Complex(z) if d == 1 => Ok(vec![*z]),
        _ => Err(KernelError::Domain(format!("{p:?} is not a point of C^{d}"))),
    }
}

fn index_of(p: &Point) -> Result<usize, KernelError> {
    match p {
        Point::Index(i) => Ok(*i as usize),
        _ => Err(KernelError::Domain(format!("{p:?} is not a nonnegative integer"))),
    }
}

/// `rho(x) = K(x, x)` relative to the background measure.
pub fn density(spec: &KernelSpec, x: &Point) -> Result<f64, KernelError> {
    let v = eval_kernel(spec, x, x)?;
    if !v.re.is_finite() {
        return Err(KernelError::Singular(format!("density at {x:?}")));
    }
    Ok(v.re.max(0.0))
}

/// Density with respect to Lebesgue (or counting) measure.
pub fn lebesgue_density(spec: &KernelSpec, x: &Point) -> Result<f64, KernelError> {
    Ok(density(spec, x)? * spec.background_density(x))
}

/// `int rho(x) dx` for the finite-N families, which should equal N.
///
/// Computed by brute quadrature of the diagonal, so it does not lean on the
/// orthonormality used to build the kernel.
pub fn projection_trace(spec: &KernelSpec) -> Result<f64, KernelError> {
    if !spec.ops.is_empty() {
        return Err(KernelError::Parameter("projection_trace takes an untransformed kernel".into()));
    }
    let rho = |x: f64| lebesgue_density(spec, &Point::Real(x));
    let sum = |rule: GaussRule, g: &dyn Fn(f64) -> Result<f64, KernelError>| -> Result<f64, KernelError> {
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * g(*x)?;
        }
        Ok(acc)
    };
    match spec.family {
        Family::HermiteN { n } => {
            let l = (2.0 * n as f64).sqrt() + 12.0;
            sum(specfun::composite_legendre(24, -l, l, 4 * l.ceil() as usize), &rho)
        }
        Family::LaguerreN { n, nu } => {
            // x = u^2 tames the x^nu endpoint behaviour
            let u_max = (4.0 * n as f64 + 2.0 * nu.abs() + 80.0).sqrt();
            let g = |u: f64| Ok(rho(u * u)? * 2.0 * u);
            sum(specfun::composite_legendre(24, 0.0, u_max, 4 * u_max.ceil() as usize), &g)
        }
        Family::RootSystem { ty, n } => {
            let len = if ty == RootType::A { 2.0 * PI } else { PI };
            sum(specfun::composite_legendre(24, 0.0, len, 8 + 2 * n), &rho)
        }
        _ => Err(KernelError::Parameter("projection_trace needs a finite-N family".into())),
    }
}

/// `det[K(x_j, x_k)]` for up to 12 points.
pub fn correlation_det(spec: &KernelSpec, pts: &PointConfiguration) -> Result<f64, KernelError> {
    let n = pts.len();
    if n == 0 || n > 12 {
        return Err(KernelError::Parameter(format!("correlation_det needs 1..=12 points, got {n}")));
    }
    let mut m = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let v = eval_kernel(spec, &pts.positions[j], &pts.positions[k])?;
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(KernelError::Singular(format!("entry ({j}, {k})")));
            }
            m[(j, k)] = v;
        }
    }
    let scale: f64 = (0..n).map(|j| m[(j, j)].norm().max(1e-300)).product();
    let d = m.determinant();
    if d.im.abs() > 1e-10 * scale.max(1.0) {
        return Err(KernelError::Singular(format!("determinant has imaginary part {}", d.im)));
    }
    Ok(d.re)
}

// ---------------------------------------------------------------------------
// finite kernels

/// Hermite kernel in Christoffel–Darboux form, relative to N(0, 1/2).
pub fn hermite_kernel(n: usize, x: f64, y: f64) -> f64 {
    let nf = n as f64;
    let px = specfun::hermite_phi_all(n + 1, x);
    if (x - y).abs() < 1e-8 {
        let prev2 = if n >= 2 { px[n - 2] } else { 0.0 };
        // phi_n' = sqrt(2n) phi_{n-1}
        return (nf / 2.0).sqrt() * ((2.0 * nf).sqrt() * px[n - 1] * px[n - 1] - (2.0 * (nf - 1.0)).sqrt() * px[n] * prev2);
    }
    let py = specfun::hermite_phi_all(n + 1, y);
    (nf / 2.0).sqrt() * (px[n] * py[n - 1] - py[n] * px[n - 1]) / (x - y)
}

/// `sum_{k<n} phi_k(x) phi_k(y)` evaluated term by term.
pub fn hermite_kernel_sum(n: usize, x: f64, y: f64) -> f64 {
    let px = specfun::hermite_phi_all(n, x);
    let py = specfun::hermite_phi_all(n, y);
    px.iter().zip(&py).map(|(a, b)| a * b).sum()
}

/// Laguerre kernel in Christoffel–Darboux form, relative to Gamma(nu + 1, 1).
pub fn laguerre_kernel(n: usize, nu: f64, x: f64, y: f64) -> f64 {
    let nf = n as f64;
    let c = -(nf * (nf + nu)).sqrt();
    if (x - y).abs() < 1e-8 {
        let (p, d) = specfun::laguerre_phi_all_deriv(n + 1, nu, x);
        return c * (d[n] * p[n - 1] - p[n] * d[n - 1]);
    }
    let px = specfun::laguerre_phi_all(n + 1, nu, x);
    let py = specfun::laguerre_phi_all(n + 1, nu, y);
    c * (px[n] * py[n - 1] - py[n] * px[n - 1]) / (x - y)
}

pub fn laguerre_kernel_sum(n: usize, nu: f64, x: f64, y: f64) -> f64 {
    let px = specfun::laguerre_phi_all(n, nu, x);
    let py = specfun::laguerre_phi_all(n, nu, y);
    px.iter().zip(&py).map(|(a, b)| a * b).sum()
}

/// `sin(m u / 2) / sin(u / 2)`, switching to the cosine sum near the poles.
fn dirichlet(m: usize, u: f64) -> f64 {
    let s = (0.5 * u).sin();
    if s.abs() > 1e-3 {
        return (0.5 * m as f64 * u).sin() / s;
    }
    (1..=m).map(|k| ((m as f64 + 1.0 - 2.0 * k as f64) * 0.5 * u).cos()).sum()
}

/// Root-system kernels of types A, B, C, D.
pub fn root_kernel(ty: RootType, n: usize, x: f64, y: f64) -> f64 {
    let (um, up) = (x - y, x + y);
    match ty {
        RootType::A => dirichlet(n, um),
        RootType::B => 0.5 * (dirichlet(2 * n, um) - dirichlet(2 * n, up)),
        RootType::C => 0.5 * (dirichlet(2 * n + 1, um) - dirichlet(2 * n + 1, up)),
        RootType::D => 0.5 * (dirichlet(2 * n - 1, um) + dirichlet(2 * n - 1, up)),
    }
}

/// Orthonormal root-system functions `phi_1, ..., phi_N` at x.
pub fn root_functions(ty: RootType, n: usize, x: f64) -> Vec<C64> {
    let big = match ty {
        RootType::A => n as f64,
        RootType::B => 2.0 * n as f64 - 1.0,
        RootType::C => 2.0 * (n as f64 + 1.0),
        RootType::D => 2.0 * (n as f64 - 1.0),
    };
    (1..=n)
        .map(|j| {
            let jr = match ty {
                RootType::A => j as f64 - 0.5,
                RootType::B | RootType::D => j as f64 - 1.0,
                RootType::C => j as f64,
            };
            let f = 0.5 * (big - 2.0 * jr);
            match ty {
                RootType::A => C64::new(0.0, -f * x).exp(),
                RootType::B | RootType::C => C64::new(2f64.sqrt() * (f * x).sin(), 0.0),
                RootType::D => {
                    let c = if f == 0.0 { 1.0 } else { 2f64.sqrt() };
                    C64::new(c * (f * x).cos(), 0.0)
                }
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// infinite kernels

pub fn sinc_kernel(x: f64, y: f64) -> f64 {
    let u = x - y;
    if u.abs() < 1e-4 {
        (1.0 - u * u / 6.0 + u.powi(4) / 120.0) / PI
    } else {
        u.sin() / (PI * u)
    }
}

pub fn airy_kernel(x: f64, y: f64) -> f64 {
    let (ax, apx) = specfun::airy_pair(x);
    if (x - y).abs() < 1e-8 {
        return apx * apx - x * ax * ax;
    }
    let (ay, apy) = specfun::airy_pair(y);
    (ax * apy - ay * apx) / (x - y)
}

/// Bessel kernel in the square-root variable, on [0, inf) with Lebesgue measure.
pub fn bessel_kernel(nu: f64, x: f64, y: f64) -> f64 {
    let x = x.max(1e-12);
    let y = y.max(1e-12);
    let (jx, dx) = specfun::bessel_j_and_deriv(nu, x);
    if (x - y).abs() < 1e-8 {
        let jp = specfun::bessel_j_unchecked(nu + 1.0, x);
        let jm = 2.0 * nu / x * jx - jp;
        return 0.5 * x * (jx * jx - jm * jp);
    }
    let (jy, dy) = specfun::bessel_j_and_deriv(nu, y);
    (x * y).sqrt() / (x * x - y * y) * (jx * y * dy - x * dx * jy)
}

/// Euclidean kernel `J_{d/2}(r) / ((2 pi)^{d/2} r^{d/2})` as a function of `r = |x - x'|`.
pub fn euclidean_kernel(d: usize, r: f64) -> f64 {
    let h = 0.5 * d as f64;
    let pref = (2.0 * PI).powf(-h);
    if r < 2.0 {
        // J_h(r) / r^h = sum_k (-1)^k (r/2)^{2k} / (2^h k! Gamma(k + h + 1))
        let mut term = 1.0 / (2f64.powf(h) * specfun::gamma(h + 1.0));
        let mut sum = term;
        for k in 1..60 {
            let kf = k as f64;
            term *= -0.25 * r * r / (kf * (kf + h));
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        pref * sum
    } else {
        pref * specfun::bessel_j_unchecked(h, r) / r.powf(h)
    }
}

/// Closed-form densities of the Euclidean family: `1 / (2^d pi^{d/2} Gamma(d/2 + 1))`.
pub fn euclidean_density(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    1.0 / (2f64.powi(d as i32) * PI.powf(h) * specfun::gamma(h + 1.0))
}

// ---------------------------------------------------------------------------
// discrete kernels

/// `int_r^inf phi_n phi_m dN(0, 1/2)`; off-diagonal by the closed form,
/// diagonal by the recursion `A_n = A_{n-1} + e^{-r^2} phi_n phi_{n-1} / sqrt(2 pi n)`.
pub fn discrete_hermite(r: f64, n: usize, m: usize) -> f64 {
    let top = n.max(m) + 2;
    let p = specfun::hermite_phi_all(top, r);
    let e = (-r * r).exp() / PI.sqrt();
    if n == m {
        let mut a = 0.5 * libm::erfc(r);
        for k in 1..=n {
            a += e * p[k] * p[k - 1] / (2.0 * k as f64).sqrt();
        }
        return a;
    }
    let (nf, mf) = (n as f64, m as f64);
    -e * ((0.5 * (nf + 1.0)).sqrt() * p[n + 1] * p[m] - (0.5 * (mf + 1.0)).sqrt() * p[n] * p[m + 1]) / (nf - mf)
}

fn laguerre_rule() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| specfun::gauss_laguerre(200, 0.0))
}

/// `int_r^inf phi_n^{(nu)} phi_m^{(nu)} dGamma(nu + 1, 1)` by shifted Gauss–Laguerre quadrature.
pub fn discrete_laguerre_quadrature(r: f64, nu: f64, n: usize, m: usize) -> f64 {
    let rule = laguerre_rule();
    let lg = specfun::ln_gamma(nu + 1.0);
    let mut s = 0.0;
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        let x = r + u;
        let p = specfun::laguerre_phi_all(n.max(m) + 1, nu, x);
        s += w * p[n] * p[m] * (nu * x.ln() - r - lg).exp();
    }
    s
}

/// Discrete Laguerre kernel; closed form off the diagonal, quadrature on it.
pub fn discrete_laguerre(r: f64, nu: f64, n: usize, m: usize) -> f64 {
    if n == m {
        return discrete_laguerre_quadrature(r, nu, n, m);
    }
    let lag = |k: isize, a: f64| if k < 0 { 0.0 } else { specfun::laguerre_unchecked(k as usize, a, r) };
    let (ni, mi) = (n as isize, m as isize);
    let lg = |k: usize| specfun::ln_gamma(k as f64 + 1.0) - specfun::ln_gamma(k as f64 + nu + 1.0);
    let pref = (0.5 * (lg(n) + lg(m)) + (nu + 1.0) * r.ln() - r).exp();
    -pref * (lag(ni - 1, nu + 1.0) * lag(mi, nu) - lag(ni, nu) * lag(mi - 1, nu + 1.0)) / (n as f64 - m as f64)
}

// ---------------------------------------------------------------------------
// Weyl identities

fn root_big(ty: RootType, n: usize) -> f64 {
    match ty {
        RootType::A => n as f64,
        RootType::B => 2.0 * n as f64 - 1.0,
        RootType::C => 2.0 * (n as f64 + 1.0),
        RootType::D => 2.0 * (n as f64 - 1.0),
    }
}

fn root_j(ty: RootType, j: usize) -> f64 {
    match ty {
        RootType::A => j as f64 - 0.5,
        RootType::B | RootType::D => j as f64 - 1.0,
        RootType::C => j as f64,
    }
}

/// Relative residual of the trigonometric Weyl identity of the given type.
pub fn weyl_identity_residual(ty: RootType, zeta: &[C64]) -> Result<f64, KernelError> {
    let n = zeta.len();
    if !(1..=8).contains(&n) {
        return Err(KernelError::Parameter(format!("Weyl identities need 1 <= N <= 8, got {n}")));
    }
    let big = root_big(ty, n);
    let i = C64::new(0.0, 1.0);
    let m = DMatrix::<C64>::from_fn(n, n, |j, k| {
        let a = big - 2.0 * root_j(ty, j + 1);
        let z = zeta[k];
        match ty {
            RootType::A => (-i * a * z).exp(),
            RootType::B | RootType::C => (z * a).sin(),
            RootType::D => (z * a).cos(),
        }
    });
    let lhs = m.determinant();
    let mut pairs = C64::new(1.0, 0.0);
    for j in 0..n {
        for k in j + 1..n {
            pairs *= (zeta[k] - zeta[j]).sin();
            if ty != RootType::A {
                pairs *= (zeta[k] + zeta[j]).sin();
            }
        }
    }
    let nn = n as i32;
    let rhs = match ty {
        RootType::A => (2.0 * i).powi(nn * (nn - 1) / 2) * pairs,
        RootType::B => zeta.iter().map(|z| z.sin()).product::<C64>() * pairs * 2f64.powi(nn * (nn - 1)),
        RootType::C => zeta.iter().map(|z| (z * 2.0).sin()).product::<C64>() * pairs * 2f64.powi(nn * (nn - 1)),
        RootType::D => pairs * 2f64.powi((nn - 1) * (nn - 1)),
    };
    Ok((lhs - rhs).norm() / (1.0 + rhs.norm()))
}

/// Relative residual of the algebraic Weyl denominator formula of the given type.
pub fn weyl_denominator_residual(ty: RootType, z: &[C64]) -> Result<f64, KernelError> {
    let n = z.len();
    if !(1..=8).contains(&n) {
        return Err(KernelError::Parameter(format!("Weyl identities need 1 <= N <= 8, got {n}")));
    }
    let ni = n as i32;
    let m = DMatrix::<C64>::from_fn(n, n, |j, k| {
        let j1 = j as i32 + 1;
        let zk = z[k];
        match ty {
            RootType::A => zk.powi(j1 - 1),
            RootType::B => zk.powi(j1 - ni) - zk.powi(ni + 1 - j1),
            RootType::C => zk.powi(j1 - ni - 1) - zk.powi(ni + 1 - j1),
            RootType::D => zk.powi(j1 - ni) + zk.powi(ni - j1),
        }
    });
    let lhs = m.determinant();
    let one = C64::new(1.0, 0.0);
    let mut pairs = one;
    for j in 0..n {
        for k in j + 1..n {
            pairs *= z[k] - z[j];
            if ty != RootType::A {
                pairs *= one - z[j] * z[k];
            }
        }
    }
    let rhs = match ty {
        RootType::A => pairs,
        RootType::B => z.iter().map(|w| w.powi(1 - ni) * (one - w)).product::<C64>() * pairs,
        RootType::C => z.iter().map(|w| w.powi(-ni) * (one - w * w)).product::<C64>() * pairs,
        RootType::D => z.iter().map(|w| w.powi(1 - ni)).product::<C64>() * pairs * 2.0,
    };
    Ok((lhs - rhs).norm() / (1.0 + rhs.norm()))
}

// ---------------------------------------------------------------------------
// scaling limits

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScalingMode {
    Bulk,
    SoftEdge,
    HardEdge(f64),
    CircularBulk(RootType),
}

/// The finite kernel after the scaling of `mode`, expressed against Lebesgue measure.
pub fn scaled_kernel(mode: ScalingMode, n: usize, x: f64, y: f64) -> f64 {
    let nf = n as f64;
    match mode {
        ScalingMode::Bulk => {
            let c = (2.0 * nf).sqrt();
            lebesgue_hermite(n, x / c, y / c) / c
        }
        ScalingMode::SoftEdge => {
            let s = 2f64.sqrt() * nf.powf(1.0 / 6.0);
            let c = (2.0 * nf).sqrt();
            lebesgue_hermite(n, c + x / s, c + y / s) / s
        }
        ScalingMode::HardEdge(nu) => {
            let c = 4.0 * nf;
            let (u, v) = (x * x / c, y * y / c);
            2.0 * (x * y).sqrt() / c * lebesgue_laguerre(n, nu, u, v)
        }
        ScalingMode::CircularBulk(RootType::A) => {
            let c = nf / 2.0;
            root_kernel(RootType::A, n, x / c, y / c) / (2.0 * PI * c)
        }
        ScalingMode::CircularBulk(ty) => root_kernel(ty, n, x / nf, y / nf) / (PI * nf),
    }
}

/// The limit kernel of `mode`.
pub fn limit_kernel(mode: ScalingMode, x: f64, y: f64) -> f64 {
    match mode {
        ScalingMode::Bulk | ScalingMode::CircularBulk(RootType::A) => sinc_kernel(x, y),
        ScalingMode::SoftEdge => airy_kernel(x, y),
        ScalingMode::HardEdge(nu) => bessel_kernel(nu, x, y),
        ScalingMode::CircularBulk(RootType::B) | ScalingMode::CircularBulk(RootType::C) => bessel_kernel(0.5, x, y),
        ScalingMode::CircularBulk(RootType::D) => bessel_kernel(-0.5, x, y),
    }
}

fn lebesgue_hermite(n: usize, x: f64, y: f64) -> f64 {
    let nf = n as f64;
    let fx = specfun::hermite_functions(n + 1, x);
    if (x - y).abs() < 1e-8 {
        return fx[..n].iter().map(|v| v * v).sum();
    }
    let fy = specfun::hermite_functions(n + 1, y);
    (nf / 2.0).sqrt() * (fx[n] * fy[n - 1] - fy[n] * fx[n - 1]) / (x - y)
}

fn lebesgue_laguerre(n: usize, nu: f64, x: f64, y: f64) -> f64 {
    let nf = n as f64;
    let fx = specfun::laguerre_functions(n + 1, nu, x);
    if (x - y).abs() < 1e-8 * (1.0 + x.abs()) {
        return fx[..n].iter().map(|v| v * v).sum();
    }
    let fy = specfun::laguerre_functions(n + 1, nu, y);
    -(nf * (nf + nu)).sqrt() * (fx[n] * fy[n - 1] - fy[n] * fx[n - 1]) / (x - y)
}

/// Sup-norm distance between scaled finite kernel and its limit on an `m x m` grid over `[a, b]^2`.
pub fn scaling_limit_error(mode: ScalingMode, n: usize, a: f64, b: f64, m: usize) -> Result<f64, KernelError> {
    if n < 10 {
        return Err(KernelError::Parameter(format!("scaling limits need N >= 10, got {n}")));
    }
    if m < 2 || !(b > a) {
        return Err(KernelError::Parameter("grid needs m >= 2 and a < b".into()));
    }
    if matches!(mode, ScalingMode::HardEdge(_) | ScalingMode::CircularBulk(RootType::B | RootType::C | RootType::D)) && a < 0.0 {
        return Err(KernelError::Domain("hard-edge limits live on [0, inf)".into()));
    }
    let grid: Vec<f64> = (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect();
    let mut worst: f64 = 0.0;
    for &x in &grid {
        for &y in &grid {
            let e = (scaled_kernel(mode, n, x, y) - limit_kernel(mode, x, y)).abs();
            if !e.is_finite() {
                return Err(KernelError::Singular(format!("scaling error at ({x}, {y})")));
            }
            worst = worst.max(e);
        }
    }
    Ok(worst)
}
