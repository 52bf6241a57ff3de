//! Multiple Loewner flows in the upper half-plane H and the first orthant O,
//! slit tracing by inverse vertical-slit maps, and the log-gas driven martingale observables.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loggas::{self, GasConfig, GasError, GasModel};
use crate::rng::{self, Rng};

pub const SWALLOW_DIST: f64 = 1e-6;
const MIN_STEP: f64 = 1e-16;
const PROBES: [f64; 2] = [1e8, 2e8];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SleError {
    #[error("invalid driving path: {0}")]
    Driving(String),
    #[error("invalid point {0}: {1}")]
    Point(C64, String),
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("hcap fits disagree: {0} vs {1}")]
    FitDisagreement(f64, f64),
    #[error("inverse map left the half-plane at step {0} (self-touching trace?)")]
    Branch(usize),
    #[error("point {0} was swallowed at t = {1}")]
    Swallowed(C64, f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Gas(#[from] GasError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Upper half-plane.
    H,
    /// First orthant.
    O,
}

impl Region {
    pub fn contains(&self, z: C64) -> bool {
        match self {
            Region::H => z.im > 0.0,
            Region::O => z.im > 0.0 && z.re > 0.0,
        }
    }
}

/// N driving functions on a time grid, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingPath {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Coefficient λ_i in `2λ_i/(g − V_i)`; 1 is the time-changed multiple-SLE normalisation.
    pub weights: Vec<Vec<f64>>,
}

impl DrivingPath {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, SleError> {
        let weights = values.iter().map(|v| vec![1.0; v.len()]).collect();
        Self::with_weights(times, values, weights)
    }

    pub fn with_weights(times: Vec<f64>, values: Vec<Vec<f64>>, weights: Vec<Vec<f64>>) -> Result<Self, SleError> {
        let bad = |m: &str| Err(SleError::Driving(m.into()));
        if times.len() < 2 || times.len() != values.len() || weights.len() != values.len() {
            return bad("need at least two times and matching values/weights");
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("times must start at 0 and increase strictly");
        }
        let n = values[0].len();
        if n == 0 {
            return bad("need at least one driving function");
        }
        for (v, w) in values.iter().zip(&weights) {
            if v.len() != n || w.len() != n {
                return bad("ragged values or weights");
            }
            if v.iter().chain(w).any(|x| !x.is_finite()) || w.iter().any(|&x| x < 0.0) {
                return bad("values must be finite and weights nonnegative");
            }
        }
        Ok(DrivingPath { times, values, weights })
    }

    /// Evaluate `f` on a uniform grid of `steps` intervals over `[0, t_end]`.
    pub fn from_fn(t_end: f64, steps: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self, SleError> {
        if !(t_end > 0.0) || steps == 0 {
            return Err(SleError::Driving("need T > 0 and steps >= 1".into()));
        }
        let times: Vec<f64> = (0..=steps).map(|k| t_end * k as f64 / steps as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn n(&self) -> usize {
        self.values[0].len()
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Linear interpolation inside interval k.
    fn at(&self, k: usize, t: f64, out_v: &mut [f64], out_w: &mut [f64]) {
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        for i in 0..out_v.len() {
            out_v[i] = self.values[k][i] + s * (self.values[k + 1][i] - self.values[k][i]);
            out_w[i] = self.weights[k][i] + s * (self.weights[k + 1][i] - self.weights[k][i]);
        }
    }

    /// Restrict to `[0, t_end]`, splitting the last interval if needed.
    pub fn truncate(&self, t_end: f64) -> Result<Self, SleError> {
        if !(t_end > 0.0) || t_end > self.end() + 1e-12 {
            return Err(SleError::Driving(format!("T = {t_end} outside the driving grid")));
        }
        let k = self.times.partition_point(|&t| t < t_end);
        let mut times = self.times[..k].to_vec();
        let mut values = self.values[..k].to_vec();
        let mut weights = self.weights[..k].to_vec();
        let n = self.n();
        let (mut v, mut w) = (vec![0.0; n], vec![0.0; n]);
        self.at(k.saturating_sub(1).min(self.times.len() - 2), t_end, &mut v, &mut w);
        times.push(t_end);
        values.push(v);
        weights.push(w);
        Self::with_weights(times, values, weights)
    }
}

/// Vector field of the Loewner flow evaluated at g, with driving values `v` and weights `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Field {
    H,
    O { delta: f64 },
    /// H-flow of z² that transports to the O-flow: V = X² − c, λ = 4X²·w, c = 8(Σw + δ)t.
    Transport { delta: f64 },
}

impl Field {
    fn eval(&self, t: f64, g: C64, v: &[f64], w: &[f64]) -> (C64, C64, f64) {
        let two = C64::new(2.0, 0.0);
        let mut dg = C64::new(0.0, 0.0);
        let mut dl = C64::new(0.0, 0.0);
        let mut dist = f64::INFINITY;
        match *self {
            Field::H => {
                for (x, l) in v.iter().zip(w) {
                    let d = g - x;
                    let inv = two * l / d;
                    dg += inv;
                    dl -= inv / d;
                    dist = dist.min(d.norm());
                }
            }
            Field::O { delta } => {
                for (x, l) in v.iter().zip(w) {
                    let (a, b) = (g - x, g + x);
                    dg += two * l * (a.inv() + b.inv());
                    dl -= two * l * (a.inv() * a.inv() + b.inv() * b.inv());
                    dist = dist.min(a.norm()).min(b.norm());
                }
                if delta != 0.0 {
                    dg += 4.0 * delta / g;
                    dl -= 4.0 * delta / (g * g);
                    dist = dist.min(g.norm());
                }
            }
            Field::Transport { delta } => {
                let c = 8.0 * (w.iter().sum::<f64>() + delta) * t;
                for (x, l) in v.iter().zip(w) {
                    let d = g - (x * x - c);
                    let inv = two * 4.0 * x * x * l / d;
                    dg += inv;
                    dl -= inv / d;
                    dist = dist.min(d.norm() / (2.0 * x.abs()).max(1e-300));
                }
            }
        }
        (dg, dl, dist)
    }

    fn capacity_rate(&self, w: &[f64], v: &[f64]) -> f64 {
        let s: f64 = w.iter().sum();
        match *self {
            Field::H => 2.0 * s,
            Field::O { delta } => 4.0 * s + 4.0 * delta,
            Field::Transport { .. } => 8.0 * v.iter().zip(w).map(|(x, l)| x * x * l).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint {
    pub z: C64,
    pub g: C64,
    /// log g′(z), evolved by its own ODE so the argument is continuous in t.
    pub log_dg: C64,
    pub swallowed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoewnerState {
    pub region: Region,
    pub delta: f64,
    pub time: f64,
    pub points: Vec<TrackedPoint>,
    /// Displacements g(z) − z at the far probe points `i·1e8`, `i·2e8`.
    probes: [C64; 2],
    /// ∫ (capacity rate) dt.
    pub hcap: f64,
    /// Driving values at `time`.
    pub driving: Vec<f64>,
}

impl LoewnerState {
    pub fn new(region: Region, delta: f64, points: &[C64], driving0: &[f64]) -> Result<Self, SleError> {
        for &z in points {
            if !region.contains(z) || !z.re.is_finite() || !z.im.is_finite() {
                return Err(SleError::Point(z, format!("not in {region:?}")));
            }
            let near = driving0.iter().any(|&x| (z - x).norm() <= SWALLOW_DIST || (region == Region::O && (z + x).norm() <= SWALLOW_DIST));
            if near {
                return Err(SleError::Point(z, "too close to a driving point".into()));
            }
        }
        if region == Region::O && driving0.iter().any(|&x| !(x > 0.0)) {
            return Err(SleError::Driving("quadrant driving values must be positive".into()));
        }
        Ok(LoewnerState {
            region,
            delta,
            time: 0.0,
            points: points.iter().map(|&z| TrackedPoint { z, g: z, log_dg: C64::new(0.0, 0.0), swallowed: None }).collect(),
            probes: [C64::new(0.0, 0.0); 2],
            hcap: 0.0,
            driving: driving0.to_vec(),
        })
    }

    pub fn active(&self) -> impl Iterator<Item = &TrackedPoint> {
        self.points.iter().filter(|p| p.swallowed.is_none())
    }
}

/// RK4 over one grid interval with sub-stepping when `|g − X_i| < 10·√h`.
/// Integrates the displacement `g − z` so far probes keep full precision.
fn advance_point(field: Field, path: &DrivingPath, k: usize, z: C64, d: &mut C64, log_dg: &mut C64) -> Result<Option<f64>, SleError> {
    let n = path.n();
    let (t0, t1) = (path.times[k], path.times[k + 1]);
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut t = t0;
    let mut f = |t: f64, g: C64| {
        path.at(k, t, &mut v, &mut w);
        field.eval(t, g, &v, &w)
    };
    while t < t1 {
        let (k1g, k1l, dist) = f(t, z + *d);
        if dist < SWALLOW_DIST {
            return Ok(Some(t));
        }
        let mut h = (t1 - t).min((dist / 10.0).powi(2));
        if t1 - t - h < 1e-14 * t1.max(1.0) {
            h = t1 - t;
        }
        if h < MIN_STEP {
            return Err(SleError::StepUnderflow(t));
        }
        let (k2g, k2l, _) = f(t + 0.5 * h, z + *d + 0.5 * h * k1g);
        let (k3g, k3l, _) = f(t + 0.5 * h, z + *d + 0.5 * h * k2g);
        let (k4g, k4l, _) = f(t + h, z + *d + h * k3g);
        *d += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        *log_dg += h / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
        t = if h == t1 - t { t1 } else { t + h };
    }
    Ok(None)
}

fn advance(state: &mut LoewnerState, field: Field, path: &DrivingPath, k: usize) -> Result<(), SleError> {
    for p in state.points.iter_mut().filter(|p| p.swallowed.is_none()) {
        let mut d = p.g - p.z;
        if let Some(ts) = advance_point(field, path, k, p.z, &mut d, &mut p.log_dg)? {
            p.swallowed = Some(ts);
            continue;
        }
        p.g = p.z + d;
    }
    for (j, &r) in PROBES.iter().enumerate() {
        let mut l = C64::new(0.0, 0.0);
        advance_point(field, path, k, C64::new(0.0, r), &mut state.probes[j], &mut l)?;
    }
    // capacity rate is linear in the interpolation parameter except for the transport field; Simpson is exact for quadratics
    let n = path.n();
    let (mut v, mut w) = (vec![0.0; n], vec![0.0; n]);
    let (t0, t1) = (path.times[k], path.times[k + 1]);
    let mut rate = |t: f64| {
        path.at(k, t, &mut v, &mut w);
        field.capacity_rate(&w, &v)
    };
    state.hcap += (t1 - t0) / 6.0 * (rate(t0) + 4.0 * rate(0.5 * (t0 + t1)) + rate(t1));
    state.time = t1;
    state.driving = path.values[k + 1].clone();
    Ok(())
}

fn run(region: Region, field: Field, path: &DrivingPath, points: &[C64], delta: f64, mut each: impl FnMut(&LoewnerState)) -> Result<LoewnerState, SleError> {
    let mut st = LoewnerState::new(region, delta, points, &path.values[0])?;
    each(&st);
    for k in 0..path.times.len() - 1 {
        advance(&mut st, field, path, k)?;
        each(&st);
    }
    Ok(st)
}

/// Multiple Loewner flow in H over the whole driving grid.
pub fn forward_flow(driving: &DrivingPath, points: &[C64], t_end: f64) -> Result<LoewnerState, SleError> {
    let path = driving.truncate(t_end)?;
    run(Region::H, Field::H, &path, points, 0.0, |_| {})
}

/// Same as `forward_flow`, calling `each` on the state at every grid time.
pub fn forward_flow_with(driving: &DrivingPath, points: &[C64], each: impl FnMut(&LoewnerState)) -> Result<LoewnerState, SleError> {
    run(Region::H, Field::H, driving, points, 0.0, each)
}

/// Multiple Loewner flow in the first orthant with the `4δ/g` term.
pub fn quadrant_flow(driving: &DrivingPath, delta: f64, points: &[C64], t_end: f64) -> Result<LoewnerState, SleError> {
    if !delta.is_finite() {
        return Err(SleError::Parameter("delta must be finite".into()));
    }
    let path = driving.truncate(t_end)?;
    run(Region::O, Field::O { delta }, &path, points, delta, |_| {})
}

pub fn quadrant_flow_with(driving: &DrivingPath, delta: f64, points: &[C64], each: impl FnMut(&LoewnerState)) -> Result<LoewnerState, SleError> {
    run(Region::O, Field::O { delta }, driving, points, delta, each)
}

/// Largest `|ĝ_T(z) − sqrt(g_T(z²) + c(T))|` over `points`, where g is the H-flow
/// driven by `X_i² − c(t)` with weights `4X_i²`, and `c(t) = 8(N + δ)t`.
pub fn quadrant_transport_residual(driving: &DrivingPath, delta: f64, points: &[C64], t_end: f64) -> Result<f64, SleError> {
    let path = driving.truncate(t_end)?;
    let o = run(Region::O, Field::O { delta }, &path, points, delta, |_| {})?;
    let sq: Vec<C64> = points.iter().map(|z| z * z).collect();
    let mut st = LoewnerState::new(Region::H, 0.0, &sq, &[])?;
    for k in 0..path.times.len() - 1 {
        advance(&mut st, Field::Transport { delta }, &path, k)?;
    }
    let c = 8.0 * (path.weights.last().unwrap().iter().sum::<f64>() + delta) * t_end;
    let mut worst: f64 = 0.0;
    for (a, b) in o.points.iter().zip(&st.points) {
        if a.swallowed.is_some() || b.swallowed.is_some() {
            continue;
        }
        let mut r = (b.g + c).sqrt();
        if r.re < 0.0 {
            r = -r;
        }
        worst = worst.max((a.g - r).norm());
    }
    Ok(worst)
}

/// `c_t` from `g(z) − z ≈ c_t/z` at the two far probes.
pub fn hcap_estimate(state: &LoewnerState) -> Result<f64, SleError> {
    let c: Vec<f64> = PROBES.iter().zip(&state.probes).map(|(&r, d)| (C64::new(0.0, r) * d).re).collect();
    if (c[0] - c[1]).abs() > 1e-6 {
        return Err(SleError::FitDisagreement(c[0], c[1]));
    }
    Ok(c[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlitTrace {
    pub times: Vec<f64>,
    /// tips[k][i]: tip of slit i at times[k].
    pub tips: Vec<Vec<C64>>,
}

fn slit_inverse(w: C64, v: f64, s: f64) -> C64 {
    let r = ((w - v) * (w - v) - 4.0 * s).sqrt();
    v + if r.im < 0.0 { -r } else { r }
}

/// Tips `g_t^{-1}(V_i(t) + iε)` with `ε = √dt`, composing inverse vertical-slit maps.
pub fn trace_slit(driving: &DrivingPath, t_end: f64, dt: f64) -> Result<SlitTrace, SleError> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(SleError::Parameter("need T > 0 and dt > 0".into()));
    }
    let path = driving.truncate(t_end)?;
    let steps = (t_end / dt).round().max(1.0) as usize;
    let h = t_end / steps as f64;
    let n = path.n();
    let mut times = Vec::with_capacity(steps + 1);
    let mut drive = Vec::with_capacity(steps + 1);
    let mut weight = Vec::with_capacity(steps + 1);
    let mut k = 0;
    for j in 0..=steps {
        let t = h * j as f64;
        while k + 2 < path.times.len() && path.times[k + 1] < t {
            k += 1;
        }
        let (mut v, mut w) = (vec![0.0; n], vec![0.0; n]);
        path.at(k, t, &mut v, &mut w);
        times.push(t);
        drive.push(v);
        weight.push(w);
    }
    let eps = h.sqrt();
    let mut tips = vec![path.values[0].iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>()];
    for m in 1..=steps {
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            let mut w = C64::new(drive[m][i], eps);
            for j in (1..=m).rev() {
                for l in (0..n).rev() {
                    w = slit_inverse(w, drive[j][l], weight[j][l] * h);
                }
                if !(w.im > 0.0) || !w.re.is_finite() {
                    return Err(SleError::Branch(j));
                }
            }
            row.push(w);
        }
        tips.push(row);
    }
    Ok(SlitTrace { times, tips })
}

/// `κ(α) = 4(1 − 2α)² / (α(1 − α))`
pub fn tilted_kappa(alpha: f64) -> f64 {
    4.0 * (1.0 - 2.0 * alpha).powi(2) / (alpha * (1.0 - alpha))
}

/// Driving `±sqrt(κ(α) t)` of the straight slit at angle απ.
pub fn tilted_driving(alpha: f64, t_end: f64, steps: usize) -> Result<DrivingPath, SleError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SleError::Parameter("alpha must lie in (0, 1)".into()));
    }
    let k = tilted_kappa(alpha);
    let sign = if alpha <= 0.5 { 1.0 } else { -1.0 };
    DrivingPath::from_fn(t_end, steps, |t| vec![sign * (k * t).sqrt()])
}

/// `M_D(z, t)` for the tracked point; `x` are the driving values at the same time.
pub fn martingale_observable(state: &LoewnerState, p: &TrackedPoint, kappa: f64) -> Result<C64, SleError> {
    if let Some(ts) = p.swallowed {
        return Err(SleError::Swallowed(p.z, ts));
    }
    let q = 1.0 - kappa / 4.0;
    let g = p.g;
    let x = &state.driving;
    Ok(match state.region {
        Region::H => -x.iter().map(|&xi| (g - xi).ln()).sum::<C64>() - q * p.log_dg,
        Region::O => -x.iter().map(|&xi| (g - xi).ln() + (g + xi).ln()).sum::<C64>() - q * g.ln() - q * p.log_dg,
    })
}

/// Green's function increment rate: `dG_t(z, w)/dt`.
pub fn green_rate(state: &LoewnerState, a: &TrackedPoint, b: &TrackedPoint) -> f64 {
    let x = &state.driving;
    match state.region {
        Region::H => -x.iter().map(|&xi| (2.0 / (a.g - xi)).im * (2.0 / (b.g - xi)).im).sum::<f64>(),
        Region::O => -x
            .iter()
            .map(|&xi| (2.0 / (a.g - xi) - 2.0 / (a.g + xi)).im * (2.0 / (b.g - xi) - 2.0 / (b.g + xi)).im)
            .sum::<f64>(),
    }
}

// ---------------------------------------------------------------------------
// gas-driven flows

/// The driving gas: (8/κ)-Dyson on R for H, (8/κ, ν)-Bru–Wishart singular values for O.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SleGas {
    pub region: Region,
    pub kappa: f64,
    pub nu: f64,
    pub initial: Vec<f64>,
}

impl SleGas {
    pub fn new(region: Region, kappa: f64, nu: f64, initial: Vec<f64>) -> Result<Self, SleError> {
        if !(kappa > 0.0 && kappa <= 4.0) {
            return Err(SleError::Parameter(format!("kappa must lie in (0, 4], got {kappa}")));
        }
        if region == Region::O && (!(nu > -1.0) || initial.iter().any(|&y| !(y > 0.0))) {
            return Err(SleError::Parameter("O needs nu > -1 and positive starting points".into()));
        }
        let s = SleGas { region, kappa, nu, initial };
        s.gas_config()?;
        Ok(s)
    }

    /// `δ = ν` for O.
    pub fn delta(&self) -> f64 {
        match self.region {
            Region::H => 0.0,
            Region::O => self.nu,
        }
    }

    fn gas_config(&self) -> Result<GasConfig, SleError> {
        Ok(match self.region {
            Region::H => GasConfig::new(GasModel::dyson_kappa(self.kappa), self.initial.clone())?,
            Region::O => GasConfig::new(GasModel::bru_wishart_kappa(self.kappa, self.nu), self.initial.iter().map(|y| y * y).collect())?,
        })
    }

    /// One driving path on the uniform grid `[0, T]` with `steps` intervals.
    pub fn sample_path(&self, t_end: f64, steps: usize, dt_max: f64, r: &mut Rng) -> Result<DrivingPath, SleError> {
        let times: Vec<f64> = (0..=steps).map(|k| t_end * k as f64 / steps as f64).collect();
        let tr = loggas::simulate_at(&self.gas_config()?, &times, dt_max, r)?;
        let values = match self.region {
            Region::H => tr.states,
            Region::O => tr.states.into_iter().map(|s| s.into_iter().map(f64::sqrt).collect()).collect(),
        };
        DrivingPath::new(times, values)
    }

    pub fn flow_with(&self, path: &DrivingPath, points: &[C64], each: impl FnMut(&LoewnerState)) -> Result<LoewnerState, SleError> {
        match self.region {
            Region::H => forward_flow_with(path, points, each),
            Region::O => quadrant_flow_with(path, self.delta(), points, each),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub times: Vec<f64>,
    pub mean: Vec<C64>,
    pub std_error: Vec<C64>,
    pub initial: C64,
    /// max over times of |mean − initial| / se, separately for Re and Im.
    pub max_z: f64,
    pub replicas: usize,
    pub swallowed: usize,
}

/// Monte Carlo mean of `M_D(z, t)` on the recording grid.
pub fn martingale_check(gas: &SleGas, z: C64, t_end: f64, steps: usize, record_every: usize, replicas: usize, seed: u64) -> Result<MartingaleReport, SleError> {
    if record_every == 0 || steps % record_every != 0 {
        return Err(SleError::Parameter("record_every must divide steps".into()));
    }
    let runs: Vec<Result<Option<Vec<C64>>, SleError>> = rng::replicas(seed, replicas, |r, _| {
        let path = gas.sample_path(t_end, steps, 1e-3_f64.min(t_end / steps as f64), r)?;
        let mut out = Vec::new();
        let mut k = 0;
        let mut err = None;
        let st = gas.flow_with(&path, &[z], |s| {
            if k % record_every == 0 {
                match martingale_observable(s, &s.points[0], gas.kappa) {
                    Ok(m) => out.push(m),
                    Err(e) => err = Some(e),
                }
            }
            k += 1;
        })?;
        Ok(if err.is_some() || st.points[0].swallowed.is_some() { None } else { Some(out) })
    });
    let mut paths = Vec::new();
    let mut swallowed = 0;
    for r in runs {
        match r? {
            Some(p) => paths.push(p),
            None => swallowed += 1,
        }
    }
    if paths.len() < 2 {
        return Err(SleError::Parameter("too few surviving replicas".into()));
    }
    let m = paths[0].len();
    let times: Vec<f64> = (0..m).map(|j| t_end * (j * record_every) as f64 / steps as f64).collect();
    let mut mean = Vec::with_capacity(m);
    let mut se = Vec::with_capacity(m);
    let mut max_z: f64 = 0.0;
    let initial = paths[0][0];
    for j in 0..m {
        let re: Vec<f64> = paths.iter().map(|p| p[j].re).collect();
        let im: Vec<f64> = paths.iter().map(|p| p[j].im).collect();
        let (mr, sr) = rng::mean_se(&re);
        let (mi, si) = rng::mean_se(&im);
        if j > 0 {
            max_z = max_z.max((mr - initial.re).abs() / sr).max((mi - initial.im).abs() / si);
        }
        mean.push(C64::new(mr, mi));
        se.push(C64::new(sr, si));
    }
    Ok(MartingaleReport { times, mean, std_error: se, initial, max_z, replicas: paths.len(), swallowed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariationReport {
    /// Mean realized covariation of Im M(z), Im M(w) over [0, T].
    pub realized: f64,
    pub realized_se: f64,
    /// Mean of −(κ/4)(G_T(z, w) − G_0(z, w)).
    pub predicted: f64,
    pub predicted_se: f64,
    pub relative_error: f64,
    pub replicas: usize,
}

/// Realized quadratic covariation of `Im M_D(z, ·)` and `Im M_D(w, ·)` against the Green's-function decrement.
pub fn covariation_check(gas: &SleGas, z: C64, w: C64, t_end: f64, steps: usize, replicas: usize, seed: u64) -> Result<CovariationReport, SleError> {
    let runs: Vec<Result<Option<(f64, f64)>, SleError>> = rng::replicas(seed, replicas, |r, _| {
        let path = gas.sample_path(t_end, steps, 1e-3_f64.min(t_end / steps as f64), r)?;
        let mut prev: Option<(f64, f64)> = None;
        let mut qv = 0.0;
        let mut bad = false;
        let st = gas.flow_with(&path, &[z, w], |s| {
            let a = martingale_observable(s, &s.points[0], gas.kappa);
            let b = martingale_observable(s, &s.points[1], gas.kappa);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    if let Some((pa, pb)) = prev {
                        qv += (a.im - pa) * (b.im - pb);
                    }
                    prev = Some((a.im, b.im));
                }
                _ => bad = true,
            }
        })?;
        if bad || st.points.iter().any(|p| p.swallowed.is_some()) {
            return Ok(None);
        }
        let g = |a: C64, b: C64| crate::gff::green_unchecked(gas.region, a, b);
        let dg = g(st.points[0].g, st.points[1].g) - g(z, w);
        Ok(Some((qv, -gas.kappa / 4.0 * dg)))
    });
    let mut q = Vec::new();
    let mut p = Vec::new();
    for r in runs {
        if let Some((a, b)) = r? {
            q.push(a);
            p.push(b);
        }
    }
    if q.len() < 2 {
        return Err(SleError::Parameter("too few surviving replicas".into()));
    }
    let (qm, qs) = rng::mean_se(&q);
    let (pm, ps) = rng::mean_se(&p);
    Ok(CovariationReport { realized: qm, realized_se: qs, predicted: pm, predicted_se: ps, relative_error: (qm - pm).abs() / pm.abs(), replicas: q.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_path(n: usize, t_end: f64, steps: usize) -> DrivingPath {
        DrivingPath::from_fn(t_end, steps, |_| vec![0.0; n]).unwrap()
    }

    #[test]
    fn sle0_closed_form() {
        let p = zero_path(1, 2.0, 200);
        let pts: Vec<C64> = (0..10).map(|k| C64::new(-2.0 + 0.45 * k as f64, 0.2 + 0.3 * k as f64)).collect();
        let mut worst: f64 = 0.0;
        forward_flow_with(&p, &pts, |s| {
            for q in &s.points {
                let mut want = (q.z * q.z + 4.0 * s.time).sqrt();
                if want.im < 0.0 {
                    want = -want;
                }
                worst = worst.max((q.g - want).norm());
            }
        })
        .unwrap();
        assert!(worst < 1e-6, "{worst}");
        let st = forward_flow(&p, &[C64::new(1.0, 1.0)], 1.0).unwrap();
        assert!((st.points[0].g - C64::new(2.0582, 0.4859)).norm() < 1e-4);
        assert!((st.points[0].g - C64::new(4.0, 2.0).sqrt()).norm() < 1e-6);
        // log g′ = log(z / g)
        let want = (st.points[0].z / st.points[0].g).ln();
        assert!((st.points[0].log_dg - want).norm() < 1e-6);
    }

    #[test]
    fn hcap_linear_for_rough_driving() {
        let mut r = rng::stream(11, 0);
        let steps = 400;
        let mut x = 0.0;
        let mut vals = vec![vec![0.0]];
        for _ in 0..steps {
            x += (1.0 / steps as f64).sqrt() * rng::normal(&mut r) * 1.5;
            vals.push(vec![x]);
        }
        let times = (0..=steps).map(|k| k as f64 / steps as f64).collect();
        let p = DrivingPath::new(times, vals).unwrap();
        let st = forward_flow(&p, &[C64::new(0.5, 1.0)], 1.0).unwrap();
        assert!((hcap_estimate(&st).unwrap() - 2.0).abs() < 1e-4);
        assert!((st.hcap - 2.0).abs() < 1e-12);
        let st0 = LoewnerState::new(Region::H, 0.0, &[C64::new(0.0, 1.0)], &[0.0]).unwrap();
        assert_eq!(hcap_estimate(&st0).unwrap(), 0.0);
        // two slits with weights 1/2 keep hcap = 2t; weights 1 give 2Nt
        let p2 = DrivingPath::from_fn(1.0, 100, |t| vec![-1.0 - t, 1.0 + t.sqrt()]).unwrap();
        let st = forward_flow(&p2, &[C64::new(0.0, 1.0)], 1.0).unwrap();
        assert!((hcap_estimate(&st).unwrap() - 4.0).abs() < 1e-4);
        let half = DrivingPath::with_weights(p2.times.clone(), p2.values.clone(), vec![vec![0.5, 0.5]; 101]).unwrap();
        let st = forward_flow(&half, &[C64::new(0.0, 1.0)], 1.0).unwrap();
        assert!((hcap_estimate(&st).unwrap() - 2.0).abs() < 1e-4);
    }

    #[test]
    fn single_slit_reduction() {
        let p = DrivingPath::from_fn(0.5, 50, |t| vec![(3.0 * t).sin()]).unwrap();
        let a = forward_flow(&p, &[C64::new(0.3, 0.8)], 0.5).unwrap();
        let p2 = DrivingPath::with_weights(p.times.clone(), p.values.iter().map(|v| vec![v[0], v[0]]).collect(), vec![vec![0.5, 0.5]; 51]).unwrap();
        let b = forward_flow(&p2, &[C64::new(0.3, 0.8)], 0.5).unwrap();
        assert!((a.points[0].g - b.points[0].g).norm() < 1e-10);
    }

    #[test]
    fn straight_and_tilted_slits() {
        let tr = trace_slit(&zero_path(1, 1.0, 10), 1.0, 1e-3).unwrap();
        let tip = *tr.tips.last().unwrap().first().unwrap();
        assert!((tip - C64::new(0.0, 2.0)).norm() / 2.0 < 1e-3, "{tip}");
        for alpha in [1.0 / 3.0, 2.0 / 3.0] {
            let d = tilted_driving(alpha, 1.0, 2000).unwrap();
            let tr = trace_slit(&d, 1.0, 5e-4).unwrap();
            let tip = tr.tips.last().unwrap()[0];
            let arg = tip.arg();
            assert!((arg - alpha * std::f64::consts::PI).abs() < 0.01 * alpha * std::f64::consts::PI, "alpha={alpha}: {arg}");
            let modulus = 2.0 * ((1.0 - alpha) / alpha).powf(0.5 - alpha);
            assert!((tip.norm() - modulus).abs() < 0.02 * modulus);
        }
        assert_eq!(tilted_kappa(0.5), 0.0);
    }

    #[test]
    fn quadrant_transport_and_mirror() {
        let p = DrivingPath::from_fn(0.5, 100, |t| vec![1.0 + 0.5 * (4.0 * t).sin(), 2.0 + t]).unwrap();
        let pts = [C64::new(0.5, 0.5), C64::new(1.5, 0.3), C64::new(0.2, 2.0)];
        for delta in [0.0, 0.7, -0.4] {
            let res = quadrant_transport_residual(&p, delta, &pts, 0.5).unwrap();
            assert!(res < 1e-6, "delta={delta}: {res}");
        }
        // δ = 0: the O-flow equals the H-flow with mirrored drivers
        let mirror = DrivingPath::new(p.times.clone(), p.values.iter().map(|v| vec![-v[1], -v[0], v[0], v[1]]).collect()).unwrap();
        let a = quadrant_flow(&p, 0.0, &pts, 0.1).unwrap();
        let b = forward_flow(&mirror, &pts, 0.1).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            assert!((x.g - y.g).norm() < 1e-10);
        }
        let st = quadrant_flow(&p, 0.3, &pts, 0.5).unwrap();
        assert!((st.hcap - 4.0 * (2.0 + 0.3) * 0.5).abs() < 1e-12);
        let id = LoewnerState::new(Region::O, 0.3, &pts, &[1.0, 2.0]).unwrap();
        assert_eq!(id.points[1].g, pts[1]);
        assert!(LoewnerState::new(Region::O, 0.0, &[C64::new(-1.0, 1.0)], &[1.0]).is_err());
    }

    #[test]
    fn log_derivative_is_continuous() {
        // a point passing close to the driver: arg g′ varies by more than π but without jumps
        let p = DrivingPath::from_fn(2.0, 400, |t| vec![3.0 * t]).unwrap();
        let mut prev: Option<f64> = None;
        let mut max_jump: f64 = 0.0;
        forward_flow_with(&p, &[C64::new(1.0, 0.2)], |s| {
            let a = s.points[0].log_dg.im;
            if let Some(b) = prev {
                max_jump = max_jump.max((a - b).abs());
            }
            prev = Some(a);
        })
        .unwrap();
        assert!(max_jump < std::f64::consts::PI);
    }

    #[test]
    fn martingale_at_time_zero() {
        let st = LoewnerState::new(Region::H, 0.0, &[C64::new(0.3, 1.0)], &[-1.0, 1.0]).unwrap();
        let m = martingale_observable(&st, &st.points[0], 2.0).unwrap();
        let want = -(C64::new(1.3, 1.0).ln() + C64::new(-0.7, 1.0).ln());
        assert!((m - want).norm() < 1e-15);
    }

    #[test]
    fn frozen_driving_drift_matches_potential_increment() {
        // constant driving: one small step of M_H against the dt-coefficient of dΦ
        let kappa = 2.0;
        let x = [-1.0, 1.0];
        let h = 1e-5;
        let p = DrivingPath::from_fn(h, 1, |_| x.to_vec()).unwrap();
        let z = C64::new(0.4, 1.2);
        let st0 = LoewnerState::new(Region::H, 0.0, &[z], &x).unwrap();
        let st1 = forward_flow(&p, &[z], h).unwrap();
        let dm = martingale_observable(&st1, &st1.points[0], kappa).unwrap() - martingale_observable(&st0, &st0.points[0], kappa).unwrap();
        // frozen driving has no quadratic variation, so the Itô term -(κ/2)Σ(g - x_i)^{-2} of the
        // gas-driven increment reappears next to the interaction drift -4Σ_{j≠i}(x_i - x_j)^{-1}/(g - x_i)
        let mut want = C64::new(0.0, 0.0);
        for i in 0..2 {
            let f: f64 = (0..2).filter(|&j| j != i).map(|j| 4.0 / (x[i] - x[j])).sum();
            want -= f / (z - x[i]) + kappa / 2.0 / ((z - x[i]) * (z - x[i]));
        }
        let want = want * h;
        assert!((dm - want).norm() < 1e-3 * want.norm(), "{dm} {want}");
    }
}
