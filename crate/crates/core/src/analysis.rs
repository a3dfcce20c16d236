//! Straight-line equilibria and their stability, flows on the invariant
//! manifolds, and the rotor-driven speedup: predicted power laws, the
//! averaged law for `p = 1/v1`, envelope extraction and log-log fitting.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_rational::Rational64;
use rand::Rng;

use crate::dynamics::{FullSystem, ManifoldSign, ManifoldSystem, PoseState, ReducedState};
use crate::error::{invalid, Error, Result};
use crate::integrator::{integrate, integrate_with, IntegratorOptions, VectorField};
use crate::model::{alt, shape_coeffs, theta_into, RotorProfile, Vehicle, VehicleParams};

/// One of the `2^(N+1)` straight-line equilibria of the angle-variable system.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    /// `cos(vartheta)`: `+1` on the forward family, `-1` on the backward one.
    pub sigma0: i8,
    /// `cos(theta_i)`.
    pub sigma: Vec<i8>,
    pub vartheta: f64,
    pub theta: Vec<f64>,
    /// Hinge angles, each `0` or `pi`.
    pub phi: Vec<f64>,
}

impl FixedPoint {
    pub fn links(&self) -> usize {
        self.sigma.len()
    }

    /// `S+(0,pi)` style label: family sign, then the hinge angles.
    pub fn label(&self) -> String {
        let fam = if self.sigma0 > 0 { '+' } else { '-' };
        let angles: Vec<&str> = self.phi.iter().map(|&p| if p == 0.0 { "0" } else { "pi" }).collect();
        format!("S{fam}({})", angles.join(","))
    }

    pub fn is_straight(&self) -> bool {
        self.phi.iter().all(|&p| p == 0.0)
    }
}

/// All equilibria, ordered by the bit pattern of `(sigma0, sigma_1..sigma_N)`
/// with `+1` before `-1`.
pub fn enumerate_fixed_points(n: usize) -> Vec<FixedPoint> {
    (0..1u64 << (n + 1))
        .map(|bits| {
            let flipped = |k: usize| bits >> k & 1 == 1;
            let sigma0 = if flipped(0) { -1 } else { 1 };
            let sigma: Vec<i8> = (1..=n).map(|k| if flipped(k) { -1 } else { 1 }).collect();
            // theta_i = n_i pi with n_i in {0, 1}; invert B over the integers.
            let mut running = 0i64;
            let phi = sigma
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    let th = i64::from(s < 0);
                    let signed = th - 2 * running;
                    running += signed;
                    let multiple = if i % 2 == 0 { signed } else { -signed };
                    if multiple.rem_euclid(2) == 0 {
                        0.0
                    } else {
                        PI
                    }
                })
                .collect();
            FixedPoint {
                sigma0,
                theta: sigma.iter().map(|&s| if s > 0 { 0.0 } else { PI }).collect(),
                vartheta: if sigma0 > 0 { 0.0 } else { PI },
                sigma,
                phi,
            }
        })
        .collect()
}

/// Jacobian of `(vartheta', phi')` at a fixed point. Lower triangular:
/// `A_00 = -(b/J) s0`, `A_i0 = -sqrt(m/J) s0`, `A_ii = -s0 s_i / c_i`,
/// `A_ik = 2 (-1)^(i+k+1) s0 s_i / c_i` for `0 < k < i`.
pub fn linearization_matrix(fp: &FixedPoint, vehicle: &Vehicle) -> DMatrix<f64> {
    let d = &vehicle.derived;
    let c = &vehicle.params.hinge_distances;
    let n = fp.links();
    let s0 = f64::from(fp.sigma0);
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a[(0, 0)] = -d.static_moment / d.inertia * s0;
    let lift = (d.total_mass / d.inertia).sqrt();
    for i in 1..=n {
        let si = f64::from(fp.sigma[i - 1]);
        let ci = c[i - 1];
        a[(i, 0)] = -lift * s0;
        for k in 1..i {
            a[(i, k)] = -2.0 * alt(i + k) * s0 * si / ci;
        }
        a[(i, i)] = -s0 * si / ci;
    }
    a
}

/// Eigenvector of a lower-triangular matrix for its `k`-th diagonal entry,
/// normalized to unit length. Entries above `k` vanish.
pub fn triangular_eigenvector(a: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    let n = a.nrows();
    let lambda = a[(k, k)];
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    for i in k + 1..n {
        let gap = lambda - a[(i, i)];
        if gap == 0.0 {
            return Err(invalid("eigenvalue", format!("repeated diagonal entry {lambda}")));
        }
        v[i] = (k..i).map(|j| a[(i, j)] * v[j]).sum::<f64>() / gap;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(v.into_iter().map(|x| x / norm).collect())
}

/// Linearization of the hinge-angle flow on `M+` / `M-` at an equilibrium of
/// that manifold (the `phi` block of [`linearization_matrix`]).
pub fn manifold_linearization(fp: &FixedPoint, vehicle: &Vehicle) -> DMatrix<f64> {
    let n = fp.links();
    linearization_matrix(fp, vehicle).view((1, 1), (n, n)).into_owned()
}

/// Unit direction along which a start near an unstable manifold equilibrium
/// leaves fastest (eigenvector of the largest eigenvalue).
pub fn strong_unstable_direction(fp: &FixedPoint, vehicle: &Vehicle) -> Result<Vec<f64>> {
    let a = manifold_linearization(fp, vehicle);
    let k = (0..a.nrows())
        .max_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]))
        .ok_or_else(|| invalid("links", "need at least one trailer"))?;
    triangular_eigenvector(&a, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StabilityKind {
    StableNode,
    UnstableNode,
    Saddle,
}

impl std::fmt::Display for StabilityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::StableNode => "StableNode",
            Self::UnstableNode => "UnstableNode",
            Self::Saddle => "Saddle",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub kind: StabilityKind,
    pub eigenvalues: Vec<f64>,
}

pub fn classify_fixed_point(fp: &FixedPoint, vehicle: &Vehicle) -> Result<Classification> {
    let b = vehicle.derived.static_moment;
    if b == 0.0 {
        return Err(Error::DegenerateSpectrum { static_moment: b });
    }
    let a = linearization_matrix(fp, vehicle);
    let eigenvalues: Vec<f64> = a.diagonal().iter().copied().collect();
    let kind = if eigenvalues.iter().all(|&e| e < 0.0) {
        StabilityKind::StableNode
    } else if eigenvalues.iter().all(|&e| e > 0.0) {
        StabilityKind::UnstableNode
    } else {
        StabilityKind::Saddle
    };
    Ok(Classification { kind, eigenvalues })
}

/// Wraps to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Euclidean distance between angle vectors after wrapping each difference.
pub fn wrapped_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| wrap_angle(x - y).powi(2)).sum::<f64>().sqrt()
}

/// Log-uniform masses and inertias in `[0.1, 10]`, lengths in `[0.2, 5]`.
/// Admissible parameters always give `Phi0 >= m_0 > 0`, so no draw is rejected.
pub fn random_params<R: Rng + ?Sized>(n: usize, rng: &mut R) -> VehicleParams {
    let mut log_uniform = |lo: f64, hi: f64| (rng.gen_range(lo.ln()..hi.ln())).exp();
    let masses = (0..=n).map(|_| log_uniform(0.1, 10.0)).collect();
    let inertias = (0..=n).map(|_| log_uniform(0.1, 10.0)).collect();
    let sleigh_offset = log_uniform(0.2, 5.0);
    let hinge_distances = (0..n).map(|_| log_uniform(0.2, 5.0)).collect();
    let mass_offsets = (0..n).map(|_| log_uniform(0.2, 5.0)).collect();
    VehicleParams {
        masses,
        inertias,
        sleigh_offset,
        hinge_distances,
        mass_offsets,
    }
}

/// Summary of one heteroclinic-structure run on an invariant manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldRun {
    /// Equilibria approached within the proximity radius, in order of first
    /// approach, with the closest distance reached.
    pub visits: Vec<(String, f64)>,
    /// Rescaled time at which the trajectory entered the `tol` ball of the
    /// node, if it did.
    pub converged_at: Option<f64>,
    pub final_phi: Vec<f64>,
    pub times: Vec<f64>,
    pub path: Vec<Vec<f64>>,
}

/// Follows the hinge-angle flow on `M+` or `M-` from `phi0` and records which
/// equilibria it passes within `radius` and whether it ends within `tol` of
/// the straight configuration `phi = 0`, which attracts on `M+` and repels
/// on `M-`.
pub fn follow_manifold(
    params: &VehicleParams,
    sign: ManifoldSign,
    phi0: &[f64],
    tau_end: f64,
    radius: f64,
    tol: f64,
) -> Result<ManifoldRun> {
    let n = params.links();
    if phi0.len() != n {
        return Err(invalid("phi0", format!("expected {n} angles")));
    }
    let system = ManifoldSystem { params, sign };
    let opts = IntegratorOptions {
        hmax: 0.05,
        ..IntegratorOptions::adaptive(tau_end, 1e-10, 1e-12)
    }
    .with_interval(0.01);
    let sol = integrate(&system, phi0, &opts)?;
    let points: Vec<FixedPoint> = enumerate_fixed_points(n).into_iter().filter(|fp| fp.sigma0 > 0).collect();
    let mut visits: Vec<(String, f64)> = Vec::new();
    let mut converged_at = None;
    let zero = vec![0.0; n];
    let start_label = points
        .iter()
        .min_by(|a, b| wrapped_distance(phi0, &a.phi).total_cmp(&wrapped_distance(phi0, &b.phi)))
        .map(FixedPoint::label);
    for (&tau, phi) in sol.times.iter().zip(&sol.states) {
        for fp in &points {
            let dist = wrapped_distance(phi, &fp.phi);
            if dist >= radius || Some(fp.label()) == start_label {
                continue;
            }
            match visits.iter_mut().find(|(l, _)| *l == fp.label()) {
                Some(v) => v.1 = v.1.min(dist),
                None => visits.push((fp.label(), dist)),
            }
        }
        if converged_at.is_none() && wrapped_distance(phi, &zero) < tol {
            converged_at = Some(tau);
        }
    }
    let final_phi = sol.states.last().cloned().unwrap_or_default();
    Ok(ManifoldRun {
        visits,
        converged_at,
        final_phi,
        times: sol.times,
        path: sol.states,
    })
}

/// Predicted power laws of the speedup regime.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticPrediction {
    /// `Delta = 3 <kdot^2> / (b m)`.
    pub delta: f64,
    /// `v1 ~ Delta^(1/3) t^(1/3)`.
    pub v1_coeff: f64,
    /// `|omega| <= max|kdot| / (b Delta^(1/3)) t^(-1/3)`.
    pub omega_env: f64,
    /// `|theta_i| <= c_i max|kdot| / b Delta^(-2/3) t^(-2/3)`.
    pub theta_env: Vec<f64>,
    /// `|phi_i| <= (c_i + 2 sum_{j<i} c_j) max|kdot| / b Delta^(-2/3) t^(-2/3)`.
    pub phi_env: Vec<f64>,
}

impl AsymptoticPrediction {
    pub const V1_EXPONENT: f64 = 1.0 / 3.0;
    pub const OMEGA_EXPONENT: f64 = -1.0 / 3.0;
    pub const ANGLE_EXPONENT: f64 = -2.0 / 3.0;

    pub fn v1(&self, t: f64) -> f64 {
        self.v1_coeff * t.cbrt()
    }
}

pub fn asymptotic_prediction(vehicle: &Vehicle, rotor: &RotorProfile) -> Result<AsymptoticPrediction> {
    let d = &vehicle.derived;
    let b = d.static_moment;
    if b <= 0.0 {
        return Err(Error::NoSpeedup {
            reason: "static moment b = m0 a0 must be positive".into(),
        });
    }
    let msr = rotor.mean_square_rate();
    if msr <= 0.0 {
        return Err(Error::NoSpeedup {
            reason: "rotor momentum is constant (<kdot^2> = 0)".into(),
        });
    }
    let delta = 3.0 * msr / (b * d.total_mass);
    let kmax = rotor.max_abs_rate();
    let angle_scale = kmax / b * delta.powf(-2.0 / 3.0);
    let c = &vehicle.params.hinge_distances;
    let mut behind = 0.0;
    let phi_env = c
        .iter()
        .map(|&ci| {
            let lever = ci + 2.0 * behind;
            behind += ci;
            lever * angle_scale
        })
        .collect();
    Ok(AsymptoticPrediction {
        delta,
        v1_coeff: delta.cbrt(),
        omega_env: kmax / (b * delta.cbrt()),
        theta_env: c.iter().map(|&ci| ci * angle_scale).collect(),
        phi_env,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitMode {
    Raw,
    /// Reduce to per-period maxima of `|value|` before fitting.
    Envelope { period: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub samples: usize,
}

impl PowerLawFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.prefactor * t.powf(self.exponent)
    }
}

pub const MIN_FIT_SAMPLES: usize = 30;

/// Per-period maxima of `|value|` over samples with `t` in `[lo, hi]`,
/// each reported at the instant it occurs. Incomplete trailing periods are kept.
pub fn period_envelope(times: &[f64], values: &[f64], period: f64, window: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    let mut tracker = EnvelopeTracker::new(period);
    for (&t, &v) in times.iter().zip(values) {
        if t >= window.0 && t <= window.1 {
            tracker.push(t, v);
        }
    }
    tracker.finish()
}

/// Streaming per-period maximum of `|value|`.
#[derive(Debug, Clone)]
pub struct EnvelopeTracker {
    period: f64,
    current: Option<(i64, f64, f64)>,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl EnvelopeTracker {
    pub fn new(period: f64) -> Self {
        Self {
            period,
            current: None,
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        let k = (t / self.period).floor() as i64;
        let a = v.abs();
        match &mut self.current {
            Some((ck, ct, cv)) if *ck == k => {
                if a > *cv {
                    *ct = t;
                    *cv = a;
                }
            }
            _ => {
                if let Some((_, ct, cv)) = self.current.take() {
                    self.times.push(ct);
                    self.values.push(cv);
                }
                self.current = Some((k, t, a));
            }
        }
    }

    pub fn finish(mut self) -> (Vec<f64>, Vec<f64>) {
        if let Some((_, ct, cv)) = self.current.take() {
            self.times.push(ct);
            self.values.push(cv);
        }
        (self.times, self.values)
    }
}

/// Least-squares fit of `log|value| = log(prefactor) + exponent * log(t)`
/// over `t` in `[window.0, window.1]`.
pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64), mode: FitMode) -> Result<PowerLawFit> {
    if times.len() != values.len() {
        return Err(Error::Fit("times and values differ in length".into()));
    }
    if !(window.0 > 0.0 && window.1 > window.0) {
        return Err(Error::Fit(format!("window {window:?} needs 0 < t_lo < t_hi")));
    }
    let in_window = times.iter().filter(|&&t| t >= window.0 && t <= window.1).count();
    if in_window < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!("{in_window} samples in window, need {MIN_FIT_SAMPLES}")));
    }
    let (ts, vs): (Vec<f64>, Vec<f64>) = match mode {
        FitMode::Raw => times
            .iter()
            .zip(values)
            .filter(|(&t, _)| t >= window.0 && t <= window.1)
            .map(|(&t, &v)| (t, v))
            .unzip(),
        FitMode::Envelope { period } => {
            if !(period > 0.0) {
                return Err(Error::Fit("envelope period must be > 0".into()));
            }
            period_envelope(times, values, period, window)
        }
    };
    if ts.len() < 2 {
        return Err(Error::Fit("fewer than two points after envelope reduction".into()));
    }
    if let Some(bad) = vs.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Fit(format!("non-positive value {bad} has no logarithm")));
    }
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let (slope, intercept, r2) = linear_regression(&xs, &ys);
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared: r2,
        samples: xs.len(),
    })
}

/// Prefactor of `value ~ C t^exponent` with the exponent held fixed
/// (geometric mean of `|value| t^-exponent` over the window).
pub fn fixed_exponent_prefactor(times: &[f64], values: &[f64], exponent: f64) -> f64 {
    let n = times.len() as f64;
    (times.iter().zip(values).map(|(t, v)| v.abs().ln() - exponent * t.ln()).sum::<f64>() / n).exp()
}

fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

/// Velocities in the chart `p = 1/v1`, `q = omega/v1`, `Psi = t mod P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledState {
    pub p: f64,
    pub q: f64,
    pub psi: f64,
}

impl RescaledState {
    pub fn from_velocities(t: f64, v1: f64, omega: f64, period: f64) -> Result<Self> {
        if v1 == 0.0 {
            return Err(invalid("v1", "the rescaled chart needs v1 != 0"));
        }
        Ok(Self {
            p: 1.0 / v1,
            q: omega / v1,
            psi: t.rem_euclid(period),
        })
    }
}

/// Reduced system in the `(p, q, theta, Psi)` chart with time `d tau = v1 dt`.
/// `Psi` is carried unwrapped (it equals `t`); wrap with the period on output.
#[derive(Debug, Clone)]
pub struct RescaledSystem<'a> {
    pub vehicle: &'a Vehicle,
    pub rotor: RotorProfile,
}

impl VectorField for RescaledSystem<'_> {
    fn eval(&self, _tau: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = y.len() - 3;
        let (p, q, theta, psi) = (y[0], y[1], &y[2..2 + n], y[2 + n]);
        let d = &self.vehicle.derived;
        let s = shape_coeffs(theta, d, &self.vehicle.params)?;
        let b = d.static_moment;
        let drift = (b * q * q + s.phi1 + q * s.phi2) / s.phi0;
        dy[0] = -p * drift;
        dy[1] = -(b * q + p * p * self.rotor.rate(psi)) / d.inertia - q * drift;
        let mut prefix = 0.0;
        for ((o, &th), &c) in dy[2..2 + n].iter_mut().zip(theta).zip(&self.vehicle.params.hinge_distances) {
            let term = th.sin() / c;
            *o = -term - 2.0 * prefix - q;
            prefix += term;
        }
        dy[2 + n] = p;
        Ok(())
    }
}

/// Verification of the averaged law `p' = -(<kdot^2>/(b m)) p^4` and its
/// solution `p = Delta^(-1/3) t^(-1/3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedLawReport {
    pub delta: f64,
    /// Residual of substituting `C t^e` into the averaged law, in exact
    /// rational arithmetic: `(e - 1) - 4e` and `e + kappa C^3` with
    /// `kappa C^3 = 1/3` (from `C^3 = 1/Delta = 1/(3 kappa)`).
    pub exponent_residual: Rational64,
    pub coefficient_residual: Rational64,
    /// Largest relative floating-point residual of the same substitution on a
    /// log grid over `[t_from, t_to]`.
    pub float_residual: f64,
    /// `|p_numeric(t_to) - p_closed(t_to)|` for the averaged scalar ODE.
    pub ode_error: f64,
    pub t_from: f64,
    pub t_to: f64,
    /// `p(t) Delta^(1/3) t^(1/3)` at the end of a full simulation, if given.
    pub simulated_ratio: Option<f64>,
}

pub fn averaged_law_check(
    vehicle: &Vehicle,
    rotor: &RotorProfile,
    t_from: f64,
    t_to: f64,
    simulated_end: Option<(f64, f64)>,
) -> Result<AveragedLawReport> {
    let pred = asymptotic_prediction(vehicle, rotor)?;
    let d = &vehicle.derived;
    let kappa = rotor.mean_square_rate() / (d.static_moment * d.total_mass);
    let delta = pred.delta;

    let e = Rational64::new(-1, 3);
    let exponent_residual = (e - 1) - e * 4;
    let kappa_c3 = Rational64::new(1, 3);
    let coefficient_residual = e + kappa_c3;

    let closed = |t: f64| (delta * t).cbrt().recip();
    let float_residual = (0..=40)
        .map(|k| {
            let t = t_from * (t_to / t_from).powf(k as f64 / 40.0);
            let p = closed(t);
            let lhs = -p / (3.0 * t);
            let rhs = -kappa * p.powi(4);
            ((lhs - rhs) / lhs).abs()
        })
        .fold(0.0, f64::max);

    let ode = move |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        dy[0] = -kappa * y[0].powi(4);
        Ok(())
    };
    let opts = IntegratorOptions {
        t_start: t_from,
        h0: 1e-2,
        hmax: f64::INFINITY,
        ..IntegratorOptions::adaptive(t_to, 1e-13, 1e-15)
    };
    let sol = integrate(&ode, &[closed(t_from)], &opts)?;
    let (t_last, p_last) = sol.last().expect("integration emits its end point");
    let ode_error = (p_last[0] - closed(t_last)).abs();

    Ok(AveragedLawReport {
        delta,
        exponent_residual,
        coefficient_residual,
        float_residual,
        ode_error,
        t_from,
        t_to,
        simulated_ratio: simulated_end.map(|(t, v1)| (delta * t).cbrt() / v1),
    })
}

/// Settings of a long speedup run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupSettings {
    pub t_end: f64,
    /// Fit window `[t_lo, t_hi]`.
    pub window: (f64, f64),
    pub rtol: f64,
    pub atol: f64,
    /// Dense samples per rotor period used for envelopes and correlations.
    pub samples_per_period: usize,
}

impl Default for SpeedupSettings {
    fn default() -> Self {
        Self {
            t_end: 1e5,
            window: (1e3, 1e5),
            rtol: 1e-8,
            atol: 1e-10,
            samples_per_period: 64,
        }
    }
}

/// Result of comparing a simulated speedup with the predicted power laws.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupReport {
    pub prediction: AsymptoticPrediction,
    pub v1_fit: PowerLawFit,
    /// `v1` prefactor with the exponent fixed at 1/3.
    pub v1_prefactor: f64,
    pub omega_fit: PowerLawFit,
    pub omega_prefactor: f64,
    pub phi_fits: Vec<PowerLawFit>,
    /// Envelope coefficients of `phi_i` with the exponent fixed at -2/3.
    pub phi_prefactors: Vec<f64>,
    pub theta_fits: Vec<PowerLawFit>,
    /// Mean over the last decade of the window of
    /// `|max|omega| b Delta^(1/3) t^(1/3) / max|kdot| - 1|` per period.
    pub omega_tracking_error: f64,
    /// Pearson correlation of `theta_i` with `(-1)^(i+1) kdot` over the last
    /// decade of the window.
    pub theta_correlations: Vec<f64>,
    pub final_time: f64,
    pub final_state: ReducedState,
}

struct Pearson {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Pearson {
    fn new() -> Self {
        Self { n: 0.0, sx: 0.0, sy: 0.0, sxx: 0.0, syy: 0.0, sxy: 0.0 }
    }

    fn push(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    fn value(&self) -> f64 {
        let cov = self.sxy - self.sx * self.sy / self.n;
        let vx = self.sxx - self.sx * self.sx / self.n;
        let vy = self.syy - self.sy * self.sy / self.n;
        cov / (vx * vy).sqrt()
    }
}

/// Integrates the forced vehicle and fits the speedup power laws.
pub fn run_speedup(
    vehicle: &Vehicle,
    rotor: &RotorProfile,
    initial: &ReducedState,
    settings: &SpeedupSettings,
) -> Result<SpeedupReport> {
    run_speedup_observed(vehicle, rotor, initial, &PoseState::default(), settings, |_, _| {})
}

/// [`run_speedup`] that also hands every dense sample (`P / samples_per_period`
/// apart, [`FullSystem`] layout) to `observer`.
pub fn run_speedup_observed<F: FnMut(f64, &[f64])>(
    vehicle: &Vehicle,
    rotor: &RotorProfile,
    initial: &ReducedState,
    pose: &PoseState,
    settings: &SpeedupSettings,
    mut observer: F,
) -> Result<SpeedupReport> {
    let prediction = asymptotic_prediction(vehicle, rotor)?;
    let period = rotor.period().expect("a rotor with speedup is periodic");
    let n = vehicle.links();
    if initial.links() != n {
        return Err(invalid("initial.phi", format!("expected {n} angles")));
    }
    let (lo, hi) = settings.window;
    let late = hi / 10.0;
    let system = FullSystem::new(vehicle, *rotor);
    let y0 = FullSystem::pack(initial, pose);
    let opts = IntegratorOptions {
        hmax: period / 4.0,
        h0: 1e-3 * period,
        ..IntegratorOptions::adaptive(settings.t_end, settings.rtol, settings.atol)
    }
    .with_interval(period / settings.samples_per_period as f64);

    let mut v1_series = (Vec::new(), Vec::new());
    let mut omega_env = EnvelopeTracker::new(period);
    let mut phi_env: Vec<EnvelopeTracker> = (0..n).map(|_| EnvelopeTracker::new(period)).collect();
    let mut theta_env: Vec<EnvelopeTracker> = (0..n).map(|_| EnvelopeTracker::new(period)).collect();
    let mut corr: Vec<Pearson> = (0..n).map(|_| Pearson::new()).collect();
    let mut theta = vec![0.0; n];
    let mut next_v1 = 0.0;
    let mut last = (0.0, y0.clone());

    integrate_with(&system, &y0, &opts, |t, y| {
        observer(t, y);
        let phi = &y[2..2 + n];
        // v1 itself is smooth, one sample per period is plenty
        if t >= next_v1 {
            next_v1 += period;
            if t >= lo && t <= hi {
                v1_series.0.push(t);
                v1_series.1.push(y[0]);
            }
        }
        if t >= lo && t <= hi {
            theta_into(phi, &mut theta);
            omega_env.push(t, y[1]);
            for i in 0..n {
                phi_env[i].push(t, phi[i]);
                theta_env[i].push(t, theta[i]);
            }
            if t >= late {
                let kdot = rotor.rate(t);
                for i in 0..n {
                    corr[i].push(theta[i], -alt(i + 1) * kdot);
                }
            }
        }
        last = (t, y.to_vec());
    })?;

    let v1_fit = fit_power_law(&v1_series.0, &v1_series.1, settings.window, FitMode::Raw)?;
    let v1_prefactor = fixed_exponent_prefactor(&v1_series.0, &v1_series.1, AsymptoticPrediction::V1_EXPONENT);

    let envelope_fit = |tr: EnvelopeTracker, exponent: f64| -> Result<(PowerLawFit, f64, Vec<f64>, Vec<f64>)> {
        let (ts, vs) = tr.finish();
        let fit = fit_power_law(&ts, &vs, settings.window, FitMode::Raw)?;
        let pre = fixed_exponent_prefactor(&ts, &vs, exponent);
        Ok((fit, pre, ts, vs))
    };
    let (omega_fit, omega_prefactor, om_t, om_v) = envelope_fit(omega_env, AsymptoticPrediction::OMEGA_EXPONENT)?;
    let kmax = rotor.max_abs_rate();
    let b = vehicle.derived.static_moment;
    let tracking: Vec<f64> = om_t
        .iter()
        .zip(&om_v)
        .filter(|(&t, _)| t >= late)
        .map(|(&t, &w)| (w * b * prediction.v1_coeff * t.cbrt() / kmax - 1.0).abs())
        .collect();
    let omega_tracking_error = tracking.iter().sum::<f64>() / tracking.len().max(1) as f64;

    let mut phi_fits = Vec::with_capacity(n);
    let mut phi_prefactors = Vec::with_capacity(n);
    for tr in phi_env {
        let (fit, pre, _, _) = envelope_fit(tr, AsymptoticPrediction::ANGLE_EXPONENT)?;
        phi_fits.push(fit);
        phi_prefactors.push(pre);
    }
    let theta_fits = theta_env
        .into_iter()
        .map(|tr| envelope_fit(tr, AsymptoticPrediction::ANGLE_EXPONENT).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;

    let (final_time, y_end) = last;
    let (final_state, _) = FullSystem::unpack(&y_end);
    Ok(SpeedupReport {
        prediction,
        v1_fit,
        v1_prefactor,
        omega_fit,
        omega_prefactor,
        phi_fits,
        phi_prefactors,
        theta_fits,
        omega_tracking_error,
        theta_correlations: corr.iter().map(Pearson::value).collect(),
        final_time,
        final_state,
    })
}
