//! Explicit Runge-Kutta time stepping: classical RK4 at a fixed step and
//! Dormand-Prince 5(4) with step-size control and a 4th-order continuous
//! extension for uniform output grids.
//!
//! The steppers are generic over [`VectorField`] and know nothing about the
//! vehicle. Rescaled-time systems are integrated in their own time variable.

use crate::error::{Error, Result};

/// Right-hand side `dy/dt = f(t, y)`.
pub trait VectorField {
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()>;
}

impl<F> VectorField for F
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        self(t, y, dydt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FixedRk4,
    AdaptiveRk45,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Initial step for the adaptive method, the step itself for RK4.
    pub h0: f64,
    pub hmax: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Emit every `sample_stride`-th accepted step (ignored when
    /// `sample_interval` is set).
    pub sample_stride: usize,
    /// Emit on the uniform grid `t_start + k * dt` by dense interpolation.
    pub sample_interval: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveRk45,
            rtol: 1e-10,
            atol: 1e-12,
            h0: 1e-3,
            hmax: 1.0,
            t_start: 0.0,
            t_end: 1.0,
            sample_stride: 1,
            sample_interval: None,
        }
    }
}

impl IntegratorOptions {
    pub fn adaptive(t_end: f64, rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            t_end,
            ..Self::default()
        }
    }

    pub fn fixed(t_end: f64, h: f64) -> Self {
        Self {
            method: Method::FixedRk4,
            h0: h,
            hmax: h,
            t_end,
            ..Self::default()
        }
    }

    pub fn with_interval(mut self, dt: f64) -> Self {
        self.sample_interval = Some(dt);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidOptions(msg.to_string()));
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("rtol and atol must be > 0");
        }
        if !(self.h0 > 0.0 && self.h0 <= self.hmax) {
            return bad("need 0 < h0 <= hmax");
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return bad("need finite t_end > t_start");
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be >= 1");
        }
        if let Some(dt) = self.sample_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("sample_interval must be > 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Emitted samples of one integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: StepStats,
}

impl Solution {
    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }
}

pub fn integrate<F: VectorField + ?Sized>(field: &F, y0: &[f64], opts: &IntegratorOptions) -> Result<Solution> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let stats = integrate_with(field, y0, opts, |t, y| {
        times.push(t);
        states.push(y.to_vec());
    })?;
    Ok(Solution { times, states, stats })
}

/// Runs the integration and hands every emitted sample to `observer` instead
/// of storing it.
pub fn integrate_with<F, O>(field: &F, y0: &[f64], opts: &IntegratorOptions, observer: O) -> Result<StepStats>
where
    F: VectorField + ?Sized,
    O: FnMut(f64, &[f64]),
{
    opts.validate()?;
    let mut k0 = vec![0.0; y0.len()];
    field.eval(opts.t_start, y0, &mut k0)?;
    if !all_finite(y0) || !all_finite(&k0) {
        return Err(Error::Divergence { t: opts.t_start });
    }
    let mut out = Emitter::new(opts, observer);
    out.start(opts.t_start, y0);
    let stats = match opts.method {
        Method::FixedRk4 => rk4(field, y0, k0, opts, &mut out)?,
        Method::AdaptiveRk45 => dopri5(field, y0, k0, opts, &mut out)?,
    };
    Ok(stats)
}

fn all_finite(y: &[f64]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Output bookkeeping shared by both steppers.
struct Emitter<O> {
    observer: O,
    stride: usize,
    interval: Option<f64>,
    t_start: f64,
    t_end: f64,
    next_index: u64,
    last_emitted: f64,
    buf: Vec<f64>,
}

impl<O: FnMut(f64, &[f64])> Emitter<O> {
    fn new(opts: &IntegratorOptions, observer: O) -> Self {
        Self {
            observer,
            stride: opts.sample_stride,
            interval: opts.sample_interval,
            t_start: opts.t_start,
            t_end: opts.t_end,
            next_index: 1,
            last_emitted: f64::NEG_INFINITY,
            buf: Vec::new(),
        }
    }

    fn emit(&mut self, t: f64, y: &[f64]) {
        (self.observer)(t, y);
        self.last_emitted = t;
    }

    fn start(&mut self, t: f64, y: &[f64]) {
        self.emit(t, y);
    }

    /// Called after each accepted step `[t_old, t_new]`; `dense(t, out)`
    /// interpolates inside the step.
    fn step(&mut self, steps: usize, t_new: f64, y_new: &[f64], mut dense: impl FnMut(f64, &mut [f64])) {
        match self.interval {
            Some(dt) => loop {
                let ts = self.t_start + self.next_index as f64 * dt;
                if ts > t_new || ts > self.t_end {
                    break;
                }
                if ts == t_new {
                    self.emit(ts, y_new);
                } else {
                    let mut buf = std::mem::take(&mut self.buf);
                    buf.resize(y_new.len(), 0.0);
                    dense(ts, &mut buf);
                    self.emit(ts, &buf);
                    self.buf = buf;
                }
                self.next_index += 1;
            },
            None => {
                if steps.is_multiple_of(self.stride) {
                    self.emit(t_new, y_new);
                }
            }
        }
    }

    fn finish(&mut self, t: f64, y: &[f64]) {
        if self.last_emitted < t {
            self.emit(t, y);
        }
    }
}

fn rk4<F, O>(field: &F, y0: &[f64], k0: Vec<f64>, opts: &IntegratorOptions, out: &mut Emitter<O>) -> Result<StepStats>
where
    F: VectorField + ?Sized,
    O: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut stats = StepStats { evaluations: 1, ..Default::default() };
    let mut t = opts.t_start;
    let mut y = y0.to_vec();
    let mut k1 = k0;
    let (mut k2, mut k3, mut k4, mut tmp, mut y_new, mut f_new) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let span = opts.t_end - opts.t_start;
    let mut step = 0usize;
    while t < opts.t_end {
        step += 1;
        // integer step count keeps the grid free of accumulated rounding
        let mut t_next = opts.t_start + step as f64 * opts.h0;
        if t_next > opts.t_end - 1e-12 * span {
            t_next = opts.t_end;
        }
        let h = t_next - t;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        field.eval(t + 0.5 * h, &tmp, &mut k2)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        field.eval(t + 0.5 * h, &tmp, &mut k3)?;
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        field.eval(t + h, &tmp, &mut k4)?;
        for i in 0..n {
            y_new[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        field.eval(t_next, &y_new, &mut f_new)?;
        stats.evaluations += 4;
        stats.accepted += 1;
        if !all_finite(&y_new) || !all_finite(&f_new) {
            return Err(Error::Divergence { t: t_next });
        }
        let (y_ref, k_ref, fn_ref) = (&y, &k1, &f_new);
        let yn = &y_new;
        out.step(stats.accepted, t_next, &y_new, |ts, buf| {
            hermite(t, h, y_ref, k_ref, yn, fn_ref, ts, buf)
        });
        t = t_next;
        std::mem::swap(&mut y, &mut y_new);
        std::mem::swap(&mut k1, &mut f_new);
    }
    out.finish(t, &y);
    Ok(stats)
}

#[allow(clippy::too_many_arguments)]
fn hermite(t0: f64, h: f64, y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64], t: f64, out: &mut [f64]) {
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

fn dopri5<F, O>(field: &F, y0: &[f64], k0: Vec<f64>, opts: &IntegratorOptions, out: &mut Emitter<O>) -> Result<StepStats>
where
    F: VectorField + ?Sized,
    O: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut stats = StepStats { evaluations: 1, ..Default::default() };
    let span = opts.t_end - opts.t_start;
    let h_min = 1e-14 * span.max(opts.t_end.abs());
    let mut t = opts.t_start;
    let mut y = y0.to_vec();
    let mut k1 = k0;
    let z = || vec![0.0; n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (z(), z(), z(), z(), z(), z());
    let (mut tmp, mut y_new) = (z(), z());
    let mut rcont: [Vec<f64>; 5] = [z(), z(), z(), z(), z()];
    let mut h = opts.h0.min(opts.hmax);
    let mut rejected_last = false;

    while t < opts.t_end {
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= opts.t_end - 1e-12 * span;
        let h_step = if last { opts.t_end - t } else { h };

        for i in 0..n {
            tmp[i] = y[i] + h_step * A21 * k1[i];
        }
        field.eval(t + C2 * h_step, &tmp, &mut k2)?;
        for i in 0..n {
            tmp[i] = y[i] + h_step * (A31 * k1[i] + A32 * k2[i]);
        }
        field.eval(t + C3 * h_step, &tmp, &mut k3)?;
        for i in 0..n {
            tmp[i] = y[i] + h_step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        field.eval(t + C4 * h_step, &tmp, &mut k4)?;
        for i in 0..n {
            tmp[i] = y[i] + h_step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        field.eval(t + C5 * h_step, &tmp, &mut k5)?;
        for i in 0..n {
            tmp[i] = y[i] + h_step * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        field.eval(t + h_step, &tmp, &mut k6)?;
        for i in 0..n {
            y_new[i] = y[i] + h_step * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let t_new = if last { opts.t_end } else { t + h_step };
        field.eval(t_new, &y_new, &mut k7)?;
        stats.evaluations += 6;

        let mut err = 0.0f64;
        for i in 0..n {
            let e = h_step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() || !all_finite(&k7) {
            // a too-large step can overflow where a smaller one does not
            stats.rejected += 1;
            rejected_last = true;
            h = h_step * FAC_MIN;
            if h < h_min {
                return Err(Error::Divergence { t });
            }
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            if opts.sample_interval.is_some() {
                for i in 0..n {
                    let dy = y_new[i] - y[i];
                    let bspl = h_step * k1[i] - dy;
                    rcont[0][i] = y[i];
                    rcont[1][i] = dy;
                    rcont[2][i] = bspl;
                    rcont[3][i] = dy - h_step * k7[i] - bspl;
                    rcont[4][i] =
                        h_step * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
            }
            let rc = &rcont;
            let t_old = t;
            out.step(stats.accepted, t_new, &y_new, |ts, buf| {
                let s = (ts - t_old) / h_step;
                let s1 = 1.0 - s;
                for i in 0..buf.len() {
                    buf[i] = rc[0][i] + s * (rc[1][i] + s1 * (rc[2][i] + s * (rc[3][i] + s1 * rc[4][i])));
                }
            });
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            let mut fac = SAFETY * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if rejected_last {
                fac = fac.min(1.0);
            }
            rejected_last = false;
            if !last {
                h = (h_step * fac).min(opts.hmax);
            }
        } else {
            stats.rejected += 1;
            rejected_last = true;
            h = h_step * (SAFETY * err.powf(-0.2)).max(FAC_MIN);
        }
    }
    out.finish(t, &y);
    Ok(stats)
}
