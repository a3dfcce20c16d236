//! Mass-geometry of the vehicle, the reduced constants, the angle change of
//! variables between hinge angles and the "theta" chart, the shape functions
//! of the kinetic energy, and the rotor momentum profile.
//!
//! Indexing: platform 0 is the leading sleigh, trailer platforms are
//! `1..=N`. Vectors over trailer platforms (`hinge_distances`, `mass_offsets`,
//! `mu`, `phi`, `theta`) are stored zero-based, so element `i - 1` belongs to
//! platform `i`.

use std::f64::consts::PI;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Raw mass-geometric characteristics of an (N+1)-link vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// `m_0..=m_N`.
    pub masses: Vec<f64>,
    /// Central moments of inertia `I_0..=I_N`.
    pub inertias: Vec<f64>,
    /// Offset `a_0` of the sleigh center of mass from its wheel pair.
    pub sleigh_offset: f64,
    /// `c_1..=c_N`: hinge to wheel-pair distance of each trailer platform.
    pub hinge_distances: Vec<f64>,
    /// `a_1..=a_N`: center-of-mass offset of each trailer platform.
    pub mass_offsets: Vec<f64>,
}

impl VehicleParams {
    /// The three-link vehicle used for the speedup experiment:
    /// `a0=0.7, m0=1, I0=1.5, m1=m2=1.2, I1=I2=2, a1=0.1, a2=0.2, c1=1.05, c2=1.10`.
    pub fn three_link_reference() -> Self {
        Self {
            masses: vec![1.0, 1.2, 1.2],
            inertias: vec![1.5, 2.0, 2.0],
            sleigh_offset: 0.7,
            hinge_distances: vec![1.05, 1.10],
            mass_offsets: vec![0.1, 0.2],
        }
    }

    /// A bare Chaplygin sleigh (N = 0).
    pub fn chaplygin_sleigh(mass: f64, inertia: f64, offset: f64) -> Self {
        Self {
            masses: vec![mass],
            inertias: vec![inertia],
            sleigh_offset: offset,
            hinge_distances: Vec::new(),
            mass_offsets: Vec::new(),
        }
    }

    /// Number of trailer platforms N.
    pub fn links(&self) -> usize {
        self.hinge_distances.len()
    }

    /// Extends (or truncates) the trailer to `n` platforms, repeating the last
    /// trailer platform when growing.
    pub fn with_links(&self, n: usize) -> Result<Self> {
        let cur = self.links();
        if n > cur && cur == 0 {
            return Err(invalid("hinge_distances", "cannot extend a vehicle without trailer platforms"));
        }
        let mut out = self.clone();
        out.masses.truncate(n + 1);
        out.inertias.truncate(n + 1);
        out.hinge_distances.truncate(n);
        out.mass_offsets.truncate(n);
        while out.links() < n {
            out.masses.push(self.masses[cur]);
            out.inertias.push(self.inertias[cur]);
            out.hinge_distances.push(self.hinge_distances[cur - 1]);
            out.mass_offsets.push(self.mass_offsets[cur - 1]);
        }
        Ok(out)
    }

    /// Replaces every trailer inertia by `m_i a_i (2 c_i - a_i)`, the value for
    /// which the shape coefficient `mu_i` vanishes.
    pub fn with_decoupled_trailer(&self) -> Self {
        let mut out = self.clone();
        for i in 1..=self.links() {
            let (m, a, c) = (self.masses[i], self.mass_offsets[i - 1], self.hinge_distances[i - 1]);
            out.inertias[i] = m * a * (2.0 * c - a);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.links();
        if self.masses.len() != n + 1 || self.inertias.len() != n + 1 || self.mass_offsets.len() != n {
            return Err(invalid(
                "array lengths",
                format!(
                    "masses ({}) and inertias ({}) need N+1 entries, hinge_distances ({}) and \
                     mass_offsets ({}) need N entries",
                    self.masses.len(),
                    self.inertias.len(),
                    n,
                    self.mass_offsets.len()
                ),
            ));
        }
        check_each("masses", &self.masses, |x| x > 0.0, "must be > 0")?;
        check_each("inertias", &self.inertias, |x| x >= 0.0, "must be >= 0")?;
        check_each("hinge_distances", &self.hinge_distances, |x| x > 0.0, "must be > 0")?;
        check_each("mass_offsets", &self.mass_offsets, |x| x >= 0.0, "must be >= 0")?;
        if !(self.sleigh_offset.is_finite() && self.sleigh_offset >= 0.0) {
            return Err(invalid("sleigh_offset", "must be finite and >= 0"));
        }
        Ok(())
    }
}

fn check_each(name: &str, xs: &[f64], ok: impl Fn(f64) -> bool, reason: &str) -> Result<()> {
    match xs.iter().position(|&x| !(x.is_finite() && ok(x))) {
        Some(i) => Err(invalid(format!("{name}[{i}]"), format!("{} {reason}", xs[i]))),
        None => Ok(()),
    }
}

/// Reduced constants entering the equations of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    /// `J = I_0 + m_0 a_0^2`.
    pub inertia: f64,
    /// `m = sum m_i`.
    pub total_mass: f64,
    /// `b = m_0 a_0`.
    pub static_moment: f64,
    /// `mu_i = (I_i + m_i a_i (a_i - 2 c_i)) / c_i^2`; may be negative.
    pub mu: Vec<f64>,
}

pub fn derive_params(p: &VehicleParams) -> Result<DerivedParams> {
    p.validate()?;
    let inertia = p.inertias[0] + p.masses[0] * p.sleigh_offset * p.sleigh_offset;
    if inertia <= 0.0 {
        return Err(invalid("inertias[0]", "effective sleigh inertia I0 + m0 a0^2 must be > 0"));
    }
    let mu = (1..=p.links())
        .map(|i| {
            let (m, a, c) = (p.masses[i], p.mass_offsets[i - 1], p.hinge_distances[i - 1]);
            (p.inertias[i] + m * a * (a - 2.0 * c)) / (c * c)
        })
        .collect();
    Ok(DerivedParams {
        inertia,
        total_mass: p.masses.iter().sum(),
        static_moment: p.masses[0] * p.sleigh_offset,
        mu,
    })
}

/// Validated parameters bundled with their reduced constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub params: VehicleParams,
    pub derived: DerivedParams,
}

impl Vehicle {
    pub fn new(params: VehicleParams) -> Result<Self> {
        let derived = derive_params(&params)?;
        Ok(Self { params, derived })
    }

    pub fn links(&self) -> usize {
        self.params.links()
    }

    pub fn shape_coeffs(&self, theta: &[f64]) -> Result<ShapeCoeffs> {
        shape_coeffs(theta, &self.derived, &self.params)
    }
}

/// `(-1)^i` for a one-based platform index.
#[inline]
pub(crate) fn alt(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Angles in the triangularizing chart, `theta = B phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCoords(Vec<f64>);

impl ThetaCoords {
    pub fn new(theta: Vec<f64>) -> Self {
        Self(theta)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ThetaCoords {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `theta_i = (-1)^(i+1) phi_i + 2 sum_{j<i} (-1)^(j+1) phi_j`.
pub fn theta_from_phi(phi: &[f64]) -> ThetaCoords {
    let mut out = vec![0.0; phi.len()];
    theta_into(phi, &mut out);
    ThetaCoords(out)
}

pub(crate) fn theta_into(phi: &[f64], theta: &mut [f64]) {
    // running = sum_{j<i} (-1)^(j+1) phi_j
    let mut running = 0.0;
    for (i, (&p, th)) in phi.iter().zip(theta.iter_mut()).enumerate() {
        let signed = -alt(i + 1) * p;
        *th = signed + 2.0 * running;
        running += signed;
    }
}

/// Inverse of [`theta_from_phi`] by forward substitution.
pub fn phi_from_theta(theta: &ThetaCoords) -> Vec<f64> {
    let mut running = 0.0;
    theta
        .iter()
        .enumerate()
        .map(|(i, &th)| {
            let signed = th - 2.0 * running;
            running += signed;
            -alt(i + 1) * signed
        })
        .collect()
}

/// Integer matrix `B` with `theta = B phi`.
pub fn unimodular_matrix(n: usize) -> Vec<Vec<i64>> {
    (1..=n)
        .map(|i| {
            (1..=n)
                .map(|j| match j.cmp(&i) {
                    std::cmp::Ordering::Less => 2 * if j % 2 == 1 { 1 } else { -1 },
                    std::cmp::Ordering::Equal => if i % 2 == 1 { 1 } else { -1 },
                    std::cmp::Ordering::Greater => 0,
                })
                .collect()
        })
        .collect()
}

/// Coefficients of the reduced kinetic energy and of the `v1` equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeCoeffs {
    pub phi0: f64,
    pub phi1: f64,
    pub phi2: f64,
}

/// Evaluates `Phi0, Phi1, Phi2` at `theta`. Fails when `Phi0 <= 0`, which can
/// only happen when some `mu_i` is negative.
pub fn shape_coeffs(theta: &[f64], d: &DerivedParams, p: &VehicleParams) -> Result<ShapeCoeffs> {
    let mut phi0 = d.total_mass;
    let mut phi1 = 0.0;
    let mut phi2 = 0.0;
    // sum_{j<i} sin(theta_j) / c_j
    let mut prefix = 0.0;
    for ((&th, &mu), &c) in theta.iter().zip(&d.mu).zip(&p.hinge_distances) {
        let (s, co) = th.sin_cos();
        let s2 = 2.0 * s * co;
        phi0 += mu * s * s;
        phi1 += mu * s2 * (s / (2.0 * c) + prefix);
        phi2 += 0.5 * mu * s2;
        prefix += s / c;
    }
    if phi0 > 0.0 {
        Ok(ShapeCoeffs { phi0, phi1, phi2 })
    } else {
        Err(Error::DegenerateKineticEnergy { phi0 })
    }
}

/// Prescribed angular momentum `k(t)` of the rotor on the sleigh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotorProfile {
    /// `k(t) = value`; a rotor at rest is `Constant { value: 0.0 }`.
    Constant { value: f64 },
    /// `k(t) = amplitude * sin(2 pi t / period)`.
    Sine { amplitude: f64, period: f64 },
}

impl RotorProfile {
    pub fn at_rest() -> Self {
        Self::Constant { value: 0.0 }
    }

    pub fn sine(amplitude: f64, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(invalid("rotor.period", "must be finite and > 0"));
        }
        if !amplitude.is_finite() {
            return Err(invalid("rotor.amplitude", "must be finite"));
        }
        Ok(Self::Sine { amplitude, period })
    }

    /// Returns `(k(t), dk/dt(t))`.
    pub fn momentum(&self, t: f64) -> (f64, f64) {
        match *self {
            Self::Constant { value } => (value, 0.0),
            Self::Sine { amplitude, period } => {
                let w = 2.0 * PI / period;
                let (s, c) = (w * t).sin_cos();
                (amplitude * s, amplitude * w * c)
            }
        }
    }

    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        self.momentum(t).1
    }

    /// Forcing period; `None` for a constant profile.
    pub fn period(&self) -> Option<f64> {
        match *self {
            Self::Constant { .. } => None,
            Self::Sine { period, .. } => Some(period),
        }
    }

    /// Closed-form period average of `kdot^2`.
    pub fn mean_square_rate(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Sine { amplitude, period } => {
                let a = amplitude * 2.0 * PI / period;
                0.5 * a * a
            }
        }
    }

    pub fn max_abs_rate(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Sine { amplitude, period } => (amplitude * 2.0 * PI / period).abs(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant { .. })
    }
}

/// Period average of `kdot^2` by the `n`-point trapezoidal rule, which is
/// spectrally accurate for smooth periodic integrands.
pub fn mean_square_rate_quadrature(rotor: &RotorProfile, period: f64, n: usize) -> f64 {
    let h = period / n as f64;
    (0..n).map(|i| rotor.rate(i as f64 * h).powi(2)).sum::<f64>() / n as f64
}
