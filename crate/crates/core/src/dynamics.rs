//! Right-hand sides of the reduced vehicle dynamics in both angle charts,
//! the planar reconstruction, the energy integral, the angle-variable system
//! on a fixed energy level, and the flows on the invariant manifolds.
//!
//! State vectors handed to the integrator use these layouts:
//!
//! | system            | layout                              | time |
//! |-------------------|-------------------------------------|------|
//! | [`FullSystem`]    | `v1, omega, phi_1..phi_N, x, y, psi` | t    |
//! | [`ThetaSystem`]   | `v1, omega, theta_1..theta_N`        | t    |
//! | [`SleighSystem`]  | `v1, omega`                          | t    |
//! | [`AngleSystem`]   | `vartheta, phi_1..phi_N`             | tau  |
//! | [`ManifoldSystem`]| `phi_1..phi_N`                       | tau  |

use std::f64::consts::TAU;

use crate::error::{invalid, Result};
use crate::integrator::{integrate, IntegratorOptions, VectorField};
use crate::model::{alt, shape_coeffs, theta_into, RotorProfile, ThetaCoords, Vehicle, VehicleParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub v1: f64,
    pub omega: f64,
    pub phi: Vec<f64>,
}

impl ReducedState {
    pub fn new(v1: f64, omega: f64, phi: Vec<f64>) -> Self {
        Self { v1, omega, phi }
    }

    pub fn links(&self) -> usize {
        self.phi.len()
    }

    pub fn is_finite(&self) -> bool {
        self.v1.is_finite() && self.omega.is_finite() && self.phi.iter().all(|p| p.is_finite())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PoseState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRates {
    pub v1_dot: f64,
    pub omega_dot: f64,
    pub phi_dot: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaRates {
    pub v1_dot: f64,
    pub omega_dot: f64,
    pub theta_dot: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRates {
    pub x_dot: f64,
    pub y_dot: f64,
    pub psi_dot: f64,
}

/// Runs `f` with a scratch slice of length `n`, on the stack for small `n`.
fn with_scratch<R>(n: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    let mut stack = [0.0; 16];
    if n <= stack.len() {
        f(&mut stack[..n])
    } else {
        f(&mut vec![0.0; n])
    }
}

/// `(v1_dot, omega_dot)` given the theta angles.
fn velocity_rates(vehicle: &Vehicle, rotor: &RotorProfile, t: f64, v1: f64, omega: f64, theta: &[f64]) -> Result<(f64, f64)> {
    let d = &vehicle.derived;
    let s = shape_coeffs(theta, d, &vehicle.params)?;
    let v1_dot = (d.static_moment * omega * omega + s.phi1 * v1 * v1 + s.phi2 * omega * v1) / s.phi0;
    let omega_dot = (-d.static_moment * omega * v1 - rotor.rate(t)) / d.inertia;
    Ok((v1_dot, omega_dot))
}

/// Hinge-angle rates `phi_i_dot = (-1)^i (v1 / c_i) sin(theta_i) - omega`.
fn hinge_rates(params: &VehicleParams, v1: f64, omega: f64, theta: &[f64], out: &mut [f64]) {
    for (i, ((o, &th), &c)) in out.iter_mut().zip(theta).zip(&params.hinge_distances).enumerate() {
        *o = alt(i + 1) * v1 / c * th.sin() - omega;
    }
}

/// Writes `[v1_dot, omega_dot, phi_dot..]` into `out`.
fn reduced_into(vehicle: &Vehicle, rotor: &RotorProfile, t: f64, v1: f64, omega: f64, phi: &[f64], out: &mut [f64]) -> Result<()> {
    with_scratch(phi.len(), |theta| {
        theta_into(phi, theta);
        let (v1_dot, omega_dot) = velocity_rates(vehicle, rotor, t, v1, omega, theta)?;
        out[0] = v1_dot;
        out[1] = omega_dot;
        hinge_rates(&vehicle.params, v1, omega, theta, &mut out[2..2 + phi.len()]);
        Ok(())
    })
}

/// Reduced equations in the hinge-angle chart.
pub fn reduced_rhs_phi(vehicle: &Vehicle, rotor: &RotorProfile, t: f64, s: &ReducedState) -> Result<ReducedRates> {
    let mut out = vec![0.0; 2 + s.links()];
    reduced_into(vehicle, rotor, t, s.v1, s.omega, &s.phi, &mut out)?;
    let phi_dot = out.split_off(2);
    Ok(ReducedRates {
        v1_dot: out[0],
        omega_dot: out[1],
        phi_dot,
    })
}

fn theta_rates(params: &VehicleParams, v1: f64, omega: f64, theta: &[f64], out: &mut [f64]) {
    // sum_{j<i} (v1 / c_j) sin(theta_j)
    let mut prefix = 0.0;
    for ((o, &th), &c) in out.iter_mut().zip(theta).zip(&params.hinge_distances) {
        let term = v1 / c * th.sin();
        *o = -term - 2.0 * prefix - omega;
        prefix += term;
    }
}

/// Reduced equations in the triangular theta chart.
pub fn reduced_rhs_theta(
    vehicle: &Vehicle,
    rotor: &RotorProfile,
    t: f64,
    v1: f64,
    omega: f64,
    theta: &ThetaCoords,
) -> Result<ThetaRates> {
    let (v1_dot, omega_dot) = velocity_rates(vehicle, rotor, t, v1, omega, theta)?;
    let mut theta_dot = vec![0.0; theta.len()];
    theta_rates(&vehicle.params, v1, omega, theta, &mut theta_dot);
    Ok(ThetaRates {
        v1_dot,
        omega_dot,
        theta_dot,
    })
}

pub fn pose_rhs(pose: &PoseState, v1: f64, omega: f64) -> PoseRates {
    let (s, c) = pose.psi.sin_cos();
    PoseRates {
        x_dot: v1 * c,
        y_dot: v1 * s,
        psi_dot: omega,
    }
}

/// Wheel-pair centers `r_C, r_C1, .., r_CN` in the fixed plane.
pub fn attachment_positions(pose: &PoseState, phi: &[f64], params: &VehicleParams) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(phi.len() + 1);
    out.push([pose.x, pose.y]);
    // r_C - 2 sum_{j<i} c_j tau_j
    let (mut hx, mut hy) = (pose.x, pose.y);
    for (&p, &c) in phi.iter().zip(&params.hinge_distances) {
        let (s, co) = (pose.psi + p).sin_cos();
        out.push([hx - c * co, hy - c * s]);
        hx -= 2.0 * c * co;
        hy -= 2.0 * c * s;
    }
    out
}

/// Lateral velocity of every wheel pair for arbitrary generalized velocities.
pub fn residuals_from_velocities(
    pose: &PoseState,
    phi: &[f64],
    params: &VehicleParams,
    pose_rates: &PoseRates,
    phi_dot: &[f64],
) -> Vec<f64> {
    let PoseRates { x_dot, y_dot, psi_dot } = *pose_rates;
    let (s0, c0) = pose.psi.sin_cos();
    let mut out = Vec::with_capacity(phi.len() + 1);
    out.push(-x_dot * s0 + y_dot * c0);
    let c = &params.hinge_distances;
    for i in 0..phi.len() {
        let (si, ci) = (pose.psi + phi[i]).sin_cos();
        let mut r = -x_dot * si + y_dot * ci - c[i] * (psi_dot + phi_dot[i]);
        for j in 0..i {
            r -= 2.0 * c[j] * (psi_dot + phi_dot[j]) * (phi[i] - phi[j]).cos();
        }
        out.push(r);
    }
    out
}

/// Constraint residuals with velocities taken from the reduced dynamics
/// itself; these vanish identically.
pub fn constraint_residuals(vehicle: &Vehicle, pose: &PoseState, s: &ReducedState) -> Vec<f64> {
    let rates = pose_rhs(pose, s.v1, s.omega);
    let mut phi_dot = vec![0.0; s.links()];
    with_scratch(s.links(), |theta| {
        theta_into(&s.phi, theta);
        hinge_rates(&vehicle.params, s.v1, s.omega, theta, &mut phi_dot);
    });
    residuals_from_velocities(pose, &s.phi, &vehicle.params, &rates, &phi_dot)
}

pub fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `E = Phi0 v1^2 / 2 + J omega^2 / 2`, conserved when the rotor is at rest.
pub fn energy(vehicle: &Vehicle, s: &ReducedState) -> Result<f64> {
    with_scratch(s.links(), |theta| {
        theta_into(&s.phi, theta);
        let sc = vehicle.shape_coeffs(theta)?;
        Ok(0.5 * sc.phi0 * s.v1 * s.v1 + 0.5 * vehicle.derived.inertia * s.omega * s.omega)
    })
}

/// Reduced state on a fixed energy level `h`, parameterized by `vartheta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSystemState {
    pub vartheta: f64,
    pub phi: Vec<f64>,
    pub h: f64,
}

impl AngleSystemState {
    /// Fixes `h` from the energy of `s`; requires `h > 0`.
    pub fn from_reduced(vehicle: &Vehicle, s: &ReducedState) -> Result<Self> {
        let h = energy(vehicle, s)?;
        if !(h > 0.0) {
            return Err(invalid("energy", "the angle variable needs a positive energy level"));
        }
        let phi0 = vehicle.shape_coeffs(&crate::model::theta_from_phi(&s.phi))?.phi0;
        Ok(Self {
            vartheta: vartheta_of(vehicle.derived.inertia, phi0, s.v1, s.omega),
            phi: s.phi.clone(),
            h,
        })
    }

    pub fn to_reduced(&self, vehicle: &Vehicle) -> Result<ReducedState> {
        let phi0 = vehicle.shape_coeffs(&crate::model::theta_from_phi(&self.phi))?.phi0;
        let (s, c) = self.vartheta.sin_cos();
        Ok(ReducedState {
            v1: (2.0 * self.h / phi0).sqrt() * c,
            omega: (2.0 * self.h / vehicle.derived.inertia).sqrt() * s,
            phi: self.phi.clone(),
        })
    }
}

/// `vartheta = atan2(omega sqrt(J), v1 sqrt(Phi0))` in `[0, 2 pi)`.
pub fn vartheta_of(inertia: f64, phi0: f64, v1: f64, omega: f64) -> f64 {
    (omega * inertia.sqrt()).atan2(v1 * phi0.sqrt()).rem_euclid(TAU)
}

/// `d tau / d t = sqrt(2 h / Phi0)`.
pub fn angle_time_rate(vehicle: &Vehicle, phi: &[f64], h: f64) -> Result<f64> {
    let phi0 = vehicle.shape_coeffs(&crate::model::theta_from_phi(phi))?.phi0;
    Ok((2.0 * h / phi0).sqrt())
}

/// Derivatives with respect to rescaled time `tau`: `(vartheta', phi')`.
pub fn angle_system_rhs(vehicle: &Vehicle, vartheta: f64, phi: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut out = vec![0.0; 1 + phi.len()];
    angle_into(vehicle, vartheta, phi, &mut out)?;
    let phi_dot = out.split_off(1);
    Ok((out[0], phi_dot))
}

fn angle_into(vehicle: &Vehicle, vartheta: f64, phi: &[f64], out: &mut [f64]) -> Result<()> {
    let d = &vehicle.derived;
    let (s, c) = vartheta.sin_cos();
    out[0] = -d.static_moment / d.inertia * s;
    with_scratch(phi.len(), |theta| {
        theta_into(phi, theta);
        let lift = (vehicle.shape_coeffs(theta)?.phi0 / d.inertia).sqrt() * s;
        for (i, ((o, &th), &ci)) in out[1..].iter_mut().zip(theta.iter()).zip(&vehicle.params.hinge_distances).enumerate() {
            *o = alt(i + 1) / ci * c * th.sin() - lift;
        }
        Ok(())
    })
}

/// Closed-form solution of `vartheta' = -rate sin(vartheta)`.
pub fn vartheta_closed_form(vartheta0: f64, rate: f64, tau: f64) -> f64 {
    2.0 * ((vartheta0 / 2.0).tan() * (-rate * tau).exp()).atan()
}

/// Which invariant manifold: `vartheta = 0` (`Plus`) or `vartheta = pi` (`Minus`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldSign {
    Plus,
    Minus,
}

impl ManifoldSign {
    pub fn value(self) -> f64 {
        match self {
            Self::Plus => 1.0,
            Self::Minus => -1.0,
        }
    }
}

/// Hinge-angle flow on an invariant manifold, `phi_i' = +-((-1)^i / c_i) sin(theta_i)`.
pub fn manifold_rhs(phi: &[f64], sign: ManifoldSign, params: &VehicleParams) -> Vec<f64> {
    let mut out = vec![0.0; phi.len()];
    manifold_into(phi, sign, params, &mut out);
    out
}

fn manifold_into(phi: &[f64], sign: ManifoldSign, params: &VehicleParams, out: &mut [f64]) {
    with_scratch(phi.len(), |theta| {
        theta_into(phi, theta);
        for (i, ((o, &th), &c)) in out.iter_mut().zip(theta.iter()).zip(&params.hinge_distances).enumerate() {
            *o = sign.value() * alt(i + 1) / c * th.sin();
        }
    })
}

/// Reduced system plus planar reconstruction.
#[derive(Debug, Clone)]
pub struct FullSystem<'a> {
    pub vehicle: &'a Vehicle,
    pub rotor: RotorProfile,
}

impl<'a> FullSystem<'a> {
    pub fn new(vehicle: &'a Vehicle, rotor: RotorProfile) -> Self {
        Self { vehicle, rotor }
    }

    pub fn pack(s: &ReducedState, pose: &PoseState) -> Vec<f64> {
        let mut y = Vec::with_capacity(s.links() + 5);
        y.extend([s.v1, s.omega]);
        y.extend(&s.phi);
        y.extend([pose.x, pose.y, pose.psi]);
        y
    }

    pub fn unpack(y: &[f64]) -> (ReducedState, PoseState) {
        let n = y.len() - 5;
        (
            ReducedState::new(y[0], y[1], y[2..2 + n].to_vec()),
            PoseState {
                x: y[2 + n],
                y: y[3 + n],
                psi: y[4 + n],
            },
        )
    }
}

impl VectorField for FullSystem<'_> {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = y.len() - 5;
        let (v1, omega, psi) = (y[0], y[1], y[4 + n]);
        reduced_into(self.vehicle, &self.rotor, t, v1, omega, &y[2..2 + n], dy)?;
        let (s, c) = psi.sin_cos();
        dy[2 + n] = v1 * c;
        dy[3 + n] = v1 * s;
        dy[4 + n] = omega;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ThetaSystem<'a> {
    pub vehicle: &'a Vehicle,
    pub rotor: RotorProfile,
}

impl VectorField for ThetaSystem<'_> {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (v1, omega, theta) = (y[0], y[1], &y[2..]);
        let (a, b) = velocity_rates(self.vehicle, &self.rotor, t, v1, omega, theta)?;
        dy[0] = a;
        dy[1] = b;
        theta_rates(&self.vehicle.params, v1, omega, theta, &mut dy[2..]);
        Ok(())
    }
}

/// The bare Chaplygin sleigh `m v1' = b omega^2, J omega' = -b omega v1 - kdot`,
/// which is what the velocity equations reduce to when every `mu_i = 0`.
#[derive(Debug, Clone)]
pub struct SleighSystem {
    pub total_mass: f64,
    pub inertia: f64,
    pub static_moment: f64,
    pub rotor: RotorProfile,
}

impl SleighSystem {
    pub fn for_vehicle(vehicle: &Vehicle, rotor: RotorProfile) -> Self {
        Self {
            total_mass: vehicle.derived.total_mass,
            inertia: vehicle.derived.inertia,
            static_moment: vehicle.derived.static_moment,
            rotor,
        }
    }
}

impl VectorField for SleighSystem {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let b = self.static_moment;
        dy[0] = b * y[1] * y[1] / self.total_mass;
        dy[1] = (-b * y[1] * y[0] - self.rotor.rate(t)) / self.inertia;
        Ok(())
    }
}

/// `(vartheta, phi)` in rescaled time.
#[derive(Debug, Clone)]
pub struct AngleSystem<'a> {
    pub vehicle: &'a Vehicle,
}

impl VectorField for AngleSystem<'_> {
    fn eval(&self, _tau: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        angle_into(self.vehicle, y[0], &y[1..], dy)
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldSystem<'a> {
    pub params: &'a VehicleParams,
    pub sign: ManifoldSign,
}

impl VectorField for ManifoldSystem<'_> {
    fn eval(&self, _tau: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        manifold_into(y, self.sign, self.params, dy);
        Ok(())
    }
}

/// Time-stamped record of a full simulation with per-sample diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ReducedState>,
    pub poses: Vec<PoseState>,
    pub energy: Vec<f64>,
    pub residual_max: Vec<f64>,
    pub rotor_momentum: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn links(&self) -> usize {
        self.states.first().map_or(0, ReducedState::links)
    }
}

/// Integrates the full system and evaluates diagnostics at every emitted sample.
pub fn simulate(
    vehicle: &Vehicle,
    rotor: RotorProfile,
    initial: &ReducedState,
    pose: &PoseState,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if initial.links() != vehicle.links() {
        return Err(invalid(
            "initial.phi",
            format!("has {} angles, vehicle has {} trailer platforms", initial.links(), vehicle.links()),
        ));
    }
    let system = FullSystem::new(vehicle, rotor);
    let sol = integrate(&system, &FullSystem::pack(initial, pose), opts)?;
    let mut traj = Trajectory {
        times: Vec::with_capacity(sol.times.len()),
        states: Vec::with_capacity(sol.times.len()),
        poses: Vec::with_capacity(sol.times.len()),
        energy: Vec::with_capacity(sol.times.len()),
        residual_max: Vec::with_capacity(sol.times.len()),
        rotor_momentum: Vec::with_capacity(sol.times.len()),
    };
    for (t, y) in sol.times.into_iter().zip(sol.states) {
        let (s, p) = FullSystem::unpack(&y);
        traj.energy.push(energy(vehicle, &s)?);
        traj.residual_max.push(max_abs(&constraint_residuals(vehicle, &p, &s)));
        traj.rotor_momentum.push(rotor.momentum(t).0);
        traj.times.push(t);
        traj.states.push(s);
        traj.poses.push(p);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{theta_from_phi, VehicleParams};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn reference() -> Vehicle {
        Vehicle::new(VehicleParams::three_link_reference()).unwrap()
    }

    #[test]
    fn straight_line_is_equilibrium() {
        let v = reference();
        let r = reduced_rhs_phi(&v, &RotorProfile::at_rest(), 0.0, &ReducedState::new(1.0, 0.0, vec![0.0, 0.0])).unwrap();
        assert_eq!(r.v1_dot, 0.0);
        assert_eq!(r.omega_dot, 0.0);
        assert_eq!(r.phi_dot, vec![0.0, 0.0]);
    }

    #[test]
    fn decoupled_spin_accelerates() {
        let v = Vehicle::new(VehicleParams::three_link_reference().with_decoupled_trailer()).unwrap();
        let s = ReducedState::new(0.0, 1.0, vec![0.4, -1.3]);
        let r = reduced_rhs_phi(&v, &RotorProfile::at_rest(), 0.0, &s).unwrap();
        assert_relative_eq!(r.v1_dot, 0.7 / 3.4, epsilon = 1e-15);
        assert_eq!(r.omega_dot, 0.0);
    }

    #[test]
    fn theta_chart_single_link() {
        let v = Vehicle::new(VehicleParams::three_link_reference().with_links(1).unwrap()).unwrap();
        let (v1, om, th) = (1.7, -0.3, 0.9);
        let r = reduced_rhs_theta(&v, &RotorProfile::at_rest(), 0.0, v1, om, &ThetaCoords::new(vec![th])).unwrap();
        assert_relative_eq!(r.theta_dot[0], -(v1 / 1.05) * th.sin() - om, epsilon = 1e-15);
        let r = reduced_rhs_theta(&reference(), &RotorProfile::at_rest(), 0.0, 2.0, 0.0, &ThetaCoords::new(vec![0.0; 2]))
            .unwrap();
        assert_eq!(r.theta_dot, vec![0.0, 0.0]);
    }

    #[test]
    fn pose_rhs_examples() {
        let r = pose_rhs(&PoseState { x: 0.0, y: 0.0, psi: PI / 2.0 }, 2.0, 0.3);
        assert!(r.x_dot.abs() < 1e-15);
        assert_relative_eq!(r.y_dot, 2.0);
        assert_eq!(r.psi_dot, 0.3);
        let r = pose_rhs(&PoseState::default(), 0.0, 0.0);
        assert_eq!((r.x_dot, r.y_dot, r.psi_dot), (0.0, 0.0, 0.0));
        let r = pose_rhs(&PoseState::default(), 1.0, 0.0);
        assert_eq!((r.x_dot, r.y_dot), (1.0, 0.0));
    }

    #[test]
    fn attachment_examples() {
        let mut p = VehicleParams::three_link_reference();
        p.hinge_distances = vec![1.0, 1.5];
        let pts = attachment_positions(&PoseState::default(), &[0.0, 0.0], &p);
        assert_eq!(pts, vec![[0.0, 0.0], [-1.0, 0.0], [-3.5, 0.0]]);

        let sleigh = VehicleParams::chaplygin_sleigh(1.0, 1.0, 0.5);
        assert_eq!(attachment_positions(&PoseState { x: 2.0, y: 1.0, psi: 0.3 }, &[], &sleigh), vec![[2.0, 1.0]]);

        let one = VehicleParams::three_link_reference().with_links(1).map(|mut q| {
            q.hinge_distances = vec![1.0];
            q
        });
        let pts = attachment_positions(&PoseState::default(), &[PI], &one.unwrap());
        assert_relative_eq!(pts[1][0], 1.0, epsilon = 1e-15);
        assert!(pts[1][1].abs() < 1e-15);
    }

    #[test]
    fn residuals_vanish_on_straight_line_and_detect_faults() {
        let v = reference();
        let s = ReducedState::new(3.0, 0.0, vec![0.0, 0.0]);
        let pose = PoseState::default();
        assert!(max_abs(&constraint_residuals(&v, &pose, &s)) == 0.0);

        let eps = 1e-3;
        let mut rates = pose_rhs(&pose, s.v1, s.omega);
        rates.y_dot += eps;
        let r = residuals_from_velocities(&pose, &s.phi, &v.params, &rates, &[0.0, 0.0]);
        assert_eq!(r[0], eps);
    }

    #[test]
    fn energy_examples() {
        let v = reference();
        assert_relative_eq!(energy(&v, &ReducedState::new(1.0, 0.0, vec![0.0, 0.0])).unwrap(), 1.7, epsilon = 1e-15);
        assert_eq!(energy(&v, &ReducedState::new(0.0, 0.0, vec![0.3, 0.1])).unwrap(), 0.0);
    }

    #[test]
    fn angle_system_fixed_families() {
        let v = reference();
        for vt in [0.0, PI] {
            let (d, _) = angle_system_rhs(&v, vt, &[0.3, 1.0]).unwrap();
            assert!(d.abs() < 1e-16);
        }
    }

    #[test]
    fn angle_system_matches_rescaled_reduced_rates() {
        let v = reference();
        let s = ReducedState::new(1.3, -0.7, vec![0.4, 2.1]);
        let a = AngleSystemState::from_reduced(&v, &s).unwrap();
        let back = a.to_reduced(&v).unwrap();
        assert_relative_eq!(back.v1, s.v1, epsilon = 1e-14);
        assert_relative_eq!(back.omega, s.omega, epsilon = 1e-14);
        let (_, dphi_tau) = angle_system_rhs(&v, a.vartheta, &a.phi).unwrap();
        let dphi_t = reduced_rhs_phi(&v, &RotorProfile::at_rest(), 0.0, &s).unwrap().phi_dot;
        let rate = angle_time_rate(&v, &s.phi, a.h).unwrap();
        for (x, y) in dphi_tau.iter().zip(&dphi_t) {
            assert_relative_eq!(x * rate, *y, epsilon = 1e-13);
        }
    }

    #[test]
    fn vartheta_closed_form_value() {
        let x = vartheta_closed_form(PI / 2.0, 1.0, 2.0f64.ln());
        assert_relative_eq!(x, 2.0 * 0.5f64.atan(), epsilon = 1e-15);
        assert!((x - 0.92730).abs() < 1e-5);
    }

    #[test]
    fn manifold_fixed_points_and_reversal() {
        let p = VehicleParams::three_link_reference();
        assert_eq!(manifold_rhs(&[0.0, 0.0], ManifoldSign::Plus, &p), vec![0.0, 0.0]);
        for x in manifold_rhs(&[PI, PI], ManifoldSign::Minus, &p) {
            assert!(x.abs() < 1e-15);
        }
        let phi = [0.7, -2.0];
        let plus = manifold_rhs(&phi, ManifoldSign::Plus, &p);
        let minus = manifold_rhs(&phi, ManifoldSign::Minus, &p);
        for (a, b) in plus.iter().zip(&minus) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn full_system_pack_roundtrip() {
        let s = ReducedState::new(1.0, 2.0, vec![3.0, 4.0]);
        let p = PoseState { x: 5.0, y: 6.0, psi: 7.0 };
        let y = FullSystem::pack(&s, &p);
        assert_eq!(y, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(FullSystem::unpack(&y), (s, p));
    }

    #[test]
    fn theta_system_agrees_with_theta_rhs() {
        let v = reference();
        let rotor = RotorProfile::sine(0.05, 1.0).unwrap();
        let th = theta_from_phi(&[0.5, 0.5]);
        let r = reduced_rhs_theta(&v, &rotor, 0.3, 10.0, 1.0, &th).unwrap();
        let mut dy = vec![0.0; 4];
        ThetaSystem { vehicle: &v, rotor }.eval(0.3, &[10.0, 1.0, th[0], th[1]], &mut dy).unwrap();
        assert_eq!(dy, vec![r.v1_dot, r.omega_dot, r.theta_dot[0], r.theta_dot[1]]);
    }

    #[test]
    fn simulate_rejects_wrong_angle_count() {
        let v = reference();
        let err = simulate(
            &v,
            RotorProfile::at_rest(),
            &ReducedState::new(1.0, 0.0, vec![0.0]),
            &PoseState::default(),
            &IntegratorOptions::default(),
        );
        assert!(err.is_err());
    }
}
