//! Rigid-body quadrotor plant.
//!
//! Convention: inertial z points up, gravity is `[0, 0, -9.81]`, body z is the
//! thrust axis and collective thrust `tz` is a non-negative magnitude along it.
//!
//! Motor numbering follows the X-configuration mixing matrix below (thrust units,
//! `c = l/√2`, `k = kM/kF`):
//!
//! ```text
//! τx = c (−T1 + T2 + T3 − T4)
//! τy = c ( T1 − T2 + T3 − T4)
//! τz = k ( T1 + T2 − T3 − T4)
//! tz =     T1 + T2 + T3 + T4
//! ```

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::so3::{hat, orthonormalize, Mat3, RotationMatrix, Vec3};

/// Default simulator step (s).
pub const DEFAULT_DT: f64 = 0.001;
/// Largest step `step` accepts (s).
pub const MAX_DT: f64 = 0.01;
/// Linear speed above which the simulation is considered blown up (m/s).
pub const MAX_SPEED: f64 = 100.0;
/// Angular speed above which the simulation is considered blown up (rad/s).
pub const MAX_RATE: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsError {
    InvalidParams(&'static str),
    InvalidStep(f64),
    SimulationDiverged,
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsError::InvalidParams(what) => write!(f, "invalid quad parameters: {what}"),
            DynamicsError::InvalidStep(dt) => write!(f, "time step {dt} outside (0, {MAX_DT}]"),
            DynamicsError::SimulationDiverged => f.write_str("simulation diverged"),
        }
    }
}

impl core::error::Error for DynamicsError {}

/// Physical constants of the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadParams {
    /// Mass (kg).
    pub mass: f64,
    /// Inertia about the body axes (kg·m²).
    pub inertia: Mat3,
    /// Arm length (m).
    pub arm_length: f64,
    /// Lift coefficient kF (N·s²/rad²).
    pub k_f: f64,
    /// Moment coefficient kM (N·m·s²/rad²).
    pub k_m: f64,
    /// Gravity acceleration (m/s²).
    pub gravity: Vec3,
    /// Per-motor thrust bounds (N).
    pub thrust_min: f64,
    pub thrust_max: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: Mat3::diag(Vec3::new(0.01, 0.01, 0.02)),
            arm_length: 0.17,
            k_f: 8e-6,
            k_m: 1e-7,
            gravity: Vec3::new(0.0, 0.0, -9.81),
            thrust_min: 0.0,
            thrust_max: 6.0,
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let j = &self.inertia;
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(DynamicsError::InvalidParams("mass must be positive"));
        }
        if !j.is_finite() || (*j - j.transpose()).frobenius_norm() > 1e-12 {
            return Err(DynamicsError::InvalidParams("inertia must be symmetric"));
        }
        // Sylvester's criterion on leading minors.
        let m = &j.0;
        let minor2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if !(m[0][0] > 0.0 && minor2 > 0.0 && j.det() > 0.0) {
            return Err(DynamicsError::InvalidParams("inertia must be positive definite"));
        }
        if !(self.arm_length > 0.0) {
            return Err(DynamicsError::InvalidParams("arm length must be positive"));
        }
        if !(self.k_f > 0.0) {
            return Err(DynamicsError::InvalidParams("lift coefficient must be positive"));
        }
        if !(self.k_m > 0.0) {
            return Err(DynamicsError::InvalidParams("moment coefficient must be positive"));
        }
        if !self.gravity.is_finite() {
            return Err(DynamicsError::InvalidParams("gravity must be finite"));
        }
        if !(self.thrust_min >= 0.0 && self.thrust_min < self.thrust_max && self.thrust_max.is_finite()) {
            return Err(DynamicsError::InvalidParams(
                "thrust bounds must satisfy 0 <= thrust_min < thrust_max",
            ));
        }
        Ok(())
    }

    /// Per-motor thrust that balances gravity with zero torque.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity.norm() / 4.0
    }

    #[inline]
    fn half_arm(&self) -> f64 {
        self.arm_length / core::f64::consts::SQRT_2
    }

    #[inline]
    fn yaw_ratio(&self) -> f64 {
        self.k_m / self.k_f
    }

    /// Rotor speed (rad/s) producing `thrust` under `F = kF ω²`.
    pub fn rotor_speed(&self, thrust: f64) -> f64 {
        libm::sqrt(thrust.max(0.0) / self.k_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadState {
    /// Body to inertial rotation.
    pub r: RotationMatrix,
    /// Body angular velocity (rad/s).
    pub omega: Vec3,
    /// Inertial position (m).
    pub x: Vec3,
    /// Inertial velocity (m/s).
    pub v: Vec3,
}

impl QuadState {
    pub fn at_rest(x: Vec3) -> Self {
        Self { r: RotationMatrix::IDENTITY, omega: Vec3::ZERO, x, v: Vec3::ZERO }
    }

    /// Finite and within the speed/rate sanity bounds.
    pub fn is_sane(&self) -> bool {
        self.r.as_mat().is_finite()
            && self.omega.is_finite()
            && self.x.is_finite()
            && self.v.is_finite()
            && self.v.norm() < MAX_SPEED
            && self.omega.norm() < MAX_RATE
    }
}

/// Per-motor thrusts (N).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotorCommand(pub [f64; 4]);

impl MotorCommand {
    pub fn splat(t: f64) -> Self {
        MotorCommand([t; 4])
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|t| t * t).sum())
    }

    pub fn clamped(&self, p: &QuadParams) -> (MotorCommand, bool) {
        let mut saturated = false;
        let mut out = self.0;
        for t in &mut out {
            let c = t.clamp(p.thrust_min, p.thrust_max);
            // NaN never compares equal, so it is reported as saturation too.
            saturated |= c != *t;
            *t = c;
        }
        (MotorCommand(out), saturated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneralizedForce {
    /// Body torque (N·m).
    pub tau: Vec3,
    /// Collective thrust along +body z (N).
    pub tz: f64,
}

/// Result of inverting the mixer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub command: MotorCommand,
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadStateDerivative {
    pub r_dot: Mat3,
    pub omega_dot: Vec3,
    pub x_dot: Vec3,
    pub v_dot: Vec3,
}

pub fn mix_forward(cmd: &MotorCommand, p: &QuadParams) -> GeneralizedForce {
    let [t1, t2, t3, t4] = cmd.0;
    let c = p.half_arm();
    let k = p.yaw_ratio();
    GeneralizedForce {
        tau: Vec3::new(
            c * (-t1 + t2 + t3 - t4),
            c * (t1 - t2 + t3 - t4),
            k * (t1 + t2 - t3 - t4),
        ),
        tz: t1 + t2 + t3 + t4,
    }
}

/// Exact inverse of [`mix_forward`] followed by clamping to the thrust bounds.
///
/// The mixing rows are mutually orthogonal sign patterns, so the inverse is the
/// scaled transpose.
pub fn mix_inverse(f: &GeneralizedForce, p: &QuadParams) -> Allocation {
    let sx = f.tau.x / p.half_arm();
    let sy = f.tau.y / p.half_arm();
    let sz = f.tau.z / p.yaw_ratio();
    let raw = MotorCommand([
        0.25 * (-sx + sy + sz + f.tz),
        0.25 * (sx - sy + sz + f.tz),
        0.25 * (sx + sy - sz + f.tz),
        0.25 * (-sx - sy - sz + f.tz),
    ]);
    let (command, saturated) = raw.clamped(p);
    Allocation { command, saturated }
}

/// Continuous-time rigid-body dynamics.
pub fn state_derivative(s: &QuadState, f: &GeneralizedForce, p: &QuadParams) -> QuadStateDerivative {
    let r = s.r.as_mat();
    let j = &p.inertia;
    let j_inv = j.inverse().expect("inertia validated as positive definite");
    let gyro = s.omega.cross(*j * s.omega);
    QuadStateDerivative {
        r_dot: *r * hat(s.omega),
        omega_dot: j_inv * (f.tau - gyro),
        x_dot: s.v,
        v_dot: *r * Vec3::new(0.0, 0.0, f.tz) / p.mass + p.gravity,
    }
}

/// One explicit-Euler step under `cmd` (clamped to the thrust bounds first),
/// followed by re-projection of the attitude onto SO(3).
pub fn step(
    s: &QuadState,
    cmd: &MotorCommand,
    dt: f64,
    p: &QuadParams,
) -> Result<QuadState, DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let (cmd, _) = cmd.clamped(p);
    let d = state_derivative(s, &mix_forward(&cmd, p), p);
    let r_next = *s.r.as_mat() + d.r_dot.scale(dt);
    let r = orthonormalize(r_next).map_err(|_| DynamicsError::SimulationDiverged)?;
    let next = QuadState {
        r,
        omega: s.omega + d.omega_dot * dt,
        x: s.x + d.x_dot * dt,
        v: s.v + d.v_dot * dt,
    };
    if !next.is_sane() {
        return Err(DynamicsError::SimulationDiverged);
    }
    Ok(next)
}
