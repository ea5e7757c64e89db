//! Trajectory tracking and perch-attitude control down to motor thrusts.
//!
//! Outer translational loop: PD on position/velocity plus acceleration feed
//! forward gives the desired acceleration `a_c`; the thrust vector
//! `f = m (a_c − g)` fixes the collective thrust and the desired body z axis,
//! and the reference yaw fixes the rest of the desired attitude. Within
//! `epsilon` of the wall the desired attitude is replaced by the perch attitude.
//! Attitude is then tracked by a proportional loop on the SO(3) error producing
//! a rate command, and a PID rate loop producing an angular-acceleration
//! command, which is turned into torque and mixed to the four motors.

use core::f64::consts::FRAC_PI_2;
use core::fmt;

use libm::{cos, sin};
use serde::{Deserialize, Serialize};

use crate::dynamics::{mix_inverse, GeneralizedForce, MotorCommand, QuadParams, QuadState};
use crate::so3::{rotation_error, Mat3, RotationMatrix, Vec3};
use crate::trajgen::TrajectorySample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlError {
    /// The desired thrust axis is parallel to the heading direction.
    SingularHeading,
    /// `a_c − g` vanishes, so no thrust axis is defined.
    ZeroThrustDemand,
    InvalidGains(&'static str),
    InvalidSwitch(&'static str),
}

impl fmt::Display for ControlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlError::SingularHeading => f.write_str("desired thrust axis is parallel to the heading axis"),
            ControlError::ZeroThrustDemand => f.write_str("commanded acceleration cancels gravity exactly"),
            ControlError::InvalidGains(what) => write!(f, "invalid gains: {what}"),
            ControlError::InvalidSwitch(what) => write!(f, "invalid attitude switch config: {what}"),
        }
    }
}

impl core::error::Error for ControlError {}

/// Diagonal controller gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gains {
    pub kx: Vec3,
    pub kv: Vec3,
    pub kr: Vec3,
    pub kp: Vec3,
    pub ki: Vec3,
    pub kd: Vec3,
    /// Per-axis bound on the integral contribution `Ki ∘ ∫e_Ω` (rad/s²).
    pub integral_limit: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            kx: Vec3::splat(6.0),
            kv: Vec3::splat(4.0),
            kr: Vec3::splat(8.0),
            kp: Vec3::splat(20.0),
            ki: Vec3::splat(2.0),
            kd: Vec3::splat(0.2),
            integral_limit: 10.0,
        }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<(), ControlError> {
        let pos = |v: Vec3| v.x > 0.0 && v.y > 0.0 && v.z > 0.0;
        if !(pos(self.kx) && pos(self.kv) && pos(self.kr) && pos(self.kp) && pos(self.ki)) {
            return Err(ControlError::InvalidGains("Kx, Kv, KR, Kp, Ki must be positive"));
        }
        if !(self.kd.x >= 0.0 && self.kd.y >= 0.0 && self.kd.z >= 0.0) {
            return Err(ControlError::InvalidGains("Kd must be non-negative"));
        }
        if !(self.integral_limit > 0.0) {
            return Err(ControlError::InvalidGains("integral_limit must be positive"));
        }
        Ok(())
    }
}

/// Switch to the perch attitude and the final-stage thrust schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttitudeSwitchConfig {
    /// Wall distance below which the perch attitude is commanded (m).
    pub epsilon: f64,
    pub perch_attitude: RotationMatrix,
    /// Once switched, stay switched.
    pub latch: bool,
    /// Collective thrust at the end of the final-stage ramp (N).
    pub terminal_thrust: f64,
    /// Duration of the linear thrust ramp after the switch (s).
    pub decay_time: f64,
}

impl Default for AttitudeSwitchConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            perch_attitude: RotationMatrix::rot_y(FRAC_PI_2),
            latch: true,
            terminal_thrust: 2.0,
            decay_time: 0.1,
        }
    }
}

impl AttitudeSwitchConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.epsilon > 0.0) {
            return Err(ControlError::InvalidSwitch("epsilon must be positive"));
        }
        if !(self.terminal_thrust >= 0.0) {
            return Err(ControlError::InvalidSwitch("terminal_thrust must be non-negative"));
        }
        if !(self.decay_time >= 0.0) {
            return Err(ControlError::InvalidSwitch("decay_time must be non-negative"));
        }
        Ok(())
    }

    /// Thrust `elapsed` seconds after the switch, starting from `start`.
    pub fn thrust_schedule(&self, start: f64, elapsed: f64) -> f64 {
        if elapsed >= self.decay_time {
            return self.terminal_thrust;
        }
        let s = (elapsed / self.decay_time).max(0.0);
        start + (self.terminal_thrust - start) * s
    }
}

/// `a_c = Kx∘(x_ref − x) + Kv∘(v_ref − v) + a_ref`.
pub fn tracking_accel(x_f: Vec3, v_f: Vec3, r: &TrajectorySample, k: &Gains) -> Vec3 {
    k.kx.hadamard(r.x - x_f) + k.kv.hadamard(r.v - v_f) + r.a
}

/// Collective thrust and desired attitude realising `a_c` with heading `psi`.
pub fn thrust_and_attitude(
    a_c: Vec3,
    psi: f64,
    p: &QuadParams,
) -> Result<(f64, RotationMatrix), ControlError> {
    let f = (a_c - p.gravity) * p.mass;
    let t_c = f.norm();
    if !(t_c > 0.0) {
        return Err(ControlError::ZeroThrustDemand);
    }
    let b_z = f / t_c;
    let e_y = Vec3::new(-sin(psi), cos(psi), 0.0);
    let bx_raw = e_y.cross(b_z);
    let n = bx_raw.norm();
    if n < 1e-6 {
        return Err(ControlError::SingularHeading);
    }
    let b_x = bx_raw / n;
    let by_raw = b_z.cross(b_x);
    let b_y = by_raw / by_raw.norm();
    let r = RotationMatrix::new(Mat3::from_cols(b_x, b_y, b_z))
        .expect("cross-product frame is orthonormal and right-handed");
    Ok((t_c, r))
}

/// Tracking attitude at or beyond `epsilon`, the perch attitude inside it.
pub fn select_attitude(d_x: f64, cfg: &AttitudeSwitchConfig, r_traj: &RotationMatrix) -> RotationMatrix {
    if d_x >= cfg.epsilon {
        *r_traj
    } else {
        cfg.perch_attitude
    }
}

/// `Ω_c = KR ∘ e_R(R_c, R_f) + Ω_ref`.
pub fn attitude_outer(r_c: &RotationMatrix, r_f: &RotationMatrix, omega_ref: Vec3, k: &Gains) -> Vec3 {
    k.kr.hadamard(rotation_error(r_c, r_f)) + omega_ref
}

/// Memory of the rate PID loop.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateLoopState {
    pub integral: Vec3,
    pub prev_error: Vec3,
    /// `None` before the first update.
    pub prev_t: Option<f64>,
}

/// Rate PID: returns the angular-acceleration command and the updated state.
///
/// `e_Ω = R_fᵀ R_c Ω_c − Ω_f`; trapezoidal integral clamped so that
/// `|Ki ∘ ∫e_Ω| ≤ integral_limit` per axis; backward-difference derivative,
/// zero on the first update.
pub fn attitude_inner(
    omega_c: Vec3,
    omega_f: Vec3,
    r_c: &RotationMatrix,
    r_f: &RotationMatrix,
    state: &RateLoopState,
    k: &Gains,
    dt: f64,
) -> (Vec3, RateLoopState) {
    let e = (r_f.transpose() * *r_c) * omega_c - omega_f;
    let first = state.prev_t.is_none();
    let bound = Vec3::new(
        k.integral_limit / k.ki.x,
        k.integral_limit / k.ki.y,
        k.integral_limit / k.ki.z,
    );
    let integral = if first {
        e * dt
    } else {
        state.integral + (e + state.prev_error) * (0.5 * dt)
    }
    .clamp_abs(bound);
    let derivative = if first { Vec3::ZERO } else { (e - state.prev_error) / dt };
    let cmd = k.kp.hadamard(e) + k.ki.hadamard(integral) + k.kd.hadamard(derivative);
    let t = state.prev_t.map_or(dt, |t| t + dt);
    (cmd, RateLoopState { integral, prev_error: e, prev_t: Some(t) })
}

/// Torque `J Ω̇_c + Ω × JΩ` mixed together with `t_c` into motor thrusts.
pub fn allocate(t_c: f64, omega_dot_c: Vec3, s: &QuadState, p: &QuadParams) -> crate::dynamics::Allocation {
    let j = &p.inertia;
    let tau = *j * omega_dot_c + s.omega.cross(*j * s.omega);
    mix_inverse(&GeneralizedForce { tau, tz: t_c }, p)
}

/// Which part of the perch sequence produced a control output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "I_gen")]
    Generate,
    #[serde(rename = "II_track")]
    Track,
    #[serde(rename = "III_attitude")]
    Attitude,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Generate => "I_gen",
            Stage::Track => "II_track",
            Stage::Attitude => "III_attitude",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub stage: Stage,
    pub command: MotorCommand,
    pub saturated: bool,
    pub a_c: Vec3,
    pub t_c: f64,
    pub r_c: RotationMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Switched {
    t: f64,
    thrust: f64,
}

/// Stateful controller for one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct PerchController {
    pub params: QuadParams,
    pub gains: Gains,
    pub switch: AttitudeSwitchConfig,
    rate: RateLoopState,
    switched: Option<Switched>,
    last_thrust: Option<f64>,
}

impl PerchController {
    pub fn new(params: QuadParams, gains: Gains, switch: AttitudeSwitchConfig) -> Result<Self, ControlError> {
        gains.validate()?;
        switch.validate()?;
        Ok(Self { params, gains, switch, rate: RateLoopState::default(), switched: None, last_thrust: None })
    }

    pub fn rate_state(&self) -> &RateLoopState {
        &self.rate
    }

    /// Time of the switch to the perch attitude, if it has happened.
    pub fn switch_time(&self) -> Option<f64> {
        self.switched.map(|s| s.t)
    }

    /// One control update at time `t` for a tick of length `dt`.
    ///
    /// `d_x` is the distance to the wall plane. Before the switch, the reference
    /// sample is tracked; after it, references are ignored, the perch attitude is
    /// regulated with zero rate feed-forward, and the thrust follows the
    /// configured ramp from the last tracking value.
    pub fn update(
        &mut self,
        t: f64,
        dt: f64,
        s: &QuadState,
        reference: &TrajectorySample,
        d_x: f64,
    ) -> Result<ControlOutput, ControlError> {
        let p = &self.params;
        let k = &self.gains;
        let in_band = d_x < self.switch.epsilon;
        if self.switched.is_some() && !self.switch.latch && !in_band {
            self.switched = None;
        }
        if self.switched.is_none() && in_band {
            let thrust = match self.last_thrust {
                Some(th) => th,
                None => thrust_and_attitude(tracking_accel(s.x, s.v, reference, k), reference.psi, p)
                    .map(|(th, _)| th)
                    .unwrap_or_else(|_| p.hover_thrust() * 4.0),
            };
            self.switched = Some(Switched { t, thrust });
        }
        let (stage, a_c, t_c, r_c, omega_ref) = match self.switched {
            Some(sw) => {
                let t_c = self.switch.thrust_schedule(sw.thrust, t - sw.t);
                (Stage::Attitude, Vec3::ZERO, t_c, self.switch.perch_attitude, Vec3::ZERO)
            }
            None => {
                let a_c = tracking_accel(s.x, s.v, reference, k);
                let (t_c, r_traj) = thrust_and_attitude(a_c, reference.psi, p)?;
                let r_c = select_attitude(d_x.max(0.0), &self.switch, &r_traj);
                self.last_thrust = Some(t_c);
                (Stage::Track, a_c, t_c, r_c, reference.omega)
            }
        };
        let omega_c = attitude_outer(&r_c, &s.r, omega_ref, k);
        let (omega_dot_c, rate) = attitude_inner(omega_c, s.omega, &r_c, &s.r, &self.rate, k, dt);
        self.rate = rate;
        let alloc = allocate(t_c, omega_dot_c, s, p);
        Ok(ControlOutput { stage, command: alloc.command, saturated: alloc.saturated, a_c, t_c, r_c })
    }
}
