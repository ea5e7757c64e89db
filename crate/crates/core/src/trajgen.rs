//! Stage I: roll the trained policy out in simulation and turn the rollout into
//! a reference trajectory for the tracking controller.
//!
//! Feed-forward body rates use differential flatness. With thrust `T` along the
//! body z axis, `m a = T b_z + m g`, so `m j = Ṫ b_z + T R (Ω × e₃)` and the
//! projections onto the other two body axes give
//!
//! ```text
//! ω_x = −(m/T) j·b_y,    ω_y = (m/T) j·b_x,    ω_z = ψ̇ (b_z·e₃)
//! ```
//!
//! The yaw-rate row drops the coupling with roll/pitch rates, which is exact for
//! level flight and small for the trajectories produced here.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::controller::thrust_and_attitude;
use crate::dynamics::{mix_forward, state_derivative, MotorCommand, QuadParams, QuadState};
use crate::nn::MlpNet;
use crate::rl::env::{PerchEnv, PerchTask, Termination};
use crate::rl::policy::{policy_mean, PolicyHead};
use crate::so3::{pitch_of, yaw_of, RotationMatrix, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajGenError {
    /// The rollout left the simulator's sanity bounds.
    PolicyDiverged,
    /// Fewer than four states.
    TooShort,
}

impl fmt::Display for TrajGenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajGenError::PolicyDiverged => f.write_str("policy rollout diverged"),
            TrajGenError::TooShort => f.write_str("at least four states are needed to derive references"),
        }
    }
}

impl core::error::Error for TrajGenError {}

/// One reference sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: Vec3,
    pub v: Vec3,
    pub a: Vec3,
    pub jerk: Vec3,
    /// Heading (rad).
    pub psi: f64,
    /// Feed-forward body angular velocity (rad/s).
    pub omega: Vec3,
}

impl TrajectorySample {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.x.is_finite()
            && self.v.is_finite()
            && self.a.is_finite()
            && self.jerk.is_finite()
            && self.psi.is_finite()
            && self.omega.is_finite()
    }
}

/// Uniformly sampled reference trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
    pub perch_point: Vec3,
    /// Whether the generating rollout perched.
    pub success: bool,
}

impl ReferenceTrajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t) - self.samples.first().map_or(0.0, |s| s.t)
    }

    /// Sample at time `t`, linearly interpolated; clamped to the end points.
    pub fn sample_at(&self, t: f64) -> TrajectorySample {
        let first = &self.samples[0];
        let last = self.samples.last().expect("reference is never empty");
        if t <= first.t {
            return *first;
        }
        if t >= last.t {
            return *last;
        }
        let u = (t - first.t) / self.dt;
        let i = (libm::floor(u) as usize).min(self.samples.len() - 2);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        TrajectorySample {
            t,
            x: a.x.lerp(b.x, s),
            v: a.v.lerp(b.v, s),
            a: a.a.lerp(b.a, s),
            jerk: a.jerk.lerp(b.jerk, s),
            psi: a.psi + s * wrap_angle(b.psi - a.psi),
            omega: a.omega.lerp(b.omega, s),
        }
    }

    /// Checks the invariants: at least two samples, increasing finite times,
    /// all values finite.
    pub fn validate(&self) -> bool {
        self.samples.len() >= 2
            && self.dt > 0.0
            && self.samples.iter().all(TrajectorySample::is_finite)
            && self.samples.windows(2).all(|w| w[1].t > w[0].t)
            && self.samples[0].t >= 0.0
    }
}

/// Tolerances deciding whether a final state counts as perched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerchTolerance {
    /// Distance from the wall plane (m).
    pub plane: f64,
    /// Offset within the wall plane (m).
    pub lateral: f64,
    /// Pitch error from 90° (deg).
    pub pitch_deg: f64,
}

impl Default for PerchTolerance {
    fn default() -> Self {
        Self { plane: 0.05, lateral: 0.05, pitch_deg: 5.0 }
    }
}

pub fn check_perch_success(last: &QuadState, perch_point: Vec3, tol: &PerchTolerance) -> bool {
    let rel = last.x - perch_point;
    let lateral = libm::sqrt(rel.y * rel.y + rel.z * rel.z);
    let pitch_err = (pitch_of(&last.r) - PI / 2.0).abs().to_degrees();
    rel.x.abs() <= tol.plane && lateral <= tol.lateral && pitch_err <= tol.pitch_deg
}

/// Simulated trajectory of the deterministic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// One state per simulator step, starting with `s0`.
    pub states: Vec<QuadState>,
    /// Applied (clamped) command over each step; one fewer than `states`.
    pub actions: Vec<MotorCommand>,
    /// State interpolated onto the wall plane, if the wall was reached.
    pub contact: Option<QuadState>,
    pub success: bool,
}

/// Flies the mean action of `policy` from `s0` until wall contact, leaving the
/// arena, or the task's step cap.
pub fn rollout(
    policy: &MlpNet,
    head: &PolicyHead,
    task: &PerchTask,
    s0: QuadState,
    tol: &PerchTolerance,
) -> Result<Rollout, TrajGenError> {
    let mut env = PerchEnv::new(task, s0);
    let mut states = Vec::with_capacity(task.max_sim_steps + 1);
    let mut actions = Vec::with_capacity(task.max_sim_steps);
    states.push(s0);
    loop {
        let a = policy_mean(policy, &env.observation(), head);
        let out = env.step_with(&a, |s, applied| {
            states.push(*s);
            actions.push(*applied);
        });
        match out.termination {
            Some(Termination::Diverged) => return Err(TrajGenError::PolicyDiverged),
            Some(Termination::Contact(c)) => {
                let success = check_perch_success(&c, task.perch_point, tol);
                return Ok(Rollout { states, actions, contact: Some(c), success });
            }
            Some(Termination::LeftArena) => {
                return Ok(Rollout { states, actions, contact: None, success: false });
            }
            None if out.truncated => {
                let success = check_perch_success(&out.state, task.perch_point, tol);
                return Ok(Rollout { states, actions, contact: None, success });
            }
            None => {}
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = libm::fmod(a + PI, 2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a - PI
}

/// Body rates implied by `jerk` for attitude `r`, collective thrust `thrust` and
/// yaw rate `psi_dot`.
pub fn flatness_rates(r: &RotationMatrix, thrust: f64, mass: f64, jerk: Vec3, psi_dot: f64) -> Vec3 {
    let (b_x, b_y, b_z) = (r.axis(0), r.axis(1), r.axis(2));
    let wz = psi_dot * b_z.z;
    if thrust < 1e-6 {
        return Vec3::new(0.0, 0.0, wz);
    }
    let h = mass / thrust;
    Vec3::new(-h * jerk.dot(b_y), h * jerk.dot(b_x), wz)
}

/// Central differences with one-sided second-order stencils at the ends.
fn differentiate<T>(values: &[T], dt: f64, sub: impl Fn(&T, &T) -> T, scale: impl Fn(T, f64) -> T) -> Vec<T>
where
    T: Copy + core::ops::Add<Output = T>,
{
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let d = if k == 0 {
            // (−3 f0 + 4 f1 − f2) / 2dt
            let a = sub(&values[1], &values[0]);
            let b = sub(&values[2], &values[1]);
            scale(scale(a, 3.0) + scale(b, -1.0), 0.5 / dt)
        } else if k == n - 1 {
            let a = sub(&values[n - 1], &values[n - 2]);
            let b = sub(&values[n - 2], &values[n - 3]);
            scale(scale(a, 3.0) + scale(b, -1.0), 0.5 / dt)
        } else {
            scale(sub(&values[k + 1], &values[k - 1]), 0.5 / dt)
        };
        out.push(d);
    }
    out
}

/// Reference trajectory from a simulated state sequence.
///
/// `actions[k]` is the command applied from `states[k]` to `states[k + 1]`; the
/// last state reuses the last action. Accelerations come straight from the
/// dynamics, jerk and yaw rate from finite differences.
pub fn derive_references(
    states: &[QuadState],
    actions: &[MotorCommand],
    p: &QuadParams,
    dt: f64,
    perch_point: Vec3,
) -> Result<ReferenceTrajectory, TrajGenError> {
    let n = states.len();
    if n < 4 || actions.is_empty() {
        return Err(TrajGenError::TooShort);
    }
    let action_at = |k: usize| &actions[k.min(actions.len() - 1)];
    let forces: Vec<_> = (0..n).map(|k| mix_forward(&action_at(k).clamped(p).0, p)).collect();
    let accel: Vec<Vec3> = (0..n).map(|k| state_derivative(&states[k], &forces[k], p).v_dot).collect();
    let jerk = differentiate(&accel, dt, |a, b| *a - *b, |v, s| v * s);
    // unwrap yaw before differencing
    let mut psi = Vec::with_capacity(n);
    let mut prev = yaw_of(&states[0].r);
    for s in states {
        let y = prev + wrap_angle(yaw_of(&s.r) - prev);
        psi.push(y);
        prev = y;
    }
    let psi_dot = differentiate(&psi, dt, |a, b| a - b, |v, s| v * s);
    let samples = (0..n)
        .map(|k| TrajectorySample {
            t: k as f64 * dt,
            x: states[k].x,
            v: states[k].v,
            a: accel[k],
            jerk: jerk[k],
            psi: wrap_angle(psi[k]),
            omega: flatness_rates(&states[k].r, forces[k].tz, p.mass, jerk[k], psi_dot[k]),
        })
        .collect();
    Ok(ReferenceTrajectory { dt, samples, perch_point, success: false })
}

/// Stage I in one call: rollout plus reference extraction.
pub fn generate(
    policy: &MlpNet,
    head: &PolicyHead,
    task: &PerchTask,
    s0: QuadState,
    tol: &PerchTolerance,
) -> Result<(ReferenceTrajectory, Rollout), TrajGenError> {
    let ro = rollout(policy, head, task, s0, tol)?;
    let mut reference = derive_references(&ro.states, &ro.actions, &task.params, task.sim_dt, task.perch_point)?;
    reference.success = ro.success;
    Ok((reference, ro))
}

/// Hand-designed approach used to exercise the controller without a policy.
///
/// A quintic in each axis carries the vehicle from its initial position and
/// velocity to a launch point `epsilon` in front of the wall with velocity
/// `[−speed, 0, climb]` and zero acceleration; the reference then continues at
/// that constant velocity through the wall plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedApproach {
    /// Wall distance of the launch point (m); matches the attitude switch.
    pub launch_distance: f64,
    /// Height of the launch point relative to the perch point (m).
    pub launch_height: f64,
    /// Approach speed toward the wall at launch (m/s).
    pub speed: f64,
    /// Vertical velocity at launch (m/s).
    pub climb: f64,
    /// Lower bound on the approach duration (s).
    pub min_duration: f64,
    /// Mean speed used to size the approach duration (m/s).
    pub cruise_speed: f64,
    /// Constant-velocity tail after the launch point (s).
    pub tail: f64,
    pub dt: f64,
}

impl Default for ScriptedApproach {
    fn default() -> Self {
        Self {
            launch_distance: 0.5,
            launch_height: 0.0,
            speed: 1.5,
            climb: 1.25,
            min_duration: 1.5,
            cruise_speed: 0.8,
            tail: 1.0,
            dt: 0.001,
        }
    }
}

/// Quintic with position, velocity and zero acceleration at both ends; returns
/// derivatives 0..=3 at `t`.
fn quintic(p0: f64, v0: f64, p1: f64, v1: f64, duration: f64, t: f64) -> [f64; 4] {
    let tt = duration;
    // p(t) = p0 + v0 t + c3 t³ + c4 t⁴ + c5 t⁵ with a(0) = 0
    let dp = p1 - p0 - v0 * tt;
    let dv = v1 - v0;
    let c3 = (10.0 * dp - 4.0 * dv * tt) / (tt * tt * tt);
    let c4 = (-15.0 * dp + 7.0 * dv * tt) / (tt * tt * tt * tt);
    let c5 = (6.0 * dp - 3.0 * dv * tt) / (tt * tt * tt * tt * tt);
    let (t2, t3, t4, t5) = (t * t, t * t * t, t * t * t * t, t * t * t * t * t);
    [
        p0 + v0 * t + c3 * t3 + c4 * t4 + c5 * t5,
        v0 + 3.0 * c3 * t2 + 4.0 * c4 * t3 + 5.0 * c5 * t4,
        6.0 * c3 * t + 12.0 * c4 * t2 + 20.0 * c5 * t3,
        6.0 * c3 + 24.0 * c4 * t + 60.0 * c5 * t2,
    ]
}

impl ScriptedApproach {
    pub fn launch_point(&self, perch_point: Vec3) -> Vec3 {
        perch_point + Vec3::new(self.launch_distance, 0.0, self.launch_height)
    }

    pub fn launch_velocity(&self) -> Vec3 {
        Vec3::new(-self.speed, 0.0, self.climb)
    }

    pub fn approach_duration(&self, s0: &QuadState, perch_point: Vec3) -> f64 {
        let d = (self.launch_point(perch_point) - s0.x).norm();
        (d / self.cruise_speed).max(self.min_duration)
    }

    pub fn trajectory(&self, s0: &QuadState, perch_point: Vec3, p: &QuadParams) -> ReferenceTrajectory {
        let goal = self.launch_point(perch_point);
        let v_goal = self.launch_velocity();
        let t1 = self.approach_duration(s0, perch_point);
        let n = libm::ceil((t1 + self.tail) / self.dt) as usize + 1;
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            let t = k as f64 * self.dt;
            let (x, v, a, j) = if t <= t1 {
                let cx = quintic(s0.x.x, s0.v.x, goal.x, v_goal.x, t1, t);
                let cy = quintic(s0.x.y, s0.v.y, goal.y, v_goal.y, t1, t);
                let cz = quintic(s0.x.z, s0.v.z, goal.z, v_goal.z, t1, t);
                (
                    Vec3::new(cx[0], cy[0], cz[0]),
                    Vec3::new(cx[1], cy[1], cz[1]),
                    Vec3::new(cx[2], cy[2], cz[2]),
                    Vec3::new(cx[3], cy[3], cz[3]),
                )
            } else {
                (goal + v_goal * (t - t1), v_goal, Vec3::ZERO, Vec3::ZERO)
            };
            let omega = match thrust_and_attitude(a, 0.0, p) {
                Ok((thrust, r)) => flatness_rates(&r, thrust, p.mass, j, 0.0),
                Err(_) => Vec3::ZERO,
            };
            samples.push(TrajectorySample { t, x, v, a, jerk: j, psi: 0.0, omega });
        }
        ReferenceTrajectory { dt: self.dt, samples, perch_point, success: true }
    }
}
