//! The perching MDP: reward, episode termination and the discrete transition.

use libm::exp;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step, MotorCommand, QuadParams, QuadState, DEFAULT_DT};
use crate::rl::policy::{observe, Observation};
use crate::so3::{rotation_angle, RotationMatrix, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    /// Attitude error weight, gated by `exp(−d_x)`.
    pub w1: f64,
    /// Position error weight.
    pub w2: f64,
    /// Action magnitude weight.
    pub w3: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { w1: 5.0, w2: 2.0, w3: 0.05 }
    }
}

/// `−(w1·e^{−d_x}·θ_R + w2·‖x − perch‖ + w3·‖a‖)` with `θ_R` the angle to the
/// target attitude; never positive.
pub fn reward(
    s: &QuadState,
    a: &MotorCommand,
    perch_point: Vec3,
    target_attitude: &RotationMatrix,
    w: &RewardWeights,
) -> f64 {
    let rel = s.x - perch_point;
    let d_x = rel.x.abs();
    let attitude = rotation_angle(target_attitude, &s.r);
    -(w.w1 * exp(-d_x) * attitude + w.w2 * rel.norm() + w.w3 * a.norm())
}

/// Fixed description of the perching task shared by all episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PerchTask {
    pub params: QuadParams,
    /// The wall is the plane `x = perch_point.x`; vehicles approach from `x > perch_point.x`.
    pub perch_point: Vec3,
    pub target_attitude: RotationMatrix,
    pub weights: RewardWeights,
    pub gamma: f64,
    pub sim_dt: f64,
    /// Simulator steps per policy decision.
    pub action_repeat: usize,
    /// Simulator steps per episode.
    pub max_sim_steps: usize,
    /// Leaving this radius around the perch point ends the episode.
    pub arena_radius: f64,
    /// Terminal cost at wall contact, in multiples of the running cost of the
    /// contact pose under zero action.
    pub contact_cost_steps: f64,
}

impl PerchTask {
    pub fn new(params: QuadParams) -> Self {
        Self {
            params,
            perch_point: Vec3::ZERO,
            target_attitude: RotationMatrix::rot_y(core::f64::consts::FRAC_PI_2),
            weights: RewardWeights::default(),
            gamma: 0.99,
            sim_dt: DEFAULT_DT,
            action_repeat: 10,
            max_sim_steps: 3000,
            arena_radius: 4.0,
            contact_cost_steps: 40.0,
        }
    }

    pub fn reward(&self, s: &QuadState, a: &MotorCommand) -> f64 {
        reward(s, a, self.perch_point, &self.target_attitude, &self.weights)
    }

    /// Signed distance in front of the wall.
    pub fn wall_distance(&self, s: &QuadState) -> f64 {
        s.x.x - self.perch_point.x
    }

    /// Discounted value of remaining at `s` with zero action forever, counted
    /// from the step after it is reached.
    pub fn absorbing_value(&self, s: &QuadState) -> f64 {
        self.gamma / (1.0 - self.gamma) * self.reward(s, &MotorCommand::default())
    }

    /// Terminal cost charged on wall contact at `s`.
    pub fn contact_value(&self, s: &QuadState) -> f64 {
        self.contact_cost_steps * self.reward(s, &MotorCommand::default())
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Crossed the wall plane; carries the state interpolated onto the plane.
    Contact(QuadState),
    Diverged,
    LeftArena,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub obs: Observation,
    pub state: QuadState,
    pub reward: f64,
    pub termination: Option<Termination>,
    /// Step cap reached without termination.
    pub truncated: bool,
    /// Motor command after clamping, as applied to the plant.
    pub applied: MotorCommand,
}

/// One simulated vehicle under a [`PerchTask`].
#[derive(Debug, Clone)]
pub struct PerchEnv<'a> {
    task: &'a PerchTask,
    state: QuadState,
    sim_steps: usize,
}

impl<'a> PerchEnv<'a> {
    pub fn new(task: &'a PerchTask, s0: QuadState) -> Self {
        Self { task, state: s0, sim_steps: 0 }
    }

    pub fn state(&self) -> &QuadState {
        &self.state
    }

    pub fn observation(&self) -> Observation {
        observe(&self.state, self.task.perch_point)
    }

    pub fn sim_steps(&self) -> usize {
        self.sim_steps
    }

    /// Holds `cmd` for one policy period. The per-decision reward is evaluated at
    /// the pre-step state; terminal transitions add the discounted cost of staying
    /// at the final state, which plays the role of the terminal cost.
    pub fn step(&mut self, cmd: &MotorCommand) -> EnvStep {
        self.step_with(cmd, |_, _| {})
    }

    /// As [`step`](Self::step), calling `on_substep` with every intermediate
    /// simulator state and the applied command.
    pub fn step_with(
        &mut self,
        cmd: &MotorCommand,
        mut on_substep: impl FnMut(&QuadState, &MotorCommand),
    ) -> EnvStep {
        let task = self.task;
        let (applied, _) = cmd.clamped(&task.params);
        let r0 = task.reward(&self.state, &applied);
        let mut termination = None;
        for _ in 0..task.action_repeat {
            let prev = self.state;
            match step(&prev, &applied, task.sim_dt, &task.params) {
                Ok(next) => {
                    self.sim_steps += 1;
                    let (d0, d1) = (task.wall_distance(&prev), task.wall_distance(&next));
                    if d0 > 0.0 && d1 <= 0.0 {
                        let contact = interpolate_on_plane(&prev, &next, d0 / (d0 - d1));
                        self.state = next;
                        on_substep(&next, &applied);
                        termination = Some(Termination::Contact(contact));
                        break;
                    }
                    self.state = next;
                    on_substep(&next, &applied);
                    if (next.x - task.perch_point).norm() > task.arena_radius {
                        termination = Some(Termination::LeftArena);
                        break;
                    }
                }
                Err(_) => {
                    termination = Some(Termination::Diverged);
                    break;
                }
            }
            if self.sim_steps >= task.max_sim_steps {
                break;
            }
        }
        let reward = match termination {
            Some(Termination::Contact(c)) => r0 + task.contact_value(&c),
            Some(Termination::LeftArena) => r0 + task.absorbing_value(&self.state),
            // The state is unusable; charge the pre-step cost forever.
            Some(Termination::Diverged) => r0 / (1.0 - task.gamma),
            None => r0,
        };
        EnvStep {
            obs: self.observation(),
            state: self.state,
            reward,
            termination,
            truncated: termination.is_none() && self.sim_steps >= task.max_sim_steps,
            applied,
        }
    }
}

/// Linear interpolation of position, velocity and rate; the attitude is taken
/// from whichever endpoint is nearer.
pub fn interpolate_on_plane(a: &QuadState, b: &QuadState, frac: f64) -> QuadState {
    let frac = frac.clamp(0.0, 1.0);
    QuadState {
        r: if frac < 0.5 { a.r } else { b.r },
        omega: a.omega.lerp(b.omega, frac),
        x: a.x.lerp(b.x, frac),
        v: a.v.lerp(b.v, frac),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    fn task() -> PerchTask {
        PerchTask::new(QuadParams::default())
    }

    #[test]
    fn reward_vanishes_at_perch_pose() {
        let t = task();
        let s = QuadState { r: t.target_attitude, ..QuadState::at_rest(t.perch_point) };
        assert_eq!(t.reward(&s, &MotorCommand::default()), 0.0);
    }

    #[test]
    fn reward_far_from_wall_ignores_attitude() {
        let t = task();
        let s = QuadState::at_rest(Vec3::new(60.0, 1.0, 0.0));
        let a = MotorCommand::splat(2.0);
        let w = &t.weights;
        let expect = -(w.w2 * s.x.norm() + w.w3 * a.norm());
        assert!((t.reward(&s, &a) - expect).abs() < 1e-12);
    }

    #[test]
    fn doubling_w2_doubles_position_term() {
        let t = task();
        let s = QuadState::at_rest(Vec3::new(0.7, -0.4, 0.2));
        let a = MotorCommand::splat(1.0);
        let base = reward(&s, &a, Vec3::ZERO, &t.target_attitude, &RewardWeights { w2: 0.0, ..t.weights });
        let one = reward(&s, &a, Vec3::ZERO, &t.target_attitude, &t.weights);
        let two = reward(&s, &a, Vec3::ZERO, &t.target_attitude, &RewardWeights { w2: 2.0 * t.weights.w2, ..t.weights });
        assert!(((two - base) - 2.0 * (one - base)).abs() < 1e-12);
    }

    #[test]
    fn hover_far_away_truncates() {
        let mut t = task();
        t.max_sim_steps = 50;
        let mut env = PerchEnv::new(&t, QuadState::at_rest(Vec3::new(1.0, 0.0, 0.0)));
        let hover = MotorCommand::splat(t.params.hover_thrust());
        let mut steps = 0;
        loop {
            let r = env.step(&hover);
            steps += 1;
            assert!(r.termination.is_none());
            if r.truncated {
                break;
            }
        }
        assert_eq!(steps, 5);
    }

    #[test]
    fn contact_charges_terminal_cost() {
        let t = task();
        let s0 = QuadState {
            r: RotationMatrix::rot_y(FRAC_PI_2),
            v: Vec3::new(-2.0, 0.0, 0.0),
            ..QuadState::at_rest(Vec3::new(0.005, 0.0, 0.0))
        };
        let mut env = PerchEnv::new(&t, s0);
        let out = env.step(&MotorCommand::default());
        let Some(Termination::Contact(c)) = out.termination else { panic!("expected contact") };
        assert!(c.x.x.abs() < 1e-12);
        assert!(out.reward < 0.0);
        assert!((out.reward - t.contact_value(&c)).abs() < out.reward.abs());
        // near-perfect perch is cheap; the same contact point upside down is not
        assert!(out.reward > -1.0);
        let flipped = QuadState { r: RotationMatrix::rot_y(-FRAC_PI_2), ..c };
        assert!(t.contact_value(&flipped) < -100.0);
    }
}
