//! The three-stage perch sequence and its Monte-Carlo evaluation.
//!
//! Stage I generates a reference from a policy rollout (or takes a supplied
//! one), Stage II tracks it, and Stage III regulates the perch attitude once the
//! vehicle is within `epsilon` of the wall. A mission ends at the first crossing
//! of the wall plane or at the timeout.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{AttitudeSwitchConfig, ControlError, Gains, PerchController, Stage};
use crate::dynamics::{step, MotorCommand, QuadParams, QuadState};
use crate::exec::{derive_seed, Executor};
use crate::nn::MlpNet;
use crate::rl::env::PerchTask;
use crate::rl::policy::PolicyHead;
use crate::so3::{pitch_of, RotationMatrix, Vec3};
use crate::trajgen::{generate, PerchTolerance, ReferenceTrajectory, TrajGenError, TrajectorySample};

/// Evaluation protocol and mission timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    /// The wall is the plane `x = perch_point.x`.
    pub perch_point: Vec3,
    /// Sampling box corners, relative to the perch point (m).
    pub box_min: Vec3,
    pub box_max: Vec3,
    /// Initial velocity bounds per axis (m/s).
    pub velocity_min: Vec3,
    pub velocity_max: Vec3,
    pub trial_count: usize,
    /// Controller update rate (Hz); a multiple-of-dt period is used.
    pub control_rate: f64,
    /// Simulator step (s).
    pub sim_dt: f64,
    /// Simulated time after which an unfinished mission fails (s).
    pub timeout: f64,
    /// Contact counted as a successful landing within these bounds.
    pub success_pitch_deg: f64,
    pub success_lateral: f64,
    /// Used by Stage I to label the rollout.
    pub rollout_tolerance: PerchTolerance,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            perch_point: Vec3::ZERO,
            box_min: Vec3::new(1.0, -0.5, -0.5),
            box_max: Vec3::new(2.0, 0.5, 0.5),
            velocity_min: Vec3::splat(-0.5),
            velocity_max: Vec3::splat(0.5),
            trial_count: 50,
            control_rate: 1000.0,
            sim_dt: 0.001,
            timeout: 8.0,
            success_pitch_deg: 10.0,
            success_lateral: 0.10,
            rollout_tolerance: PerchTolerance::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MissionError {
    InvalidConfig(&'static str),
    Trajectory(TrajGenError),
    Control(ControlError),
    /// No wall contact before the timeout; carries the partial log.
    MissionTimeout(Box<MissionLog>),
    /// The plant left its sanity bounds; carries the partial log.
    SimulationDiverged(Box<MissionLog>),
}

impl fmt::Display for MissionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MissionError::InvalidConfig(what) => write!(f, "invalid mission config: {what}"),
            MissionError::Trajectory(e) => write!(f, "stage I failed: {e}"),
            MissionError::Control(e) => write!(f, "controller failed: {e}"),
            MissionError::MissionTimeout(_) => f.write_str("mission timed out before wall contact"),
            MissionError::SimulationDiverged(_) => f.write_str("simulation diverged during the mission"),
        }
    }
}

impl core::error::Error for MissionError {}

impl From<TrajGenError> for MissionError {
    fn from(e: TrajGenError) -> Self {
        MissionError::Trajectory(e)
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), MissionError> {
        use MissionError::InvalidConfig as Bad;
        let ordered = |lo: Vec3, hi: Vec3| lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z;
        if !ordered(self.box_min, self.box_max) || !ordered(self.velocity_min, self.velocity_max) {
            return Err(Bad("box and velocity bounds must satisfy min <= max"));
        }
        if !(self.box_min.x > 0.0) {
            return Err(Bad("sampling box must lie in front of the wall"));
        }
        if self.trial_count == 0 {
            return Err(Bad("trial_count must be at least 1"));
        }
        if !(self.sim_dt > 0.0 && self.sim_dt <= crate::dynamics::MAX_DT) {
            return Err(Bad("sim_dt must lie in (0, 0.01]"));
        }
        if !(self.control_rate > 0.0 && 1.0 / self.control_rate >= self.sim_dt * 0.999) {
            return Err(Bad("control period must be at least sim_dt"));
        }
        if !(self.timeout > 0.0) {
            return Err(Bad("timeout must be positive"));
        }
        if !(self.success_pitch_deg > 0.0 && self.success_lateral > 0.0) {
            return Err(Bad("success tolerances must be positive"));
        }
        Ok(())
    }

    /// Simulator steps per control update.
    pub fn control_substeps(&self) -> usize {
        (libm::round(1.0 / (self.control_rate * self.sim_dt)) as usize).max(1)
    }
}

/// Uniform position in the box, uniform velocity in the range, identity
/// attitude, zero rates.
pub fn sample_initial_state(cfg: &MissionConfig, seed: u64) -> QuadState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: f64, hi: f64| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let x = Vec3::new(
        draw(cfg.box_min.x, cfg.box_max.x),
        draw(cfg.box_min.y, cfg.box_max.y),
        draw(cfg.box_min.z, cfg.box_max.z),
    );
    let v = Vec3::new(
        draw(cfg.velocity_min.x, cfg.velocity_max.x),
        draw(cfg.velocity_min.y, cfg.velocity_max.y),
        draw(cfg.velocity_min.z, cfg.velocity_max.z),
    );
    QuadState { r: RotationMatrix::IDENTITY, omega: Vec3::ZERO, x: cfg.perch_point + x, v }
}

/// Training-time sampler drawing initial states from the mission box.
pub fn initial_state_sampler(cfg: &MissionConfig) -> impl Fn(&mut ChaCha8Rng) -> QuadState + Sync + Send + '_ {
    move |rng| sample_initial_state(cfg, rng.random())
}

/// One logged control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionStep {
    pub t: f64,
    pub stage: Stage,
    pub state: QuadState,
    /// Command applied over the interval ending at `t`.
    pub command: MotorCommand,
    pub reference: TrajectorySample,
    pub a_c: Vec3,
    pub t_c: f64,
    pub r_c: RotationMatrix,
}

/// Wall contact, linearly interpolated at the plane crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub t: f64,
    /// Offsets from the perch point within the wall plane (m).
    pub y: f64,
    pub z: f64,
    /// Pitch (rad).
    pub pitch: f64,
    pub speed: f64,
}

impl ContactRecord {
    pub fn pitch_error_deg(&self) -> f64 {
        (self.pitch - FRAC_PI_2).to_degrees()
    }

    pub fn lateral(&self) -> f64 {
        libm::sqrt(self.y * self.y + self.z * self.z)
    }

    pub fn is_success(&self, cfg: &MissionConfig) -> bool {
        self.pitch_error_deg().abs() <= cfg.success_pitch_deg && self.lateral() <= cfg.success_lateral
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionLog {
    pub steps: Vec<MissionStep>,
    pub contact: Option<ContactRecord>,
    pub reference: ReferenceTrajectory,
    /// Time of the Stage II to III transition.
    pub switch_time: Option<f64>,
}

impl MissionLog {
    pub fn stage_order_ok(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].stage <= w[1].stage && w[1].t > w[0].t)
    }
}

/// Everything needed to fly missions besides the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionSetup {
    pub params: QuadParams,
    pub gains: Gains,
    pub switch: AttitudeSwitchConfig,
    pub mission: MissionConfig,
    /// Stage I rollout settings (action repeat, step cap, perch point).
    pub task: PerchTask,
    pub head: PolicyHead,
}

fn crossing(prev: &QuadState, next: &QuadState, t0: f64, t1: f64, wall: f64) -> Option<ContactRecord> {
    let (d0, d1) = (prev.x.x - wall, next.x.x - wall);
    if !(d0 > 0.0 && d1 <= 0.0) {
        return None;
    }
    let s = d0 / (d0 - d1);
    let x = prev.x.lerp(next.x, s);
    let (p0, p1) = (pitch_of(&prev.r), pitch_of(&next.r));
    Some(ContactRecord {
        t: t0 + (t1 - t0) * s,
        y: x.y,
        z: x.z,
        pitch: p0 + (p1 - p0) * s,
        speed: prev.v.lerp(next.v, s).norm(),
    })
}

/// Stages I–III from `s0` with the policy generating the reference.
pub fn run_mission(s0: QuadState, policy: &MlpNet, setup: &MissionSetup) -> Result<MissionLog, MissionError> {
    let (reference, _) = generate(policy, &setup.head, &setup.task, s0, &setup.mission.rollout_tolerance)?;
    fly_reference(s0, reference, setup)
}

/// Stages II–III from `s0` tracking a given reference (Stage I is recorded as
/// the single planning instant at t = 0).
pub fn fly_reference(
    s0: QuadState,
    reference: ReferenceTrajectory,
    setup: &MissionSetup,
) -> Result<MissionLog, MissionError> {
    setup.mission.validate()?;
    let cfg = &setup.mission;
    let p = &setup.params;
    let wall = cfg.perch_point.x;
    let mut ctl = PerchController::new(p.clone(), setup.gains, setup.switch).map_err(MissionError::Control)?;
    let sub = cfg.control_substeps();
    let ctl_dt = sub as f64 * cfg.sim_dt;
    let n_ticks = libm::ceil(cfg.timeout / ctl_dt) as usize;

    let first_ref = reference.sample_at(0.0);
    let mut log = MissionLog {
        steps: Vec::with_capacity(n_ticks + 1),
        contact: None,
        reference,
        switch_time: None,
    };
    log.steps.push(MissionStep {
        t: 0.0,
        stage: Stage::Generate,
        state: s0,
        command: MotorCommand::default(),
        reference: first_ref,
        a_c: Vec3::ZERO,
        t_c: 0.0,
        r_c: s0.r,
    });

    let mut s = s0;
    let mut sim_steps = 0usize;
    for k in 0..n_ticks {
        let t = k as f64 * ctl_dt;
        let r = log.reference.sample_at(t);
        let out = ctl.update(t, ctl_dt, &s, &r, s.x.x - wall).map_err(MissionError::Control)?;
        for _ in 0..sub {
            let prev = s;
            let t_prev = sim_steps as f64 * cfg.sim_dt;
            s = match step(&prev, &out.command, cfg.sim_dt, p) {
                Ok(next) => next,
                Err(_) => {
                    log.switch_time = ctl.switch_time();
                    return Err(MissionError::SimulationDiverged(Box::new(log)));
                }
            };
            sim_steps += 1;
            let t_now = sim_steps as f64 * cfg.sim_dt;
            if let Some(c) = crossing(&prev, &s, t_prev, t_now, wall) {
                log.contact = Some(ContactRecord { y: c.y - cfg.perch_point.y, z: c.z - cfg.perch_point.z, ..c });
                break;
            }
        }
        log.steps.push(MissionStep {
            t: sim_steps as f64 * cfg.sim_dt,
            stage: out.stage,
            state: s,
            command: out.command,
            reference: r,
            a_c: out.a_c,
            t_c: out.t_c,
            r_c: out.r_c,
        });
        if log.contact.is_some() {
            log.switch_time = ctl.switch_time();
            return Ok(log);
        }
    }
    log.switch_time = ctl.switch_time();
    Err(MissionError::MissionTimeout(Box::new(log)))
}

/// Result of one Monte-Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub initial: QuadState,
    pub contact: Option<ContactRecord>,
    pub success: bool,
    /// `None` for a normal contact, otherwise why the trial failed.
    pub failure: Option<TrialFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialFailure {
    Timeout,
    Diverged,
    Trajectory,
    Control,
    /// Reached the wall outside the success tolerances.
    Tolerance,
}

/// Sample mean and unbiased standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Zero when fewer than two values are present.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<MeanSd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
        };
        Some(MeanSd { mean, sd })
    }
}

/// Landing statistics over the successful contacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandingStats {
    pub trials: usize,
    pub contacts: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Offsets in centimetres, pitch in degrees.
    pub y_cm: Option<MeanSd>,
    pub z_cm: Option<MeanSd>,
    pub pitch_deg: Option<MeanSd>,
    /// Signed pitch error from 90° (deg).
    pub pitch_error_deg: Option<MeanSd>,
}

/// Aggregates trial outcomes; only successful contacts enter the statistics.
pub fn landing_stats(outcomes: &[TrialOutcome]) -> LandingStats {
    let ok: Vec<&ContactRecord> = outcomes.iter().filter(|o| o.success).filter_map(|o| o.contact.as_ref()).collect();
    let col = |f: &dyn Fn(&ContactRecord) -> f64| ok.iter().map(|c| f(c)).collect::<Vec<_>>();
    let trials = outcomes.len();
    let successes = ok.len();
    LandingStats {
        trials,
        contacts: outcomes.iter().filter(|o| o.contact.is_some()).count(),
        successes,
        success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
        y_cm: MeanSd::of(&col(&|c| c.y * 100.0)),
        z_cm: MeanSd::of(&col(&|c| c.z * 100.0)),
        pitch_deg: MeanSd::of(&col(&|c| c.pitch.to_degrees())),
        pitch_error_deg: MeanSd::of(&col(&|c| c.pitch_error_deg())),
    }
}

/// Classifies a finished mission.
pub fn outcome_of(
    trial: usize,
    seed: u64,
    initial: QuadState,
    result: &Result<MissionLog, MissionError>,
    cfg: &MissionConfig,
) -> TrialOutcome {
    let (contact, failure) = match result {
        Ok(log) => {
            let c = log.contact;
            let ok = c.is_some_and(|c| c.is_success(cfg));
            (c, if ok { None } else { Some(TrialFailure::Tolerance) })
        }
        Err(MissionError::MissionTimeout(_)) => (None, Some(TrialFailure::Timeout)),
        Err(MissionError::SimulationDiverged(_)) => (None, Some(TrialFailure::Diverged)),
        Err(MissionError::Trajectory(_)) => (None, Some(TrialFailure::Trajectory)),
        Err(MissionError::Control(_) | MissionError::InvalidConfig(_)) => (None, Some(TrialFailure::Control)),
    };
    TrialOutcome { trial, seed, initial, contact, success: failure.is_none(), failure }
}

/// Seed of trial `i` under master seed `seed`.
pub fn trial_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, &[3, i as u64])
}

/// Runs `trial_count` independent missions. `reference_for` supplies Stage I for
/// each initial state (policy rollout or a scripted path).
pub fn monte_carlo_with<E, F>(setup: &MissionSetup, seed: u64, exec: &E, reference_for: F) -> (LandingStats, Vec<TrialOutcome>)
where
    E: Executor,
    F: Fn(&QuadState) -> Result<ReferenceTrajectory, MissionError> + Sync + Send,
{
    let jobs: Vec<usize> = (0..setup.mission.trial_count).collect();
    let outcomes = exec.map(jobs, |i| {
        let ts = trial_seed(seed, i);
        let s0 = sample_initial_state(&setup.mission, ts);
        let result = reference_for(&s0).and_then(|r| fly_reference(s0, r, setup));
        outcome_of(i, ts, s0, &result, &setup.mission)
    });
    (landing_stats(&outcomes), outcomes)
}

/// Monte-Carlo evaluation of the full pipeline with `policy` generating Stage I.
pub fn monte_carlo<E: Executor>(
    setup: &MissionSetup,
    policy: &MlpNet,
    seed: u64,
    exec: &E,
) -> (LandingStats, Vec<TrialOutcome>) {
    monte_carlo_with(setup, seed, exec, |s0| {
        let (r, _) = generate(policy, &setup.head, &setup.task, *s0, &setup.mission.rollout_tolerance)?;
        Ok(r)
    })
}
