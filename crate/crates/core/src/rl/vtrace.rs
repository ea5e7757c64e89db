//! V-trace style targets and the two training objectives.
//!
//! The advantage recursion carries the next advantage with the next step's
//! importance ratio and no extra discount:
//!
//! ```text
//! Â_t = r_t + γ V(s_{t+1}) − V(s_t) + ρ_{t+1} Â_{t+1},   Â_T = 0
//! V̂_t = V(s_t) + ρ_t Â_t
//! ```
//!
//! With `γ < 1` the fixed point is still `V^π` (all TD errors vanish there),
//! but the undecayed sum weights distant TD errors equally.

use alloc::vec::Vec;
use core::fmt;

use libm::exp;

use crate::dynamics::MotorCommand;
use crate::nn::MlpNet;
use crate::rl::policy::{policy_distribution, value, Observation, PolicyHead};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    /// Unclamped sampled action.
    pub action: MotorCommand,
    pub reward: f64,
    pub next_obs: Observation,
    /// `log μ(a|s)` recorded at collection time.
    pub behavior_log_likelihood: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyTrajectory;

impl fmt::Display for EmptyTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("trajectory is empty")
    }
}

impl core::error::Error for EmptyTrajectory {}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtraceTargets {
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
}

/// Importance ratio `π/μ` from log-likelihoods, clipped above at `rho_bar`.
#[inline]
pub fn clipped_ratio(log_pi: f64, log_mu: f64, rho_bar: f64) -> f64 {
    let d = log_pi - log_mu;
    if d >= libm::log(rho_bar) {
        rho_bar
    } else {
        exp(d)
    }
}

/// Backward recursion over precomputed pieces.
///
/// `values[t] = V(s_t)`, `bootstrap = V(s_T)` (zero when terminal), and
/// `ratios[t] = ρ_t` (already clipped).
pub fn vtrace_from_parts(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    ratios: &[f64],
    gamma: f64,
) -> Result<VtraceTargets, EmptyTrajectory> {
    let n = rewards.len();
    if n == 0 {
        return Err(EmptyTrajectory);
    }
    assert!(values.len() == n && ratios.len() == n, "mismatched trajectory pieces");
    let mut advantages = alloc::vec![0.0; n];
    let mut value_targets = alloc::vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_ratio = 0.0;
    for t in (0..n).rev() {
        let next_v = if t + 1 < n { values[t + 1] } else { bootstrap };
        let adv = rewards[t] + gamma * next_v - values[t] + next_ratio * next_adv;
        advantages[t] = adv;
        value_targets[t] = values[t] + ratios[t] * adv;
        next_adv = adv;
        next_ratio = ratios[t];
    }
    Ok(VtraceTargets { advantages, value_targets })
}

/// Targets for one contiguous trajectory under the current networks.
pub fn vtrace_targets(
    traj: &[Transition],
    net_v: &MlpNet,
    net_pi: &MlpNet,
    head: &PolicyHead,
    gamma: f64,
    rho_bar: f64,
) -> Result<VtraceTargets, EmptyTrajectory> {
    let last = traj.last().ok_or(EmptyTrajectory)?;
    let rewards: Vec<f64> = traj.iter().map(|t| t.reward).collect();
    let values: Vec<f64> = traj.iter().map(|t| value(net_v, &t.obs)).collect();
    let ratios: Vec<f64> = traj
        .iter()
        .map(|t| {
            let log_pi = policy_distribution(net_pi, &t.obs, head).log_density(&t.action);
            clipped_ratio(log_pi, t.behavior_log_likelihood, rho_bar)
        })
        .collect();
    let bootstrap = if last.terminal { 0.0 } else { value(net_v, &last.next_obs) };
    vtrace_from_parts(&rewards, &values, bootstrap, &ratios, gamma)
}

/// Hinge objective `max(0, ξ − Â·log(π/μ))`.
#[inline]
pub fn policy_loss(advantage: f64, log_ratio: f64, xi: f64) -> f64 {
    (xi - advantage * log_ratio).max(0.0)
}

/// `∂ policy_loss / ∂ log_ratio`.
#[inline]
pub fn policy_loss_grad(advantage: f64, log_ratio: f64, xi: f64) -> f64 {
    if xi - advantage * log_ratio > 0.0 {
        -advantage
    } else {
        0.0
    }
}

#[inline]
pub fn value_loss(target: f64, v: f64) -> f64 {
    (target - v) * (target - v)
}

/// `∂ value_loss / ∂ v`.
#[inline]
pub fn value_loss_grad(target: f64, v: f64) -> f64 {
    -2.0 * (target - v)
}
