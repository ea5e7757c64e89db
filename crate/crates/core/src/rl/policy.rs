//! Observation encoding and the diagonal-Gaussian motor policy.

use libm::{exp, log};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{MotorCommand, QuadParams, QuadState};
use crate::nn::{Activations, MlpNet};
use crate::so3::Vec3;

pub const OBS_DIM: usize = 18;
pub const ACTION_DIM: usize = 4;
/// Policy network outputs: four means followed by four log standard deviations.
pub const POLICY_OUT: usize = 2 * ACTION_DIM;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `[R (row-major, 9), Ω, x − perch, v]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

pub fn observe(s: &QuadState, perch_point: Vec3) -> Observation {
    let mut o = [0.0; OBS_DIM];
    o[..9].copy_from_slice(&s.r.as_mat().to_flat());
    let rel = s.x - perch_point;
    for (i, v) in [s.omega, rel, s.v].into_iter().enumerate() {
        o[9 + 3 * i..12 + 3 * i].copy_from_slice(&v.to_array());
    }
    Observation(o)
}

/// Maps network outputs to thrusts and bounds the log standard deviation.
///
/// The network mean `u` maps to thrust `mid + half_range · u`, centred on the
/// middle of the motor range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyHead {
    pub thrust_mid: f64,
    pub thrust_half_range: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl PolicyHead {
    pub fn new(p: &QuadParams, log_std_min: f64, log_std_max: f64) -> Self {
        Self {
            thrust_mid: 0.5 * (p.thrust_min + p.thrust_max),
            thrust_half_range: 0.5 * (p.thrust_max - p.thrust_min),
            log_std_min,
            log_std_max,
        }
    }

    /// Network-unit mean that produces `thrust`.
    pub fn unit_for_thrust(&self, thrust: f64) -> f64 {
        (thrust - self.thrust_mid) / self.thrust_half_range
    }
}

/// Action distribution in thrust units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDistribution {
    pub mean: [f64; ACTION_DIM],
    pub std: [f64; ACTION_DIM],
}

impl ActionDistribution {
    pub fn from_output(out: &[f64], head: &PolicyHead) -> Self {
        let mut mean = [0.0; ACTION_DIM];
        let mut std = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            mean[i] = head.thrust_mid + head.thrust_half_range * out[i];
            let log_std = out[ACTION_DIM + i].clamp(head.log_std_min, head.log_std_max);
            std[i] = head.thrust_half_range * exp(log_std);
        }
        Self { mean, std }
    }

    pub fn log_density(&self, a: &MotorCommand) -> f64 {
        (0..ACTION_DIM)
            .map(|i| {
                let z = (a.0[i] - self.mean[i]) / self.std[i];
                -0.5 * z * z - log(self.std[i]) - LN_SQRT_2PI
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MotorCommand {
        let mut a = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            let n: f64 = StandardNormal.sample(rng);
            a[i] = self.mean[i] + self.std[i] * n;
        }
        MotorCommand(a)
    }
}

/// Sampled (unclamped) action and its log-density under the emitting policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPolicySample {
    pub action: MotorCommand,
    pub log_likelihood: f64,
}

pub fn policy_distribution(net: &MlpNet, obs: &Observation, head: &PolicyHead) -> ActionDistribution {
    ActionDistribution::from_output(&net.predict(&obs.0), head)
}

/// Stochastic action; deterministic given the state of `rng`.
pub fn policy_act<R: Rng + ?Sized>(
    net: &MlpNet,
    obs: &Observation,
    head: &PolicyHead,
    rng: &mut R,
) -> GaussianPolicySample {
    let dist = policy_distribution(net, obs, head);
    let action = dist.sample(rng);
    GaussianPolicySample { action, log_likelihood: dist.log_density(&action) }
}

/// Mean action, used for evaluation rollouts.
pub fn policy_mean(net: &MlpNet, obs: &Observation, head: &PolicyHead) -> MotorCommand {
    MotorCommand(policy_distribution(net, obs, head).mean)
}

pub fn value(net: &MlpNet, obs: &Observation) -> f64 {
    net.predict(&obs.0)[0]
}

/// Log-likelihood of `action` under the current policy; `upstream` maps it to
/// `∂L/∂log π`, and the resulting parameter gradient is accumulated into `grad`.
/// Returns the log-likelihood.
pub fn log_likelihood_backward(
    net: &MlpNet,
    acts: &mut Activations,
    obs: &Observation,
    head: &PolicyHead,
    action: &MotorCommand,
    upstream: impl FnOnce(f64) -> f64,
    grad: &mut [f64],
) -> f64 {
    let out = net.forward(&obs.0, acts);
    let dist = ActionDistribution::from_output(out, head);
    let ll = dist.log_density(action);
    let up = upstream(ll);
    if up == 0.0 {
        return ll;
    }
    let mut d_out = [0.0; POLICY_OUT];
    for i in 0..ACTION_DIM {
        let z = (action.0[i] - dist.mean[i]) / dist.std[i];
        // ∂ log π/∂ mean_unit = z · half_range / std,  ∂ log π/∂ log_std = z² − 1
        d_out[i] = up * z * head.thrust_half_range / dist.std[i];
        let raw = out[ACTION_DIM + i];
        if raw > head.log_std_min && raw < head.log_std_max {
            d_out[ACTION_DIM + i] = up * (z * z - 1.0);
        }
    }
    net.backward(acts, &d_out, grad);
    ll
}

/// Value of `obs`; `upstream` maps it to `∂L/∂V` and the parameter gradient is
/// accumulated into `grad`.
pub fn value_backward(
    net: &MlpNet,
    acts: &mut Activations,
    obs: &Observation,
    upstream: impl FnOnce(f64) -> f64,
    grad: &mut [f64],
) -> f64 {
    let v = net.forward(&obs.0, acts)[0];
    let up = upstream(v);
    if up != 0.0 {
        net.backward(acts, &[up], grad);
    }
    v
}
