//! Actor-critic learner: collect rollouts with a frozen behaviour snapshot, then
//! run several epochs of hinge-loss policy updates and squared-error value
//! regression against V-trace targets.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{MotorCommand, QuadState};
use crate::exec::{derive_seed, Executor};
use crate::nn::{MlpNet, NnError};
use crate::rl::env::{PerchEnv, PerchTask, RewardWeights, Termination};
use crate::rl::policy::{
    log_likelihood_backward, policy_act, policy_distribution, value, value_backward, PolicyHead,
    ACTION_DIM, OBS_DIM, POLICY_OUT,
};
use crate::rl::vtrace::{
    clipped_ratio, policy_loss, policy_loss_grad, value_loss, value_loss_grad, vtrace_from_parts,
    Transition,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Discount per policy decision, in (0, 1).
    pub gamma: f64,
    /// Hinge margin, > 0.
    pub xi: f64,
    /// Importance-ratio clip, >= 1.
    pub rho_bar: f64,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub momentum: f64,
    /// Simulated seconds per episode.
    pub episode_seconds: f64,
    /// Seconds each sampled motor command is held.
    pub action_period: f64,
    pub sim_dt: f64,
    /// Total episodes collected over training.
    pub episode_budget: usize,
    pub episodes_per_iteration: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub weights: RewardWeights,
    /// Hidden layer widths, shared by the policy and value networks.
    pub hidden: Vec<usize>,
    /// Initial log standard deviation in network units.
    pub init_log_std: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    /// Scale applied to rewards before value/advantage estimation.
    pub reward_scale: f64,
    /// Standardise advantages per batch before the hinge loss.
    pub normalize_advantages: bool,
    /// Global gradient-norm clip per network; 0 disables.
    pub max_grad_norm: f64,
    /// Leaving this radius around the perch point ends the episode (m).
    pub arena_radius: f64,
    /// Wall-contact terminal cost in multiples of the contact pose's running cost.
    pub contact_cost_steps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            xi: 0.01,
            rho_bar: 2.0,
            lr_policy: 3e-4,
            lr_value: 1e-3,
            momentum: 0.9,
            episode_seconds: 3.0,
            action_period: 0.01,
            sim_dt: 0.001,
            episode_budget: 25600,
            episodes_per_iteration: 16,
            epochs: 4,
            minibatch: 256,
            weights: RewardWeights::default(),
            hidden: vec![128, 128, 32],
            init_log_std: -1.5,
            log_std_min: -5.0,
            log_std_max: 1.0,
            reward_scale: 0.01,
            normalize_advantages: true,
            max_grad_norm: 5.0,
            arena_radius: 4.0,
            contact_cost_steps: 40.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    InvalidConfig(&'static str),
    Network(NnError),
    DivergedTraining { iteration: usize },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::InvalidConfig(what) => write!(f, "invalid training config: {what}"),
            TrainError::Network(e) => write!(f, "network error: {e}"),
            TrainError::DivergedTraining { iteration } => {
                write!(f, "training diverged (NaN mean return) at iteration {iteration}")
            }
        }
    }
}

impl core::error::Error for TrainError {}

impl From<NnError> for TrainError {
    fn from(e: NnError) -> Self {
        TrainError::Network(e)
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        use TrainError::InvalidConfig as Bad;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Bad("gamma must lie in (0, 1)"));
        }
        if !(self.xi > 0.0) {
            return Err(Bad("xi must be positive"));
        }
        if !(self.rho_bar >= 1.0) {
            return Err(Bad("rho_bar must be >= 1"));
        }
        if !(self.lr_policy >= 0.0 && self.lr_value >= 0.0) {
            return Err(Bad("learning rates must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Bad("momentum must lie in [0, 1)"));
        }
        let w = &self.weights;
        if !(w.w1 > 0.0 && w.w2 > 0.0 && w.w3 > 0.0) {
            return Err(Bad("reward weights must be positive"));
        }
        if !(self.sim_dt > 0.0 && self.sim_dt <= crate::dynamics::MAX_DT) {
            return Err(Bad("sim_dt must lie in (0, 0.01]"));
        }
        if !(self.action_period >= self.sim_dt) {
            return Err(Bad("action_period must be at least sim_dt"));
        }
        if !(self.episode_seconds >= self.action_period) {
            return Err(Bad("episode_seconds must cover at least one action"));
        }
        if self.episodes_per_iteration == 0 || self.epochs == 0 || self.minibatch == 0 {
            return Err(Bad("batch sizes must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Bad("hidden widths must be non-empty and positive"));
        }
        if !(self.log_std_min < self.log_std_max) {
            return Err(Bad("log_std_min must be below log_std_max"));
        }
        if !(self.reward_scale > 0.0) {
            return Err(Bad("reward_scale must be positive"));
        }
        if !(self.max_grad_norm >= 0.0) {
            return Err(Bad("max_grad_norm must be non-negative"));
        }
        if !(self.arena_radius > 0.0) {
            return Err(Bad("arena_radius must be positive"));
        }
        if !(self.contact_cost_steps >= 0.0 && self.contact_cost_steps.is_finite()) {
            return Err(Bad("contact_cost_steps must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn action_repeat(&self) -> usize {
        libm::round(self.action_period / self.sim_dt).max(1.0) as usize
    }

    pub fn iterations(&self) -> usize {
        self.episode_budget.div_ceil(self.episodes_per_iteration)
    }

    pub fn policy_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBS_DIM];
        s.extend_from_slice(&self.hidden);
        s.push(POLICY_OUT);
        s
    }

    pub fn value_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBS_DIM];
        s.extend_from_slice(&self.hidden);
        s.push(1);
        s
    }

    /// Applies the episode, timing, discount and reward settings to `task`.
    pub fn configure_task(&self, task: &mut PerchTask) {
        task.gamma = self.gamma;
        task.weights = self.weights;
        task.sim_dt = self.sim_dt;
        task.action_repeat = self.action_repeat();
        task.max_sim_steps = libm::round(self.episode_seconds / self.sim_dt) as usize;
        task.arena_radius = self.arena_radius;
        task.contact_cost_steps = self.contact_cost_steps;
    }

    pub fn policy_head(&self, task: &PerchTask) -> PolicyHead {
        PolicyHead::new(&task.params, self.log_std_min, self.log_std_max)
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    /// Episodes collected so far, including this iteration.
    pub episodes: usize,
    /// Mean undiscounted episode return (terminal continuation included).
    pub mean_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: MlpNet,
    pub value: MlpNet,
    pub curve: Vec<CurveRow>,
}

/// A collected episode.
#[derive(Debug, Clone)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub total_reward: f64,
    pub termination: Option<Termination>,
}

/// Freshly initialised policy and value networks.
///
/// The policy's mean outputs start near hover thrust and its log-std outputs
/// near `init_log_std`; both output layers start with small weights.
pub fn init_networks(cfg: &TrainConfig, task: &PerchTask) -> Result<(MlpNet, MlpNet), TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0]));
    let head = cfg.policy_head(task);
    let mut policy = MlpNet::glorot(&cfg.policy_sizes(), 0.01, &mut rng)?;
    let bias = policy.output_bias_offset();
    let hover = head.unit_for_thrust(task.params.hover_thrust());
    for i in 0..ACTION_DIM {
        policy.params_mut()[bias + i] = hover;
        policy.params_mut()[bias + ACTION_DIM + i] = cfg.init_log_std;
    }
    let value = MlpNet::glorot(&cfg.value_sizes(), 0.1, &mut rng)?;
    Ok((policy, value))
}

/// Runs one stochastic episode from `s0`.
pub fn collect_episode<R: Rng + ?Sized>(
    policy: &MlpNet,
    head: &PolicyHead,
    task: &PerchTask,
    s0: QuadState,
    rng: &mut R,
) -> Episode {
    let mut env = PerchEnv::new(task, s0);
    let mut transitions = Vec::with_capacity(task.max_sim_steps / task.action_repeat + 1);
    let mut total_reward = 0.0;
    loop {
        let obs = env.observation();
        let sample = policy_act(policy, &obs, head, rng);
        let out = env.step(&sample.action);
        total_reward += out.reward;
        transitions.push(Transition {
            obs,
            action: sample.action,
            reward: out.reward,
            next_obs: out.obs,
            behavior_log_likelihood: sample.log_likelihood,
            terminal: out.termination.is_some(),
        });
        if out.termination.is_some() || out.truncated {
            return Episode { transitions, total_reward, termination: out.termination };
        }
    }
}

struct Momentum {
    velocity: Vec<f64>,
    lr: f64,
    beta: f64,
}

impl Momentum {
    fn new(n: usize, lr: f64, beta: f64) -> Self {
        Self { velocity: vec![0.0; n], lr, beta }
    }

    fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        if self.lr == 0.0 {
            return;
        }
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.beta * *v + g;
            *p -= self.lr * *v;
        }
    }
}

fn clip_norm(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

struct Sample {
    episode: usize,
    step: usize,
    advantage: f64,
    target: f64,
}

/// Trains from freshly initialised networks.
///
/// `sampler` draws initial states; `on_iteration` sees every curve row together
/// with the networks after that iteration's updates.
pub fn train<E, S, C>(
    task: &PerchTask,
    cfg: &TrainConfig,
    sampler: S,
    exec: &E,
    on_iteration: C,
) -> Result<TrainOutcome, TrainError>
where
    E: Executor,
    S: Fn(&mut ChaCha8Rng) -> QuadState + Sync + Send,
    C: FnMut(&CurveRow, &MlpNet, &MlpNet),
{
    cfg.validate()?;
    let mut task = task.clone();
    cfg.configure_task(&mut task);
    let (policy, value) = init_networks(cfg, &task)?;
    train_from(&task, cfg, policy, value, sampler, exec, on_iteration)
}

/// Continues training the given networks on an already-configured `task`.
pub fn train_from<E, S, C>(
    task: &PerchTask,
    cfg: &TrainConfig,
    mut policy: MlpNet,
    mut value_net: MlpNet,
    sampler: S,
    exec: &E,
    mut on_iteration: C,
) -> Result<TrainOutcome, TrainError>
where
    E: Executor,
    S: Fn(&mut ChaCha8Rng) -> QuadState + Sync + Send,
    C: FnMut(&CurveRow, &MlpNet, &MlpNet),
{
    cfg.validate()?;
    let head = cfg.policy_head(task);
    let mut policy_opt = Momentum::new(policy.params().len(), cfg.lr_policy, cfg.momentum);
    let mut value_opt = Momentum::new(value_net.params().len(), cfg.lr_value, cfg.momentum);
    let mut policy_grad = vec![0.0; policy.params().len()];
    let mut value_grad = vec![0.0; value_net.params().len()];
    let mut curve = Vec::with_capacity(cfg.iterations());
    let mut episodes_done = 0;

    for iteration in 0..cfg.iterations() {
        let n_eps = cfg.episodes_per_iteration.min(cfg.episode_budget - episodes_done);
        let behavior = policy.clone();
        let jobs: Vec<u64> = (0..n_eps as u64).map(|e| derive_seed(cfg.seed, &[1, iteration as u64, e])).collect();
        let episodes: Vec<Episode> = exec.map(jobs, |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s0 = sampler(&mut rng);
            collect_episode(&behavior, &head, task, s0, &mut rng)
        });
        episodes_done += n_eps;
        let mean_return = episodes.iter().map(|e| e.total_reward).sum::<f64>() / n_eps as f64;
        if mean_return.is_nan() {
            return Err(TrainError::DivergedTraining { iteration });
        }

        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2, iteration as u64]));
        let (mut p_loss_sum, mut v_loss_sum, mut n_loss) = (0.0, 0.0, 0usize);
        for _epoch in 0..cfg.epochs {
            let mut samples = targets_for(&episodes, &policy, &value_net, &head, cfg, exec);
            if cfg.normalize_advantages && samples.len() > 1 {
                let n = samples.len() as f64;
                let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
                let var = samples.iter().map(|s| (s.advantage - mean) * (s.advantage - mean)).sum::<f64>() / n;
                let sd = libm::sqrt(var).max(1e-8);
                samples.iter_mut().for_each(|s| s.advantage = (s.advantage - mean) / sd);
            }
            samples.shuffle(&mut shuffle_rng);
            for batch in samples.chunks(cfg.minibatch) {
                policy_grad.fill(0.0);
                value_grad.fill(0.0);
                let inv = 1.0 / batch.len() as f64;
                let parts = exec.map(batch.chunks(GRAD_CHUNK).collect(), |chunk| {
                    chunk_gradients(chunk, &episodes, &policy, &value_net, &head, cfg, inv)
                });
                for part in parts {
                    axpy_into(&mut policy_grad, &part.policy_grad);
                    axpy_into(&mut value_grad, &part.value_grad);
                    p_loss_sum += part.policy_loss;
                    v_loss_sum += part.value_loss;
                    n_loss += part.samples;
                }
                clip_norm(&mut policy_grad, cfg.max_grad_norm);
                clip_norm(&mut value_grad, cfg.max_grad_norm);
                policy_opt.apply(policy.params_mut(), &policy_grad);
                value_opt.apply(value_net.params_mut(), &value_grad);
            }
        }
        let row = CurveRow {
            iteration,
            episodes: episodes_done,
            mean_return,
            policy_loss: p_loss_sum / n_loss.max(1) as f64,
            value_loss: v_loss_sum / n_loss.max(1) as f64,
        };
        on_iteration(&row, &policy, &value_net);
        curve.push(row);
    }
    Ok(TrainOutcome { policy, value: value_net, curve })
}

fn targets_for<E: Executor>(
    episodes: &[Episode],
    policy: &MlpNet,
    value_net: &MlpNet,
    head: &PolicyHead,
    cfg: &TrainConfig,
    exec: &E,
) -> Vec<Sample> {
    let per_episode = exec.map(episodes.iter().enumerate().collect(), |(ei, ep)| {
        let traj = &ep.transitions;
        let rewards: Vec<f64> = traj.iter().map(|t| t.reward * cfg.reward_scale).collect();
        let values: Vec<f64> = traj.iter().map(|t| value(value_net, &t.obs)).collect();
        let ratios: Vec<f64> = traj
            .iter()
            .map(|t| {
                let log_pi = policy_distribution(policy, &t.obs, head).log_density(&t.action);
                clipped_ratio(log_pi, t.behavior_log_likelihood, cfg.rho_bar)
            })
            .collect();
        let last = traj.last().expect("episodes have at least one transition");
        let bootstrap = if last.terminal { 0.0 } else { value(value_net, &last.next_obs) };
        let Ok(t) = vtrace_from_parts(&rewards, &values, bootstrap, &ratios, cfg.gamma) else {
            return Vec::new();
        };
        t.advantages
            .into_iter()
            .zip(t.value_targets)
            .enumerate()
            .map(|(k, (adv, target))| Sample { episode: ei, step: k, advantage: adv, target })
            .collect::<Vec<_>>()
    });
    per_episode.into_iter().flatten().collect()
}

/// Samples per gradient job. Fixed so the summation order, and hence the
/// trained weights, do not depend on the executor.
const GRAD_CHUNK: usize = 32;

struct ChunkGrad {
    policy_grad: Vec<f64>,
    value_grad: Vec<f64>,
    policy_loss: f64,
    value_loss: f64,
    samples: usize,
}

fn axpy_into(acc: &mut [f64], part: &[f64]) {
    for (a, p) in acc.iter_mut().zip(part) {
        *a += p;
    }
}

fn chunk_gradients(
    chunk: &[Sample],
    episodes: &[Episode],
    policy: &MlpNet,
    value_net: &MlpNet,
    head: &PolicyHead,
    cfg: &TrainConfig,
    inv: f64,
) -> ChunkGrad {
    let mut out = ChunkGrad {
        policy_grad: vec![0.0; policy.params().len()],
        value_grad: vec![0.0; value_net.params().len()],
        policy_loss: 0.0,
        value_loss: 0.0,
        samples: chunk.len(),
    };
    let mut policy_acts = policy.activations();
    let mut value_acts = value_net.activations();
    for s in chunk {
        let tr = &episodes[s.episode].transitions[s.step];
        log_likelihood_backward(
            policy,
            &mut policy_acts,
            &tr.obs,
            head,
            &tr.action,
            |ll| {
                let log_ratio = ll - tr.behavior_log_likelihood;
                out.policy_loss += policy_loss(s.advantage, log_ratio, cfg.xi);
                policy_loss_grad(s.advantage, log_ratio, cfg.xi) * inv
            },
            &mut out.policy_grad,
        );
        value_backward(
            value_net,
            &mut value_acts,
            &tr.obs,
            |v| {
                out.value_loss += value_loss(s.target, v);
                value_loss_grad(s.target, v) * inv
            },
            &mut out.value_grad,
        );
    }
    out
}

/// Deterministic mean-action evaluation: returns the mean undiscounted return
/// over `starts` and the number of episodes that ended in wall contact.
pub fn evaluate_policy(
    policy: &MlpNet,
    head: &PolicyHead,
    task: &PerchTask,
    starts: &[QuadState],
) -> (f64, usize) {
    let mut total = 0.0;
    let mut contacts = 0;
    for s0 in starts {
        let mut env = PerchEnv::new(task, *s0);
        loop {
            let obs = env.observation();
            let a = MotorCommand(policy_distribution(policy, &obs, head).mean);
            let out = env.step(&a);
            total += out.reward;
            if let Some(t) = out.termination {
                contacts += matches!(t, Termination::Contact(_)) as usize;
                break;
            }
            if out.truncated {
                break;
            }
        }
    }
    (total / starts.len().max(1) as f64, contacts)
}
