//! Reinforcement-learning pieces: observation and policy, the perching MDP,
//! V-trace targets and the actor-critic trainer.

pub mod env;
pub mod policy;
pub mod train;
pub mod vtrace;

pub use env::{PerchEnv, PerchTask, RewardWeights, Termination};
pub use policy::{observe, GaussianPolicySample, Observation, PolicyHead};
pub use train::{train, CurveRow, TrainConfig, TrainError, TrainOutcome};
pub use vtrace::{vtrace_targets, Transition, VtraceTargets};
