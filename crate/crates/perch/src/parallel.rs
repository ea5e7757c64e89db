use perch_core::exec::Executor;
use rayon::prelude::*;

/// Runs jobs on the rayon thread pool; results keep input order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_par_iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use perch_core::exec::Sequential;
    use perch_core::mission::{initial_state_sampler, MissionConfig};
    use perch_core::rl::env::PerchTask;
    use perch_core::rl::train::{train, TrainConfig};

    #[test]
    fn training_matches_sequential_bit_for_bit() {
        let cfg = TrainConfig {
            episode_budget: 8,
            episodes_per_iteration: 4,
            episode_seconds: 0.5,
            minibatch: 100,
            seed: 3,
            ..TrainConfig::default()
        };
        let mission = MissionConfig::default();
        let task = PerchTask::new(Default::default());
        let a = train(&task, &cfg, initial_state_sampler(&mission), &Sequential, |_, _, _| {}).unwrap();
        let b = train(&task, &cfg, initial_state_sampler(&mission), &Rayon, |_, _, _| {}).unwrap();
        assert_eq!(a.policy.params(), b.policy.params());
        assert_eq!(a.value.params(), b.value.params());
        assert_eq!(a.curve, b.curve);
    }
}
