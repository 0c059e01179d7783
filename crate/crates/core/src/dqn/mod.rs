//! Deep Q-learning over the occupancy grid, with optional planner-backed
//! fifth action.

pub mod agent;
pub mod checkpoint;
pub mod explore;
pub mod loss;
pub mod mlp;
pub mod optim;
pub mod replay;
pub mod tabular;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use agent::{AgentKind, DqnAgent, OPTION_INDEX};
pub use checkpoint::Checkpoint;
pub use explore::{argmax, epsilon_at, select_action, EpsilonSchedule};
pub use loss::{clip_grad_norm, dqn_loss_and_grad, td_targets, Batch};
pub use mlp::{Mlp, Real};
pub use optim::{AdamParams, Optimizer, OptimizerKind};
pub use replay::{ReplayBuffer, ReplayMemory, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub gamma: f64,
    /// Gradient steps between target network copies.
    pub target_sync_interval: u64,
    pub batch_size: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: u64,
    pub epsilon_schedule: EpsilonSchedule,
    pub optimizer: OptimizerKind,
    pub adam: AdamParams,
    pub train_episodes: u64,
    /// Transitions collected before the first gradient step.
    pub learn_start: usize,
    pub replay_capacity: usize,
    /// Global gradient-norm cap; 0 disables clipping.
    pub grad_clip: f64,
    /// Environment steps per gradient step.
    pub train_every: u64,
    /// Episodes between checkpoints; 0 writes only the final one.
    pub checkpoint_every: u64,
    pub hidden: Vec<usize>,
    pub eval_episodes: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            gamma: 0.99,
            target_sync_interval: 100,
            batch_size: 32,
            eps_start: 0.1,
            eps_end: 0.02,
            eps_decay_steps: 2000,
            epsilon_schedule: EpsilonSchedule::PerEpisode,
            optimizer: OptimizerKind::Adam,
            adam: AdamParams::default(),
            train_episodes: 10_000,
            learn_start: 1000,
            replay_capacity: 1_000_000,
            grad_clip: 10.0,
            train_every: 1,
            checkpoint_every: 500,
            hidden: vec![128, 128, 128],
            eval_episodes: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("epsilon values must lie in [0, 1]".into());
        }
        if self.eps_end > self.eps_start {
            return bad("eps_end exceeds eps_start".into());
        }
        if self.target_sync_interval == 0 || self.batch_size == 0 || self.train_every == 0 {
            return bad("intervals and batch size must be positive".into());
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay capacity smaller than a batch".into());
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return bad("grad_clip must be non-negative".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps be positive".into());
        }
        Ok(())
    }

    /// ε for a step, given the step index within the episode and the total
    /// environment steps so far.
    pub fn epsilon(&self, step_in_episode: u64, total_steps: u64) -> f64 {
        let step = match self.epsilon_schedule {
            EpsilonSchedule::PerEpisode => step_in_episode,
            EpsilonSchedule::Global => total_steps,
        };
        epsilon_at(step, self.eps_start, self.eps_end, self.eps_decay_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cases: Vec<fn(&mut TrainConfig)> = vec![
            |c| c.gamma = 1.0,
            |c| c.gamma = -0.1,
            |c| c.eps_end = 0.5,
            |c| c.target_sync_interval = 0,
            |c| c.batch_size = 0,
            |c| c.hidden = vec![],
            |c| c.lr = 0.0,
        ];
        for f in cases {
            let mut c = TrainConfig::default();
            f(&mut c);
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn schedules_pick_their_clock() {
        let mut c = TrainConfig::default();
        assert_eq!(c.epsilon(0, 5000), 0.1);
        c.epsilon_schedule = EpsilonSchedule::Global;
        assert_eq!(c.epsilon(0, 5000), 0.02);
    }
}
