//! JSON checkpoints of an agent's learnable state. Floats are written in
//! shortest round-trip form, so loading restores every parameter bit-exactly.
//! The replay memory is not saved.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{AgentKind, DqnAgent};
use super::mlp::Mlp;
use super::optim::Optimizer;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::planners::PlannerParams;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub kind: AgentKind,
    pub train: TrainConfig,
    pub planner: PlannerParams,
    pub online: Mlp<f32>,
    pub target: Mlp<f32>,
    pub optimizer: Optimizer<f32>,
    pub explore_rng: ChaCha8Rng,
    pub sample_rng: ChaCha8Rng,
    pub grad_steps: u64,
    pub env_steps: u64,
    pub syncs: u64,
    pub episodes: u64,
}

impl Checkpoint {
    pub fn capture(agent: &DqnAgent) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            kind: agent.kind,
            train: agent.config.clone(),
            planner: agent.planner_params.clone(),
            online: agent.online.clone(),
            target: agent.target.clone(),
            optimizer: agent.optimizer.clone(),
            explore_rng: agent.explore_rng.clone(),
            sample_rng: agent.sample_rng.clone(),
            grad_steps: agent.grad_steps,
            env_steps: agent.env_steps,
            syncs: agent.syncs,
            episodes: agent.episodes,
        }
    }

    /// Rebuilds an agent with an empty replay memory.
    pub fn restore(&self) -> Result<DqnAgent> {
        self.check()?;
        let mut agent = DqnAgent::new(self.kind, self.train.clone(), self.planner.clone(), 0)?;
        agent.online = self.online.clone();
        agent.target = self.target.clone();
        agent.optimizer = self.optimizer.clone();
        agent.explore_rng = self.explore_rng.clone();
        agent.sample_rng = self.sample_rng.clone();
        agent.grad_steps = self.grad_steps;
        agent.env_steps = self.env_steps;
        agent.syncs = self.syncs;
        agent.episodes = self.episodes;
        Ok(agent)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Checkpoint(m.to_string()));
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let mut sizes = vec![crate::sim::GRID_LEN];
        sizes.extend(&self.train.hidden);
        sizes.push(self.kind.n_outputs());
        if self.online.sizes() != sizes || !self.online.same_shape(&self.target) {
            return bad("network shapes disagree with the agent kind and config");
        }
        if let Optimizer::Adam { m, v, .. } = &self.optimizer {
            if !m.same_shape(&self.online) || !v.same_shape(&self.online) {
                return bad("optimizer moments disagree with the network shape");
            }
        }
        if !self.online.is_finite() || !self.target.is_finite() {
            return bad("non-finite parameters");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ckpt.check()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
