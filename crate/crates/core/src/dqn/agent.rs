use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{clip_grad_norm, dqn_loss_and_grad};
use super::mlp::Mlp;
use super::optim::Optimizer;
use super::replay::{ReplayMemory, Transition};
use super::{select_action, TrainConfig};
use crate::error::{Error, Result};
use crate::planners::{ClassicalPlanner, Planner, PlannerKind, PlannerParams};
use crate::sim::{Action, OccupancyGrid, SimState, GRID_LEN};

/// Output index of the planner-backed action in an augmented head.
pub const OPTION_INDEX: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    /// Four primitive actions.
    Primitive,
    /// Primitives plus a P1 option.
    OursP1,
    /// Primitives plus a P3 option.
    OursP3,
}

impl AgentKind {
    pub fn n_outputs(self) -> usize {
        match self {
            AgentKind::Primitive => 4,
            AgentKind::OursP1 | AgentKind::OursP3 => 5,
        }
    }

    pub fn option_planner(self) -> Option<PlannerKind> {
        match self {
            AgentKind::Primitive => None,
            AgentKind::OursP1 => Some(PlannerKind::P1),
            AgentKind::OursP3 => Some(PlannerKind::P3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Primitive => "primitive",
            AgentKind::OursP1 => "ours-p1",
            AgentKind::OursP3 => "ours-p3",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "primitive" => Ok(AgentKind::Primitive),
            "ours-p1" => Ok(AgentKind::OursP1),
            "ours-p3" => Ok(AgentKind::OursP3),
            other => Err(Error::Config(format!("unknown agent '{other}'"))),
        }
    }
}

/// Q-network, target copy, optimizer, replay memory and the option planner.
pub struct DqnAgent {
    pub kind: AgentKind,
    pub config: TrainConfig,
    pub planner_params: PlannerParams,
    pub(crate) online: Mlp<f32>,
    pub(crate) target: Mlp<f32>,
    pub(crate) optimizer: Optimizer<f32>,
    pub(crate) explore_rng: ChaCha8Rng,
    pub(crate) sample_rng: ChaCha8Rng,
    pub(crate) grad_steps: u64,
    pub(crate) env_steps: u64,
    pub(crate) syncs: u64,
    pub(crate) episodes: u64,
    replay: ReplayMemory,
    planner: Option<Box<dyn Planner>>,
    option_active: bool,
}

impl std::fmt::Debug for DqnAgent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DqnAgent")
            .field("kind", &self.kind)
            .field("grad_steps", &self.grad_steps)
            .field("env_steps", &self.env_steps)
            .field("replay_len", &self.replay.len())
            .finish_non_exhaustive()
    }
}

impl DqnAgent {
    pub fn new(
        kind: AgentKind,
        config: TrainConfig,
        planner_params: PlannerParams,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![GRID_LEN];
        sizes.extend(&config.hidden);
        sizes.push(kind.n_outputs());
        let online = Mlp::init(&sizes, &mut init_rng);
        let optimizer = Optimizer::new(config.optimizer, config.lr, config.adam, &online);
        let mut explore_rng = ChaCha8Rng::seed_from_u64(seed);
        explore_rng.set_stream(1);
        let mut sample_rng = ChaCha8Rng::seed_from_u64(seed);
        sample_rng.set_stream(2);
        let planner = kind
            .option_planner()
            .map(|k| Box::new(ClassicalPlanner::new(k, planner_params.clone())) as Box<dyn Planner>);
        Ok(Self {
            kind,
            replay: ReplayMemory::new(config.replay_capacity),
            config,
            planner_params,
            target: online.clone(),
            online,
            optimizer,
            explore_rng,
            sample_rng,
            grad_steps: 0,
            env_steps: 0,
            syncs: 0,
            episodes: 0,
            planner,
            option_active: false,
        })
    }

    /// Replaces the option planner.
    pub fn set_planner(&mut self, planner: Option<Box<dyn Planner>>) {
        self.planner = planner;
        self.option_active = false;
    }

    pub fn n_outputs(&self) -> usize {
        self.online.output_dim()
    }

    pub fn online(&self) -> &Mlp<f32> {
        &self.online
    }

    pub fn target(&self) -> &Mlp<f32> {
        &self.target
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn q_values(&self, grid: &OccupancyGrid) -> Vec<f32> {
        self.online
            .forward_one(grid.as_slice())
            .expect("grid length matches the network input")
    }

    /// Call at the start of each episode.
    pub fn begin_episode(&mut self) {
        if let Some(p) = self.planner.as_mut() {
            p.reset();
        }
        self.option_active = false;
    }

    pub fn end_episode(&mut self) {
        self.episodes += 1;
    }

    /// The primitive action behind output `index`. The option index queries
    /// the planner on `state` for one step.
    pub fn resolve_action(&mut self, index: usize, state: &SimState) -> Result<Action> {
        if let Some(a) = Action::from_index(index) {
            self.option_active = false;
            return Ok(a);
        }
        if index != OPTION_INDEX || index >= self.n_outputs() {
            return Err(Error::Shape(format!(
                "action index {index} outside a {}-way head",
                self.n_outputs()
            )));
        }
        let planner = self
            .planner
            .as_mut()
            .ok_or_else(|| Error::Config("option selected but no planner is configured".into()))?;
        // Controller memory only carries over between consecutive option steps.
        if !self.option_active {
            planner.reset();
        }
        self.option_active = true;
        Ok(planner.suggest(state))
    }

    /// ε-greedy output index for `grid`, its Q-values, and the resolved
    /// primitive action.
    pub fn act(
        &mut self,
        state: &SimState,
        grid: &OccupancyGrid,
        epsilon: f64,
    ) -> Result<(usize, Vec<f32>, Action)> {
        let q = self.q_values(grid);
        let index = select_action(&q, epsilon, &mut self.explore_rng);
        let action = self.resolve_action(index, state)?;
        Ok((index, q, action))
    }

    /// Stores a transition and runs a gradient step when one is due. Returns
    /// the loss of that step.
    pub fn observe(&mut self, transition: Transition) -> Result<Option<f32>> {
        if transition.action as usize >= self.n_outputs() {
            return Err(Error::Shape(format!(
                "stored action {} outside a {}-way head",
                transition.action,
                self.n_outputs()
            )));
        }
        self.replay.push(&transition);
        self.env_steps += 1;
        let ready = self.replay.len() >= self.config.learn_start.max(self.config.batch_size);
        if ready && self.env_steps.is_multiple_of(self.config.train_every) {
            return self.train_step().map(Some);
        }
        Ok(None)
    }

    /// One minibatch gradient step; copies the online network into the
    /// target every `target_sync_interval` steps.
    pub fn train_step(&mut self) -> Result<f32> {
        let batch = self.replay.sample_batch::<f32, _>(self.config.batch_size, &mut self.sample_rng)?;
        let gamma = self.config.gamma as f32;
        let (loss, mut grads) = dqn_loss_and_grad(&self.online, &self.target, &batch, gamma)?;
        if self.config.grad_clip > 0.0 {
            clip_grad_norm(&mut grads, self.config.grad_clip as f32);
        }
        self.optimizer.step(&mut self.online, &grads);
        self.grad_steps += 1;
        if self.grad_steps.is_multiple_of(self.config.target_sync_interval) {
            self.sync_target();
        }
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
        self.syncs += 1;
    }
}
