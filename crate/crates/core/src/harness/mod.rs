//! Episode runner, evaluation, training and metrics.

mod human;
mod train;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dqn::{argmax, DqnAgent, OPTION_INDEX};
use crate::error::{Error, Result};
use crate::eventlog::{EventLogWriter, StepRecord};
use crate::planners::{ClassicalPlanner, Planner};
use crate::sim::{ms_to_kmh, observe, Action, Outcome, SimConfig, SimState};

pub use human::{ingest_human_logs, stats_from_log, HumanReport, TrialStats};
pub use train::{train, write_curve, EpisodeMetrics, TrainResult};

/// Seed streams, so training and evaluation never share episodes.
pub const TRAIN_STREAM: u64 = 0;
pub const EVAL_STREAM: u64 = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reset seed of episode `index` in `stream` under a base seed.
pub fn episode_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(stream)) ^ index)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub outcome: Outcome,
    pub steps: u64,
    /// Mean ego speed over the episode's steps, km/h.
    pub mean_speed: f64,
    pub total_reward: f64,
    pub seed: u64,
}

/// Running totals for one episode. Live sessions and log ingestion both go
/// through this, so they agree bit for bit.
#[derive(Clone, Debug, Default)]
pub struct EpisodeAccumulator {
    steps: u64,
    speed_sum: f64,
    reward_sum: f64,
}

impl EpisodeAccumulator {
    pub fn push(&mut self, reward: f64, speed_kmh: f64) {
        self.steps += 1;
        self.speed_sum += speed_kmh;
        self.reward_sum += reward;
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn total_reward(&self) -> f64 {
        self.reward_sum
    }

    pub fn finish(&self, outcome: Outcome, seed: u64) -> EpisodeStats {
        EpisodeStats {
            outcome,
            steps: self.steps,
            mean_speed: if self.steps == 0 {
                0.0
            } else {
                self.speed_sum / self.steps as f64
            },
            total_reward: self.reward_sum,
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub collision_rate: f64,
    pub success_rate: f64,
    pub safety_breach_rate: f64,
    pub timeout_rate: f64,
    /// Mean of per-episode mean speeds, km/h.
    pub avg_speed: f64,
    pub n_episodes: u64,
}

impl AggregateStats {
    pub fn from_episodes(episodes: &[EpisodeStats]) -> Self {
        let n = episodes.len();
        if n == 0 {
            return Self::default();
        }
        let rate = |o: Outcome| episodes.iter().filter(|e| e.outcome == o).count() as f64 / n as f64;
        Self {
            collision_rate: rate(Outcome::Collision),
            success_rate: rate(Outcome::Success),
            safety_breach_rate: rate(Outcome::SafetyBreach),
            timeout_rate: rate(Outcome::Timeout),
            avg_speed: episodes.iter().map(|e| e.mean_speed).sum::<f64>() / n as f64,
            n_episodes: n as u64,
        }
    }
}

/// Collision fraction of consecutive non-overlapping windows. A trailing
/// partial window is dropped.
pub fn rolling_collision_rate(outcomes: &[Outcome], window: usize) -> Vec<f64> {
    assert!(window > 0, "window must be positive");
    outcomes
        .chunks_exact(window)
        .map(|w| w.iter().filter(|&&o| o == Outcome::Collision).count() as f64 / window as f64)
        .collect()
}

/// One decision of a driving policy.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Output index for learned policies; equals `action.index()` otherwise.
    pub index: usize,
    pub q_values: Option<Vec<f32>>,
}

pub trait Policy {
    fn begin_episode(&mut self) {}

    fn decide(&mut self, state: &SimState) -> Result<Decision>;
}

impl Policy for ClassicalPlanner {
    fn begin_episode(&mut self) {
        self.reset();
    }

    fn decide(&mut self, state: &SimState) -> Result<Decision> {
        let action = self.suggest(state);
        Ok(Decision {
            action,
            index: action.index(),
            q_values: None,
        })
    }
}

/// Greedy (ε = 0) driving with a trained agent.
impl Policy for DqnAgent {
    fn begin_episode(&mut self) {
        DqnAgent::begin_episode(self);
    }

    fn decide(&mut self, state: &SimState) -> Result<Decision> {
        let q = self.q_values(&observe(state));
        let index = argmax(&q);
        let action = self.resolve_action(index, state)?;
        Ok(Decision {
            action,
            index,
            q_values: Some(q),
        })
    }
}

/// Plays one episode from `SimState::reset(cfg, seed)`.
pub fn run_episode(
    cfg: &SimConfig,
    seed: u64,
    policy: &mut dyn Policy,
) -> Result<EpisodeStats> {
    run_episode_logged::<std::io::Sink>(cfg, seed, 0, policy, None)
}

/// As [`run_episode`], also writing every step to `log` under `episode`.
pub fn run_episode_logged<W: Write>(
    cfg: &SimConfig,
    seed: u64,
    episode: u64,
    policy: &mut dyn Policy,
    mut log: Option<&mut EventLogWriter<W>>,
) -> Result<EpisodeStats> {
    let mut state = SimState::reset(cfg, seed)?;
    policy.begin_episode();
    let mut acc = EpisodeAccumulator::default();
    loop {
        let d = policy.decide(&state)?;
        let out = state.step(d.action)?;
        let speed = ms_to_kmh(state.ego.speed);
        acc.push(out.reward, speed);
        if let Some(w) = log.as_deref_mut() {
            let rec = StepRecord::new(episode, &state, d.action, d.index == OPTION_INDEX, &out);
            w.write_step(rec).map_err(|e| Error::io("<event log>", e))?;
        }
        if out.done {
            let outcome = out.events.outcome().expect("terminal step has an outcome");
            return Ok(acc.finish(outcome, seed));
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub aggregate: AggregateStats,
    pub episodes: Vec<EpisodeStats>,
}

/// `n_episodes` episodes on the evaluation seed stream of `base_seed`.
pub fn evaluate(
    cfg: &SimConfig,
    policy: &mut dyn Policy,
    n_episodes: u64,
    base_seed: u64,
) -> Result<Evaluation> {
    evaluate_logged::<std::io::Sink>(cfg, policy, n_episodes, base_seed, None)
}

pub fn evaluate_logged<W: Write>(
    cfg: &SimConfig,
    policy: &mut dyn Policy,
    n_episodes: u64,
    base_seed: u64,
    mut log: Option<&mut EventLogWriter<W>>,
) -> Result<Evaluation> {
    let mut episodes = Vec::with_capacity(n_episodes as usize);
    for i in 0..n_episodes {
        let seed = episode_seed(base_seed, EVAL_STREAM, i);
        episodes.push(run_episode_logged(cfg, seed, i, policy, log.as_deref_mut())?);
    }
    Ok(Evaluation {
        aggregate: AggregateStats::from_episodes(&episodes),
        episodes,
    })
}
