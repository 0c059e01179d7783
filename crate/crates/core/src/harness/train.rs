use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{episode_seed, rolling_collision_rate, EpisodeAccumulator, EpisodeStats, TRAIN_STREAM};
use crate::config::AppConfig;
use crate::dqn::{AgentKind, Checkpoint, DqnAgent, Transition, OPTION_INDEX};
use crate::error::{Error, Result};
use crate::sim::{ms_to_kmh, observe, CompactGrid, Outcome, SimState};

/// One line of `metrics.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: u64,
    pub mean_speed_kmh: f64,
    pub total_reward: f64,
    /// Share of steps on which the agent picked its planner option.
    pub option_fraction: f64,
    pub grad_steps: u64,
    /// Mean loss of this episode's gradient steps.
    pub mean_loss: Option<f64>,
}

pub struct TrainResult {
    pub agent: DqnAgent,
    pub episodes: Vec<EpisodeStats>,
    pub metrics: Vec<EpisodeMetrics>,
}

impl TrainResult {
    pub fn outcomes(&self) -> Vec<Outcome> {
        self.episodes.iter().map(|e| e.outcome).collect()
    }
}

/// Trains a fresh agent for `episodes` ε-greedy episodes. With `out_dir`
/// set, writes `metrics.jsonl`, `curve.tsv` and checkpoints there.
pub fn train(
    app: &AppConfig,
    kind: AgentKind,
    seed: u64,
    episodes: u64,
    out_dir: Option<&Path>,
) -> Result<TrainResult> {
    app.validate()?;
    let mut agent = DqnAgent::new(kind, app.train.clone(), app.planner.clone(), seed)?;
    let mut metrics_out = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("metrics.jsonl");
            Some((BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?), path))
        }
        None => None,
    };

    let mut all_stats = Vec::with_capacity(episodes as usize);
    let mut all_metrics = Vec::with_capacity(episodes as usize);
    for ep in 0..episodes {
        let ep_seed = episode_seed(seed, TRAIN_STREAM, ep);
        let (stats, m) = train_episode(&mut agent, app, ep, ep_seed)?;
        if let Some((w, path)) = metrics_out.as_mut() {
            serde_json::to_writer(&mut *w, &m).expect("metrics serialize");
            w.write_all(b"\n").map_err(|e| Error::io(&*path, e))?;
        }
        all_stats.push(stats);
        all_metrics.push(m);
        let every = app.train.checkpoint_every;
        if let Some(dir) = out_dir {
            if every > 0 && (ep + 1) % every == 0 && ep + 1 < episodes {
                Checkpoint::capture(&agent).save(&dir.join(format!("checkpoint_{}.json", ep + 1)))?;
            }
        }
    }

    if let (Some(dir), Some((mut w, path))) = (out_dir, metrics_out) {
        w.flush().map_err(|e| Error::io(&path, e))?;
        let outcomes: Vec<Outcome> = all_stats.iter().map(|e| e.outcome).collect();
        write_curve(&dir.join("curve.tsv"), &outcomes, 50)?;
        Checkpoint::capture(&agent).save(&dir.join("final.json"))?;
    }
    Ok(TrainResult {
        agent,
        episodes: all_stats,
        metrics: all_metrics,
    })
}

fn train_episode(
    agent: &mut DqnAgent,
    app: &AppConfig,
    episode: u64,
    seed: u64,
) -> Result<(EpisodeStats, EpisodeMetrics)> {
    let mut state = SimState::reset(&app.sim, seed)?;
    agent.begin_episode();
    let mut grid = observe(&state);
    let mut compact = CompactGrid::from(&grid);
    let mut acc = EpisodeAccumulator::default();
    let mut option_steps = 0u64;
    let mut loss_sum = 0.0f64;
    let mut loss_count = 0u64;
    let outcome = loop {
        let eps = app.train.epsilon(state.step_count, agent.env_steps());
        let (index, _, action) = agent.act(&state, &grid, eps)?;
        option_steps += (index == OPTION_INDEX) as u64;
        let out = state.step(action)?;
        acc.push(out.reward, ms_to_kmh(state.ego.speed));
        let next_grid = observe(&state);
        let next_compact = CompactGrid::from(&next_grid);
        let loss = agent.observe(Transition {
            state: compact,
            action: index as u8,
            reward: out.reward as f32,
            next_state: next_compact.clone(),
            done: out.done,
        })?;
        if let Some(l) = loss {
            loss_sum += l as f64;
            loss_count += 1;
        }
        if out.done {
            break out.events.outcome().expect("terminal step has an outcome");
        }
        grid = next_grid;
        compact = next_compact;
    };
    agent.end_episode();
    let stats = acc.finish(outcome, seed);
    let metrics = EpisodeMetrics {
        episode,
        seed,
        outcome,
        steps: stats.steps,
        mean_speed_kmh: stats.mean_speed,
        total_reward: stats.total_reward,
        option_fraction: option_steps as f64 / stats.steps as f64,
        grad_steps: agent.grad_steps(),
        mean_loss: (loss_count > 0).then(|| loss_sum / loss_count as f64),
    };
    Ok((stats, metrics))
}

/// Tab-separated rolling collision rate: window index, last episode of the
/// window, rate.
pub fn write_curve(path: &Path, outcomes: &[Outcome], window: usize) -> Result<()> {
    let mut text = String::from("window\tepisode_end\tcollision_rate\n");
    for (k, rate) in rolling_collision_rate(outcomes, window).iter().enumerate() {
        text.push_str(&format!("{k}\t{}\t{rate}\n", (k + 1) * window));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
