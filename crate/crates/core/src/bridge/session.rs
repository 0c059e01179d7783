use std::io::Write;

use super::protocol::{
    ActionMessage, EndMessage, FrameMessage, HelloMessage, Hud, SessionMode, WatchSource,
    PROTOCOL_VERSION,
};
use crate::config::AppConfig;
use crate::dqn::{Checkpoint, OPTION_INDEX};
use crate::error::{Error, Result};
use crate::eventlog::{EventLog, EventLogWriter, LogHeader, StepRecord};
use crate::harness::{
    episode_seed, AggregateStats, EpisodeAccumulator, EpisodeStats, Policy, EVAL_STREAM,
};
use crate::planners::ClassicalPlanner;
use crate::sim::{ms_to_kmh, Action, SimConfig, SimState, StepEvents};

/// Everything needed to open a session, after defaults are applied.
#[derive(Clone, Debug)]
pub struct SessionSpec {
    pub mode: SessionMode,
    pub seed: u64,
    pub episodes: u64,
    pub tester: Option<String>,
    pub trial: Option<u32>,
    pub source: WatchSource,
    pub tick_hz: f64,
    pub replay: Option<EventLog>,
}

/// What happened to an offered action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Disposition {
    /// Queued for the next tick, replacing any earlier action for it.
    Accepted,
    Stale,
    OutOfOrder,
    /// Not a human session; the action is dropped.
    Ignored,
}

enum Driver {
    Human,
    Policy {
        policy: Box<dyn Policy + Send>,
        n_outputs: Option<usize>,
    },
    Replay {
        log: EventLog,
        episodes: Vec<(usize, usize)>,
        cursor: usize,
    },
}

/// One simulation thread of control. Free of I/O apart from the event log,
/// so the server and tests drive it the same way.
pub struct Session<W: Write> {
    id: u64,
    spec: SessionSpec,
    sim: SimConfig,
    driver: Driver,
    state: SimState,
    tick: u64,
    episode: u64,
    acc: EpisodeAccumulator,
    completed: Vec<EpisodeStats>,
    hud: Hud,
    inbox: Option<Action>,
    stale: u64,
    out_of_order: u64,
    log: EventLogWriter<W>,
    needs_reset: bool,
}

impl<W: Write> Session<W> {
    pub fn new(id: u64, spec: SessionSpec, app: &AppConfig, log_out: W) -> Result<Self> {
        app.validate()?;
        let mut sim = app.sim.clone();
        let mut header = LogHeader::new(spec.mode.name(), sim.clone());
        header.tester = spec.tester.clone();
        header.trial = spec.trial;
        let driver = match spec.mode {
            SessionMode::Human => Driver::Human,
            SessionMode::Watch => {
                let (policy, n_outputs, name): (Box<dyn Policy + Send>, _, _) = match &spec.source {
                    WatchSource::Planner(kind) => (
                        Box::new(ClassicalPlanner::new(*kind, app.planner.clone())),
                        None,
                        kind.name().to_string(),
                    ),
                    WatchSource::Checkpoint(path) => {
                        let agent = Checkpoint::load(path)?.restore()?;
                        let n = agent.n_outputs();
                        let name = agent.kind.name().to_string();
                        (Box::new(agent), Some(n), name)
                    }
                };
                header.agent = Some(name);
                Driver::Policy { policy, n_outputs }
            }
            SessionMode::Replay => {
                let log = spec
                    .replay
                    .clone()
                    .ok_or_else(|| Error::Config("replay session without a log".into()))?;
                sim = log.header.sim.clone();
                sim.validate()?;
                header.sim = sim.clone();
                header.tester = log.header.tester.clone();
                header.trial = log.header.trial;
                header.agent = log.header.agent.clone();
                let mut episodes = Vec::new();
                let mut start = 0;
                for ep in log.episodes() {
                    if ep.last().is_some_and(|s| s.done) {
                        episodes.push((start, start + ep.len()));
                    }
                    start += ep.len();
                }
                if episodes.is_empty() {
                    return Err(Error::Config("replay log holds no completed episode".into()));
                }
                Driver::Replay {
                    log,
                    episodes,
                    cursor: 0,
                }
            }
        };
        let log = EventLogWriter::new(log_out, header).map_err(|e| Error::io("<event log>", e))?;
        let mut session = Session {
            id,
            state: SimState::reset(&sim, 0)?,
            sim,
            spec,
            driver,
            tick: 0,
            episode: 0,
            acc: EpisodeAccumulator::default(),
            completed: Vec::new(),
            hud: Hud::default(),
            inbox: None,
            stale: 0,
            out_of_order: 0,
            log,
            needs_reset: false,
        };
        session.reset_episode()?;
        Ok(session)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn mode(&self) -> SessionMode {
        self.spec.mode
    }

    /// Ticks stepped so far.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn episodes(&self) -> u64 {
        match &self.driver {
            Driver::Replay { episodes, .. } => episodes.len() as u64,
            _ => self.spec.episodes,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.completed.len() as u64 >= self.episodes()
    }

    pub fn has_pending_action(&self) -> bool {
        self.inbox.is_some()
    }

    pub fn hello(&self) -> HelloMessage {
        HelloMessage {
            v: PROTOCOL_VERSION,
            session: self.id,
            mode: self.spec.mode,
            episodes: self.episodes(),
            tick_hz: self.spec.tick_hz,
            n_outputs: match &self.driver {
                Driver::Policy { n_outputs, .. } => *n_outputs,
                _ => None,
            },
            sim: self.sim.clone(),
        }
    }

    fn reset_episode(&mut self) -> Result<()> {
        let seed = match &mut self.driver {
            Driver::Replay {
                log,
                episodes,
                cursor,
            } => {
                *cursor = episodes[self.episode as usize].0;
                log.steps[*cursor].seed
            }
            _ => episode_seed(self.spec.seed, EVAL_STREAM, self.episode),
        };
        self.state = SimState::reset(&self.sim, seed)?;
        if let Driver::Policy { policy, .. } = &mut self.driver {
            policy.begin_episode();
        }
        self.acc = EpisodeAccumulator::default();
        self.needs_reset = false;
        Ok(())
    }

    /// Tick 0 frame.
    pub fn initial_frame(&self) -> FrameMessage {
        self.frame(None, false, 0.0, StepEvents::default(), false, None)
    }

    /// Offers a human action for tick `msg.step`. The action for tick t is
    /// accepted until tick t runs; the latest accepted one wins.
    pub fn offer(&mut self, msg: &ActionMessage) -> Result<Disposition> {
        if msg.session != self.id {
            return Err(Error::Protocol(format!(
                "action for session {} sent to session {}",
                msg.session, self.id
            )));
        }
        if self.spec.mode != SessionMode::Human {
            return Ok(Disposition::Ignored);
        }
        let next = self.tick + 1;
        Ok(if msg.step < next {
            self.stale += 1;
            Disposition::Stale
        } else if msg.step > next {
            self.out_of_order += 1;
            Disposition::OutOfOrder
        } else {
            self.inbox = Some(msg.action);
            Disposition::Accepted
        })
    }

    /// Advances one tick. A human session with no pending action applies
    /// `NoAction`.
    pub fn step(&mut self) -> Result<FrameMessage> {
        if self.is_finished() {
            return Err(Error::Protocol("session already finished".into()));
        }
        if self.needs_reset {
            self.episode += 1;
            self.reset_episode()?;
        }
        let (action, option, q_values, expected) = match &mut self.driver {
            Driver::Human => (self.inbox.take().unwrap_or(Action::NoAction), false, None, None),
            Driver::Policy { policy, .. } => {
                let d = policy.decide(&self.state)?;
                (d.action, d.index == OPTION_INDEX, d.q_values, None)
            }
            Driver::Replay { log, cursor, .. } => {
                let rec = &log.steps[*cursor];
                *cursor += 1;
                (rec.action, rec.option, None, Some(rec.clone()))
            }
        };
        let out = self.state.step(action)?;
        if let Some(rec) = expected {
            if rec.reward != out.reward || rec.done != out.done || rec.step != self.state.step_count {
                return Err(Error::Protocol(format!(
                    "replay diverged from the log at episode {} step {}",
                    rec.episode, rec.step
                )));
            }
        }
        self.tick += 1;
        let speed = ms_to_kmh(self.state.ego.speed);
        self.acc.push(out.reward, speed);
        let record = StepRecord::new(self.episode, &self.state, action, option, &out);
        self.log.write_step(record).map_err(|e| Error::io("<event log>", e))?;
        if out.done {
            let outcome = out.events.outcome().expect("terminal step has an outcome");
            self.completed.push(self.acc.finish(outcome, self.state.seed));
            self.hud.record(outcome);
            self.needs_reset = true;
        }
        Ok(self.frame(Some(action), option, out.reward, out.events, out.done, q_values))
    }

    fn frame(
        &self,
        action: Option<Action>,
        option: bool,
        reward: f64,
        events: StepEvents,
        done: bool,
        q_values: Option<Vec<f32>>,
    ) -> FrameMessage {
        FrameMessage {
            v: PROTOCOL_VERSION,
            session: self.id,
            step: self.tick,
            episode: self.episode,
            episode_step: self.state.step_count,
            seed: self.state.seed,
            action,
            option,
            ego: self.state.ego.clone(),
            others: self.state.others.clone(),
            reward,
            cumulative_reward: self.acc.total_reward(),
            events,
            done,
            q_values,
            epsilon: 0.0,
            hud: self.hud,
        }
    }

    pub fn completed(&self) -> &[EpisodeStats] {
        &self.completed
    }

    /// Flushes the log and reports session totals.
    pub fn finish(mut self) -> Result<(EndMessage, W)> {
        self.log.flush().map_err(|e| Error::io("<event log>", e))?;
        let end = EndMessage {
            v: PROTOCOL_VERSION,
            session: self.id,
            ticks: self.tick,
            hud: self.hud,
            stats: AggregateStats::from_episodes(&self.completed),
            stale_actions: self.stale,
            out_of_order_actions: self.out_of_order,
            log: None,
        };
        Ok((end, self.log.into_inner()))
    }
}
