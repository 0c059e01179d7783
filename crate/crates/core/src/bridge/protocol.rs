//! Wire messages. Every message is one JSON object carrying a `type` tag and
//! the protocol version `v`; over TCP each message is one line, over
//! WebSocket one text frame.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::harness::AggregateStats;
use crate::planners::PlannerKind;
use crate::sim::{Action, Outcome, SimConfig, StepEvents, Vehicle};
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    /// The client drives the ego vehicle.
    Human,
    /// A planner or a checkpointed agent drives; frames carry its Q-values.
    Watch,
    /// Frames are regenerated from an event log.
    Replay,
}

impl SessionMode {
    pub fn name(self) -> &'static str {
        match self {
            SessionMode::Human => "human",
            SessionMode::Watch => "watch",
            SessionMode::Replay => "replay",
        }
    }
}

/// Who drives a watch session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WatchSource {
    Planner(PlannerKind),
    Checkpoint(PathBuf),
}

impl Default for WatchSource {
    fn default() -> Self {
        WatchSource::Planner(PlannerKind::P1)
    }
}

/// Opens a session. Unset fields fall back to the server's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinMessage {
    pub v: u32,
    pub mode: Option<SessionMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tester: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<WatchSource>,
    /// Event log to replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
}

/// A human action for session tick `step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionMessage {
    pub v: u32,
    pub session: u64,
    pub step: u64,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuitMessage {
    pub v: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Join(JoinMessage),
    Action(ActionMessage),
    Quit(QuitMessage),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelloMessage {
    pub v: u32,
    pub session: u64,
    pub mode: SessionMode,
    pub episodes: u64,
    /// Ticks per second; 0 means lockstep.
    pub tick_hz: f64,
    /// Width of the Q-value vector in frames, when a learned agent drives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_outputs: Option<usize>,
    pub sim: SimConfig,
}

/// Counts over the session's completed episodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hud {
    pub episodes_done: u64,
    pub collisions: u64,
    pub successes: u64,
    pub safety_breaches: u64,
    pub timeouts: u64,
}

impl Hud {
    pub fn record(&mut self, outcome: Outcome) {
        self.episodes_done += 1;
        match outcome {
            Outcome::Collision => self.collisions += 1,
            Outcome::Success => self.successes += 1,
            Outcome::SafetyBreach => self.safety_breaches += 1,
            Outcome::Timeout => self.timeouts += 1,
        }
    }
}

/// World state after session tick `step`. Tick 0 is the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub v: u32,
    pub session: u64,
    /// Session-wide tick, strictly increasing across episodes.
    pub step: u64,
    pub episode: u64,
    pub episode_step: u64,
    pub seed: u64,
    /// Action applied on this tick; absent on tick 0.
    pub action: Option<Action>,
    /// Set when an agent's planner option produced `action`.
    pub option: bool,
    pub ego: Vehicle,
    pub others: Vec<Vehicle>,
    pub reward: f64,
    /// Reward summed over the current episode.
    pub cumulative_reward: f64,
    pub events: StepEvents,
    pub done: bool,
    pub q_values: Option<Vec<f32>>,
    pub epsilon: f64,
    pub hud: Hud,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndMessage {
    pub v: u32,
    pub session: u64,
    pub ticks: u64,
    pub hud: Hud,
    /// Over completed episodes, computed exactly as log ingestion does.
    pub stats: AggregateStats,
    /// Actions for a tick that had already been stepped.
    pub stale_actions: u64,
    /// Actions for a tick further ahead than the next one.
    pub out_of_order_actions: u64,
    pub log: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMessage {
    pub v: u32,
    pub category: String,
    pub message: String,
}

impl ErrorMessage {
    pub fn from_error(e: &Error) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            category: e.category().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(HelloMessage),
    Frame(FrameMessage),
    End(EndMessage),
    Error(ErrorMessage),
}

trait Versioned {
    fn version(&self) -> u32;
}

impl Versioned for ClientMessage {
    fn version(&self) -> u32 {
        match self {
            ClientMessage::Join(m) => m.v,
            ClientMessage::Action(m) => m.v,
            ClientMessage::Quit(m) => m.v,
        }
    }
}

impl Versioned for ServerMessage {
    fn version(&self) -> u32 {
        match self {
            ServerMessage::Hello(m) => m.v,
            ServerMessage::Frame(m) => m.v,
            ServerMessage::End(m) => m.v,
            ServerMessage::Error(m) => m.v,
        }
    }
}

fn decode<T: for<'de> Deserialize<'de> + Versioned>(text: &str) -> Result<T> {
    let msg: T = serde_json::from_str(text.trim_end())
        .map_err(|e| Error::Protocol(format!("malformed message: {e}")))?;
    match msg.version() {
        PROTOCOL_VERSION => Ok(msg),
        v => Err(Error::Protocol(format!(
            "unsupported protocol version {v}, expected {PROTOCOL_VERSION}"
        ))),
    }
}

pub fn decode_client(text: &str) -> Result<ClientMessage> {
    decode(text)
}

pub fn decode_server(text: &str) -> Result<ServerMessage> {
    decode(text)
}

/// One message as a single line, without the trailing newline.
pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages serialize")
}
