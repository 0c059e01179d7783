//! Line-delimited JSON event log shared by evaluation runs and bridge
//! sessions. The first line is a header; every following line records one
//! simulator step.
//!
//! ```text
//! {"type":"header","version":1,"source":"human","tester":"t1","trial":2,"sim":{...}}
//! {"type":"step","episode":0,"seed":17,"step":1,"action":"accelerate","reward":-0.001,...}
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{ms_to_kmh, Action, Outcome, SimConfig, SimState, StepOutcome};

pub const EVENT_LOG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    /// What produced the log: `human`, `watch`, `replay`, `eval`.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tester: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    pub sim: SimConfig,
}

impl LogHeader {
    pub fn new(source: &str, sim: SimConfig) -> Self {
        Self {
            version: EVENT_LOG_VERSION,
            source: source.to_string(),
            tester: None,
            trial: None,
            agent: None,
            sim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: u64,
    /// Seed the episode was reset with.
    pub seed: u64,
    /// Step count after this step, starting at 1.
    pub step: u64,
    pub action: Action,
    /// Set when an agent chose its planner option and `action` is the
    /// planner's suggestion.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub option: bool,
    pub reward: f64,
    pub collision: bool,
    pub safety_breach: bool,
    pub success: bool,
    pub timeout: bool,
    pub done: bool,
    /// Ego speed after the step.
    pub speed_kmh: f64,
}

impl StepRecord {
    pub fn new(
        episode: u64,
        state: &SimState,
        action: Action,
        option: bool,
        out: &StepOutcome,
    ) -> Self {
        Self {
            episode,
            seed: state.seed,
            step: state.step_count,
            action,
            option,
            reward: out.reward,
            collision: out.events.collided,
            safety_breach: out.events.safety_breach,
            success: out.events.reached_rightmost,
            timeout: out.events.timed_out,
            done: out.done,
            speed_kmh: ms_to_kmh(state.ego.speed),
        }
    }

    pub fn outcome(&self) -> Option<Outcome> {
        if self.collision {
            Some(Outcome::Collision)
        } else if self.safety_breach {
            Some(Outcome::SafetyBreach)
        } else if self.success {
            Some(Outcome::Success)
        } else if self.timeout {
            Some(Outcome::Timeout)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header(LogHeader),
    Step(StepRecord),
}

pub struct EventLogWriter<W: Write> {
    out: W,
}

impl<W: Write> EventLogWriter<W> {
    pub fn new(mut out: W, header: LogHeader) -> std::io::Result<Self> {
        write_line(&mut out, &LogRecord::Header(header))?;
        Ok(Self { out })
    }

    pub fn write_step(&mut self, record: StepRecord) -> std::io::Result<()> {
        write_line(&mut self.out, &LogRecord::Step(record))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

fn write_line<W: Write>(out: &mut W, record: &LogRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub header: LogHeader,
    pub steps: Vec<StepRecord>,
}

impl EventLog {
    /// Parses a log; `path` is only used in error messages.
    pub fn parse<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut header = None;
        let mut steps = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| err(n, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: LogRecord =
                serde_json::from_str(&line).map_err(|e| err(n, e.to_string()))?;
            match (record, &header) {
                (LogRecord::Header(h), None) => {
                    if h.version != EVENT_LOG_VERSION {
                        return Err(err(n, format!("unsupported log version {}", h.version)));
                    }
                    header = Some(h);
                }
                (LogRecord::Header(_), Some(_)) => {
                    return Err(err(n, "second header record".into()));
                }
                (LogRecord::Step(_), None) => {
                    return Err(err(n, "step record before the header".into()));
                }
                (LogRecord::Step(s), Some(_)) => steps.push(s),
            }
        }
        let header = header.ok_or_else(|| err(1, "empty log".into()))?;
        Ok(Self { header, steps })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file), path)
    }

    /// Steps grouped by episode in log order. A trailing episode without a
    /// terminal step is included as is.
    pub fn episodes(&self) -> Vec<&[StepRecord]> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 0..self.steps.len() {
            let last = i + 1 == self.steps.len();
            if self.steps[i].done || last || self.steps[i + 1].episode != self.steps[i].episode {
                out.push(&self.steps[start..=i]);
                start = i + 1;
            }
        }
        out
    }
}
