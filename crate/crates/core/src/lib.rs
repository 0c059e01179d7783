//! Adversary lane-change driving: a deterministic traffic simulator, classical
//! planning baselines, and a DQN agent whose action space can be augmented with
//! a planner queried as a single-step option.

pub mod bridge;
pub mod config;
pub mod dqn;
pub mod error;
pub mod eventlog;
pub mod harness;
pub mod planners;
pub mod sim;

pub use error::{Error, Result};
