//! TOML application config with `[sim]`, `[planner]` and `[train]` tables.
//! Missing tables and keys take their defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dqn::TrainConfig;
use crate::error::{Error, Result};
use crate::planners::PlannerParams;
use crate::sim::SimConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub sim: SimConfig,
    pub planner: PlannerParams,
    pub train: TrainConfig,
}

impl AppConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.planner.validate(self.sim.accel, self.sim.decel)?;
        self.train.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: AppConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
