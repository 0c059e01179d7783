use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AggregateStats, EpisodeAccumulator, EpisodeStats};
use crate::error::{Error, Result};
use crate::eventlog::EventLog;

/// Completed episodes of a log, in order. An unfinished trailing episode is
/// skipped.
pub fn stats_from_log(log: &EventLog) -> Vec<EpisodeStats> {
    log.episodes()
        .into_iter()
        .filter_map(|steps| {
            let last = steps.last()?;
            let outcome = last.outcome().filter(|_| last.done)?;
            let mut acc = EpisodeAccumulator::default();
            for s in steps {
                acc.push(s.reward, s.speed_kmh);
            }
            Some(acc.finish(outcome, last.seed))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub tester: String,
    pub trial: u32,
    pub path: PathBuf,
    pub stats: AggregateStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanReport {
    pub trials: Vec<TrialStats>,
    /// Each tester's best trial: lowest collision rate, then highest success
    /// rate, then highest speed.
    pub best: Vec<TrialStats>,
    /// Unweighted mean of the best trials. `n_episodes` is their total.
    pub average: AggregateStats,
}

/// One file per trial. Files without a tester are grouped under their path;
/// files without a trial number are numbered in argument order.
pub fn ingest_human_logs(paths: &[PathBuf]) -> Result<HumanReport> {
    if paths.is_empty() {
        return Err(Error::Config("no human logs given".into()));
    }
    let mut trials = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let log = EventLog::read(path)?;
        let episodes = stats_from_log(&log);
        if episodes.is_empty() {
            return Err(empty(path));
        }
        trials.push(TrialStats {
            tester: log.header.tester.clone().unwrap_or_else(|| path.display().to_string()),
            trial: log.header.trial.unwrap_or(i as u32),
            path: path.clone(),
            stats: AggregateStats::from_episodes(&episodes),
        });
    }

    let mut by_tester: BTreeMap<&str, &TrialStats> = BTreeMap::new();
    for t in &trials {
        let slot = by_tester.entry(t.tester.as_str()).or_insert(t);
        if better(&t.stats, &slot.stats) {
            *slot = t;
        }
    }
    let best: Vec<TrialStats> = by_tester.into_values().cloned().collect();
    let n = best.len() as f64;
    let mean = |f: fn(&AggregateStats) -> f64| best.iter().map(|t| f(&t.stats)).sum::<f64>() / n;
    let average = AggregateStats {
        collision_rate: mean(|s| s.collision_rate),
        success_rate: mean(|s| s.success_rate),
        safety_breach_rate: mean(|s| s.safety_breach_rate),
        timeout_rate: mean(|s| s.timeout_rate),
        avg_speed: mean(|s| s.avg_speed),
        n_episodes: best.iter().map(|t| t.stats.n_episodes).sum(),
    };
    Ok(HumanReport {
        trials,
        best,
        average,
    })
}

fn empty(path: &Path) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "log holds no completed episode".into(),
    }
}

fn better(a: &AggregateStats, b: &AggregateStats) -> bool {
    (a.collision_rate, -a.success_rate, -a.avg_speed) < (b.collision_rate, -b.success_rate, -b.avg_speed)
}
