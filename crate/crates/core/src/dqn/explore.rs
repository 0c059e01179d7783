use rand::Rng;
use serde::{Deserialize, Serialize};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<F: PartialOrd + Copy>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy: a uniform random index with probability `epsilon`, else the
/// greedy one. Always draws the coin, plus an index draw when exploring, so
/// the RNG stream does not depend on the Q-values.
pub fn select_action<F: PartialOrd + Copy, R: Rng + ?Sized>(
    q_values: &[F],
    epsilon: f64,
    rng: &mut R,
) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSchedule {
    /// Restart the anneal at every episode.
    PerEpisode,
    /// Anneal once over total environment steps.
    Global,
}

/// Linear anneal from `start` to `end` over `decay_steps`, then constant.
pub fn epsilon_at(step: u64, start: f64, end: f64, decay_steps: u64) -> f64 {
    if step >= decay_steps {
        return end;
    }
    (start - (start - end) * step as f64 / decay_steps as f64).max(end)
}
