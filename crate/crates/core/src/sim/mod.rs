//! Deterministic adversary lane-change environment.
//!
//! The world is simulated in the ego frame: the ego stays at `long_pos = 0`
//! and every other vehicle moves by `(speed - ego_speed) * dt` per step.
//! Vehicles leaving the `±range_half` window reappear at the opposite end in
//! a random lane with a random speed.

mod config;
pub mod geometry;
pub mod grid;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{kmh_to_ms, ms_to_kmh, SimConfig, KMH_PER_MS};
pub use geometry::Rect;
pub use grid::{observe, CompactGrid, OccupancyGrid, GRID_COLS, GRID_LEN, GRID_ROWS};

use crate::error::{Error, Result};

pub const REWARD_SUCCESS: f64 = 10.0;
pub const REWARD_COLLISION: f64 = -10.0;
pub const REWARD_SAFETY_BREACH: f64 = -1.0;
pub const REWARD_TIMEOUT: f64 = -10.0;
pub const REWARD_STEP: f64 = -0.001;

/// Primitive ego actions. The discriminant is the network output index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Action {
    Accelerate = 0,
    NoAction = 1,
    Decelerate = 2,
    SwitchRight = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [
        Action::Accelerate,
        Action::NoAction,
        Action::Decelerate,
        Action::SwitchRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Accelerate => "accelerate",
            Action::NoAction => "no_action",
            Action::Decelerate => "decelerate",
            Action::SwitchRight => "switch_right",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Car,
    Motorcycle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneChange {
    pub target_lane: usize,
    /// Fraction of the lateral move completed, in `[0, 1]`.
    pub progress: f64,
    pub from_lateral: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u32,
    pub kind: VehicleKind,
    /// Lane the vehicle is in, or is leaving while a lane change runs.
    pub lane: usize,
    pub lateral_pos: f64,
    pub long_pos: f64,
    /// m/s
    pub speed: f64,
    pub lane_change: Option<LaneChange>,
    pub adversarial: bool,
}

impl Vehicle {
    /// A non-adversarial vehicle centered in `lane`, not changing lanes.
    pub fn new(
        id: u32,
        kind: VehicleKind,
        cfg: &SimConfig,
        lane: usize,
        long_pos: f64,
        speed: f64,
    ) -> Vehicle {
        Vehicle {
            id,
            kind,
            lane,
            lateral_pos: cfg.lane_center(lane),
            long_pos,
            speed,
            lane_change: None,
            adversarial: false,
        }
    }

    pub fn width(&self, cfg: &SimConfig) -> f64 {
        match self.kind {
            VehicleKind::Car => cfg.car_width,
            VehicleKind::Motorcycle => cfg.motorcycle_width,
        }
    }

    pub fn length(&self, cfg: &SimConfig) -> f64 {
        match self.kind {
            VehicleKind::Car => cfg.car_length,
            VehicleKind::Motorcycle => cfg.motorcycle_length,
        }
    }

    pub fn rect(&self, cfg: &SimConfig) -> Rect {
        Rect::centered(
            self.lateral_pos,
            self.long_pos,
            self.width(cfg),
            self.length(cfg),
        )
    }

    /// Lane the vehicle will occupy once any running lane change finishes.
    pub fn destination_lane(&self) -> usize {
        self.lane_change.map_or(self.lane, |lc| lc.target_lane)
    }

    fn start_lane_change(&mut self, target_lane: usize) {
        self.lane_change = Some(LaneChange {
            target_lane,
            progress: 0.0,
            from_lateral: self.lateral_pos,
        });
    }

    /// Moves laterally at `lane_width / lane_change_duration`; snaps onto the
    /// target lane when the move completes.
    fn advance_lane_change(&mut self, cfg: &SimConfig) {
        let Some(mut lc) = self.lane_change else {
            return;
        };
        let direction = lc.target_lane as f64 - self.lane as f64;
        lc.progress = (lc.progress + cfg.dt / cfg.lane_change_duration).min(1.0);
        self.lateral_pos = lc.from_lateral + direction * cfg.lane_width() * lc.progress;
        if lc.progress >= 1.0 {
            self.lane = lc.target_lane;
            self.lane_change = None;
        } else {
            self.lane_change = Some(lc);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    SafetyBreach,
    Timeout,
}

/// Per-step events. At most one flag is set: collision takes precedence over
/// a safety breach, which takes precedence over reaching the goal, which
/// takes precedence over the step limit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    pub collided: bool,
    pub safety_breach: bool,
    pub reached_rightmost: bool,
    pub timed_out: bool,
}

impl StepEvents {
    pub fn outcome(&self) -> Option<Outcome> {
        if self.collided {
            Some(Outcome::Collision)
        } else if self.safety_breach {
            Some(Outcome::SafetyBreach)
        } else if self.reached_rightmost {
            Some(Outcome::Success)
        } else if self.timed_out {
            Some(Outcome::Timeout)
        } else {
            None
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.outcome().is_some()
    }

    pub fn reward(&self) -> f64 {
        match self.outcome() {
            Some(Outcome::Collision) => REWARD_COLLISION,
            Some(Outcome::SafetyBreach) => REWARD_SAFETY_BREACH,
            Some(Outcome::Success) => REWARD_SUCCESS,
            Some(Outcome::Timeout) => REWARD_TIMEOUT,
            None => REWARD_STEP,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub events: StepEvents,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub config: SimConfig,
    pub seed: u64,
    pub ego: Vehicle,
    pub others: Vec<Vehicle>,
    pub step_count: u64,
    pub done: bool,
    rng: ChaCha8Rng,
}

impl SimState {
    /// Starts an episode: ego in the leftmost lane, the other vehicles at
    /// random non-overlapping slots, `n_adversarial` of them adversarial.
    pub fn reset(config: &SimConfig, seed: u64) -> Result<SimState> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ego = Vehicle {
            id: 0,
            kind: VehicleKind::Car,
            lane: 0,
            lateral_pos: config.lane_center(0),
            long_pos: 0.0,
            speed: kmh_to_ms(config.ego_initial_speed_kmh),
            lane_change: None,
            adversarial: false,
        };

        let n_others = config.n_vehicles - 1;
        let mut adversarial = vec![false; n_others];
        for i in sample(&mut rng, n_others, config.n_adversarial) {
            adversarial[i] = true;
        }

        let ego_rect = ego.rect(config);
        let mut others: Vec<Vehicle> = Vec::with_capacity(n_others);
        for (i, &adv) in adversarial.iter().enumerate() {
            let kind = random_kind(config, &mut rng);
            let mut placed = None;
            for _ in 0..config.spawn_attempts {
                let lane = rng.random_range(0..config.n_lanes);
                let v = Vehicle {
                    id: i as u32 + 1,
                    kind,
                    lane,
                    lateral_pos: random_lateral(config, kind, lane, &mut rng),
                    long_pos: rng.random_range(-config.range_half..=config.range_half),
                    speed: rng.random_range(config.speed_min()..=config.speed_max()),
                    lane_change: None,
                    adversarial: adv,
                };
                let r = v.rect(config);
                let clear_of_ego = !(r.overlaps_laterally(&ego_rect)
                    && ego_rect.longitudinal_gap(&r) < config.spawn_clearance.max(config.safety_gap));
                if clear_of_ego && others.iter().all(|o| !o.rect(config).intersects(&r)) {
                    placed = Some(v);
                    break;
                }
            }
            match placed {
                Some(v) => others.push(v),
                None => {
                    return Err(Error::Init(format!(
                        "could not place vehicle {} after {} attempts",
                        i + 1,
                        config.spawn_attempts
                    )))
                }
            }
        }

        Ok(SimState {
            config: config.clone(),
            seed,
            ego,
            others,
            step_count: 0,
            done: false,
            rng,
        })
    }

    /// Builds a state from explicit vehicles, for scripted scenarios.
    pub fn from_parts(
        config: &SimConfig,
        seed: u64,
        ego: Vehicle,
        others: Vec<Vehicle>,
    ) -> Result<SimState> {
        config.validate()?;
        Ok(SimState {
            config: config.clone(),
            seed,
            ego,
            others,
            step_count: 0,
            done: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn vehicle_count(&self) -> usize {
        self.others.len() + 1
    }

    /// Updates the ego's speed and lateral motion for one step. `SwitchRight`
    /// is a no-op while a lane change runs or in the rightmost lane.
    pub fn apply_ego_action(&mut self, action: Action) {
        let cfg = &self.config;
        match action {
            Action::Accelerate => {
                self.ego.speed = (self.ego.speed + cfg.accel * cfg.dt).clamp(0.0, cfg.speed_limit())
            }
            Action::Decelerate => self.ego.speed = (self.ego.speed - cfg.decel * cfg.dt).max(0.0),
            Action::NoAction => {}
            Action::SwitchRight => {
                if self.ego.lane_change.is_none() && self.ego.lane < cfg.rightmost_lane() {
                    self.ego.start_lane_change(self.ego.lane + 1);
                }
            }
        }
        self.ego.advance_lane_change(cfg);
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Protocol(format!(
                "step called on a finished episode (seed {}, step {})",
                self.seed, self.step_count
            )));
        }
        self.apply_ego_action(action);
        self.advance_traffic();
        self.respawn();
        self.step_count += 1;

        let collided = detect_collision(self);
        let safety_breach = !collided && detect_safety_breach(self);
        let reached_rightmost = !collided
            && !safety_breach
            && self.ego.lane == self.config.rightmost_lane()
            && self.ego.lane_change.is_none();
        let timed_out = !(collided || safety_breach || reached_rightmost)
            && self.step_count >= self.config.max_steps;
        let events = StepEvents {
            collided,
            safety_breach,
            reached_rightmost,
            timed_out,
        };
        self.done = events.is_terminal();
        Ok(StepOutcome {
            reward: events.reward(),
            events,
            done: self.done,
        })
    }

    fn advance_traffic(&mut self) {
        if self.config.traffic_braking {
            self.brake_for_leaders();
        }
        let cfg = &self.config;
        let ego_speed = self.ego.speed;
        for v in &mut self.others {
            if v.adversarial && v.lane_change.is_none() && cfg.n_lanes > 1 {
                // Adversaries never check the target lane before moving.
                if self.rng.random::<f64>() < cfg.adversary_lane_change_prob {
                    let target = if v.lane == 0 {
                        1
                    } else if v.lane == cfg.rightmost_lane() {
                        v.lane - 1
                    } else if self.rng.random::<bool>() {
                        v.lane + 1
                    } else {
                        v.lane - 1
                    };
                    v.start_lane_change(target);
                }
            }
            v.advance_lane_change(cfg);
            v.long_pos += (v.speed - ego_speed) * cfg.dt;
        }
    }

    /// Speeds are updated from one snapshot so the order of vehicles does not
    /// matter.
    fn brake_for_leaders(&mut self) {
        let cfg = &self.config;
        let rects: Vec<Rect> = self.others.iter().map(|v| v.rect(cfg)).collect();
        let ego_rect = self.ego.rect(cfg);
        let mut new_speeds: Vec<f64> = self.others.iter().map(|v| v.speed).collect();
        for (i, v) in self.others.iter().enumerate() {
            if v.lane_change.is_some() {
                continue;
            }
            let me = rects[i];
            let leaders = std::iter::once((&ego_rect, self.ego.speed)).chain(
                rects
                    .iter()
                    .zip(&self.others)
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, (r, o))| (r, o.speed)),
            );
            let mut nearest: Option<(f64, f64)> = None;
            for (r, speed) in leaders {
                if r.y_min >= me.y_min && me.overlaps_laterally(r) {
                    let gap = r.y_min - me.y_max;
                    if nearest.is_none_or(|(g, _)| gap < g) {
                        nearest = Some((gap, speed));
                    }
                }
            }
            if let Some((gap, lead_speed)) = nearest {
                let dv = v.speed - lead_speed;
                if dv > 0.0 && gap - cfg.traffic_min_gap <= dv * dv / (2.0 * cfg.decel) + dv * cfg.dt {
                    new_speeds[i] = (v.speed - cfg.decel * cfg.dt).max(lead_speed);
                }
            }
        }
        for (v, s) in self.others.iter_mut().zip(new_speeds) {
            v.speed = s;
        }
    }

    fn respawn(&mut self) {
        let cfg = &self.config;
        for i in 0..self.others.len() {
            let y = self.others[i].long_pos;
            if y.abs() <= cfg.range_half {
                continue;
            }
            let spawn_y = if y > 0.0 { -cfg.range_half } else { cfg.range_half };
            let kind = self.others[i].kind;
            let mut candidate = self.others[i].clone();
            for _ in 0..cfg.spawn_attempts {
                let lane = self.rng.random_range(0..cfg.n_lanes);
                candidate.lane = lane;
                candidate.lateral_pos = random_lateral(cfg, kind, lane, &mut self.rng);
                candidate.long_pos = spawn_y;
                candidate.speed = self.rng.random_range(cfg.speed_min()..=cfg.speed_max());
                candidate.lane_change = None;
                let r = candidate.rect(cfg);
                let blocked = r.intersects(&self.ego.rect(cfg))
                    || self
                        .others
                        .iter()
                        .enumerate()
                        .any(|(j, o)| j != i && o.rect(cfg).intersects(&r));
                if !blocked {
                    break;
                }
            }
            // Overlap between non-ego vehicles is tolerated when every draw
            // was blocked; only ego contacts are scored.
            self.others[i] = candidate;
        }
    }
}

fn random_kind(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> VehicleKind {
    if rng.random::<f64>() < cfg.motorcycle_fraction {
        VehicleKind::Motorcycle
    } else {
        VehicleKind::Car
    }
}

/// Cars ride the lane center; motorcycles pick one of the lane's corridors.
fn random_lateral(cfg: &SimConfig, kind: VehicleKind, lane: usize, rng: &mut ChaCha8Rng) -> f64 {
    match kind {
        VehicleKind::Car => cfg.lane_center(lane),
        VehicleKind::Motorcycle => {
            let corridor = rng.random_range(0..cfg.corridors_per_lane);
            (lane as f64) * cfg.lane_width() + (corridor as f64 + 0.5) * cfg.corridor_width
        }
    }
}

/// The ego footprint intersects another vehicle's footprint.
pub fn detect_collision(state: &SimState) -> bool {
    let cfg = &state.config;
    let ego = state.ego.rect(cfg);
    state.others.iter().any(|o| o.rect(cfg).intersects(&ego))
}

/// No collision, but a vehicle overlapping the ego laterally is closer than
/// `safety_gap` edge to edge in front or behind.
pub fn detect_safety_breach(state: &SimState) -> bool {
    if detect_collision(state) {
        return false;
    }
    let cfg = &state.config;
    let ego = state.ego.rect(cfg);
    state.others.iter().any(|o| {
        let r = o.rect(cfg);
        r.overlaps_laterally(&ego) && ego.longitudinal_gap(&r) < cfg.safety_gap
    })
}
