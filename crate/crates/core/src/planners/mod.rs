//! Classical lane-change baselines.
//!
//! All three planners assume the other vehicles keep their lanes. P1 gates a
//! right lane change on edge gaps and otherwise follows the lead vehicle with
//! a PID speed controller. P2 adds a relative-speed encroachment test on the
//! right lane. P3 searches a time-expanded lane graph weighted by a proximity
//! risk field (see [`risk`]).

pub mod risk;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Action, SimState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    pub gap_front_min: f64,
    pub gap_right_front_min: f64,
    pub gap_right_back_min: f64,
    pub pid_kp: f64,
    pub pid_ki: f64,
    pub pid_kd: f64,
    /// Desired accelerations within `±accel_deadband` map to `NoAction`.
    pub accel_deadband: f64,
    /// Look-ahead of the P2 encroachment test and of the P3 graph, seconds.
    pub horizon: f64,
    /// Layer spacing of the P3 time-expanded graph, seconds.
    pub risk_grid_dt: f64,
    /// Length scale of the P3 proximity kernel, meters.
    pub risk_sigma: f64,
    /// P3 cost of any lane change edge.
    pub lane_change_cost: f64,
    /// P3 reward per lane gained toward the right.
    pub lane_gain_reward: f64,
    /// Spacing of candidate target speeds for the P3 speed choice, m/s.
    pub risk_speed_step: f64,
    /// A candidate speed must lower the next-layer risk by more than this
    /// to override the follow target.
    pub risk_tie_tolerance: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            gap_front_min: 6.0,
            gap_right_front_min: 6.0,
            gap_right_back_min: 6.0,
            pid_kp: 0.5,
            pid_ki: 0.0,
            pid_kd: 0.1,
            accel_deadband: 0.5,
            horizon: 2.0,
            risk_grid_dt: 0.25,
            risk_sigma: 5.0,
            lane_change_cost: 0.2,
            lane_gain_reward: 0.5,
            risk_speed_step: 1.0,
            risk_tie_tolerance: 1e-3,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self, accel: f64, decel: f64) -> Result<()> {
        let positive = [
            ("gap_front_min", self.gap_front_min),
            ("gap_right_front_min", self.gap_right_front_min),
            ("gap_right_back_min", self.gap_right_back_min),
            ("accel_deadband", self.accel_deadband),
            ("horizon", self.horizon),
            ("risk_grid_dt", self.risk_grid_dt),
            ("risk_sigma", self.risk_sigma),
            ("risk_speed_step", self.risk_speed_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("planner {name} must be positive, got {v}")));
            }
        }
        if self.accel_deadband >= accel.min(decel) {
            return Err(Error::Config(format!(
                "accel_deadband {} must be below min(accel, decel) = {}",
                self.accel_deadband,
                accel.min(decel)
            )));
        }
        if self.lane_change_cost < 0.0 || self.lane_gain_reward < 0.0 {
            return Err(Error::Config("P3 lane costs must be non-negative".into()));
        }
        if self.horizon < self.risk_grid_dt {
            return Err(Error::Config("horizon shorter than one risk layer".into()));
        }
        Ok(())
    }
}

/// Nearest vehicles ahead of and behind the ego in one lane. Gaps are edge to
/// edge and clamped at zero; an empty side reports `range_half` and no speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneGaps {
    pub front_gap: f64,
    pub back_gap: f64,
    pub front_speed: Option<f64>,
    pub back_speed: Option<f64>,
}

impl LaneGaps {
    pub fn empty(range_half: f64) -> Self {
        Self {
            front_gap: range_half,
            back_gap: range_half,
            front_speed: None,
            back_speed: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerView {
    pub ego_speed: f64,
    /// Lane the ego is in, or is moving into during a lane change.
    pub ego_lane: usize,
    pub n_lanes: usize,
    pub lane_changing: bool,
    pub speed_limit: f64,
    pub safety_gap: f64,
    pub dt: f64,
    pub current: LaneGaps,
    /// `None` when the ego is in the rightmost lane.
    pub right: Option<LaneGaps>,
}

impl PlannerView {
    pub fn from_state(state: &SimState) -> Self {
        let cfg = &state.config;
        let lane = state.ego.destination_lane();
        let right = (lane + 1 < cfg.n_lanes).then(|| lane_gaps(state, lane + 1));
        Self {
            ego_speed: state.ego.speed,
            ego_lane: lane,
            n_lanes: cfg.n_lanes,
            lane_changing: state.ego.lane_change.is_some(),
            speed_limit: cfg.speed_limit(),
            safety_gap: cfg.safety_gap,
            dt: cfg.dt,
            current: lane_gaps(state, lane),
            right,
        }
    }
}

/// Gaps to the closest vehicles whose footprint overlaps `lane` laterally.
pub fn lane_gaps(state: &SimState, lane: usize) -> LaneGaps {
    let cfg = &state.config;
    let width = cfg.lane_width();
    let (lane_lo, lane_hi) = (lane as f64 * width, (lane + 1) as f64 * width);
    let ego = state.ego.rect(cfg);
    let mut front: Option<(f64, f64)> = None;
    let mut back: Option<(f64, f64)> = None;
    for v in &state.others {
        let r = v.rect(cfg);
        if !(r.x_min < lane_hi && lane_lo < r.x_max) {
            continue;
        }
        let gap = ego.longitudinal_gap(&r).max(0.0);
        let side = if v.long_pos >= state.ego.long_pos {
            &mut front
        } else {
            &mut back
        };
        if side.is_none_or(|(g, _)| gap < g) {
            *side = Some((gap, v.speed));
        }
    }
    LaneGaps {
        front_gap: front.map_or(cfg.range_half, |f| f.0),
        back_gap: back.map_or(cfg.range_half, |b| b.0),
        front_speed: front.map(|f| f.1),
        back_speed: back.map(|b| b.1),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

impl PidState {
    /// Desired acceleration for a speed error (target minus current, m/s).
    pub fn control(&mut self, error: f64, dt: f64, params: &PlannerParams) -> f64 {
        self.integral += error * dt;
        let derivative = self.prev_error.map_or(0.0, |prev| (error - prev) / dt);
        self.prev_error = Some(error);
        params.pid_kp * error + params.pid_ki * self.integral + params.pid_kd * derivative
    }
}

pub fn quantize_accel(desired: f64, deadband: f64) -> Action {
    if desired > deadband {
        Action::Accelerate
    } else if desired < -deadband {
        Action::Decelerate
    } else {
        Action::NoAction
    }
}

/// The P1 gap test: enough room ahead in the current lane and both ahead and
/// behind in the right lane.
pub fn p1_admits(view: &PlannerView, params: &PlannerParams) -> bool {
    let Some(right) = view.right else {
        return false;
    };
    !view.lane_changing
        && view.current.front_gap >= params.gap_front_min
        && right.front_gap >= params.gap_right_front_min
        && right.back_gap >= params.gap_right_back_min
}

/// P1's test plus: no right-lane neighbor closes to within `safety_gap` over
/// the horizon at its current relative speed.
pub fn p2_admits(view: &PlannerView, params: &PlannerParams) -> bool {
    if !p1_admits(view, params) {
        return false;
    }
    let Some(right) = view.right else {
        return false;
    };
    let h = params.horizon;
    let back_ok = right.back_speed.is_none_or(|v| {
        right.back_gap - (v - view.ego_speed).max(0.0) * h >= view.safety_gap
    });
    let front_ok = right.front_speed.is_none_or(|v| {
        right.front_gap + (v - view.ego_speed).min(0.0) * h >= view.safety_gap
    });
    back_ok && front_ok
}

/// Speed the follow controller tracks: the lead vehicle's, or the limit when
/// the lane ahead is empty.
pub fn follow_target(view: &PlannerView) -> f64 {
    view.current.front_speed.unwrap_or(view.speed_limit)
}

pub fn track_speed(
    target: f64,
    view: &PlannerView,
    params: &PlannerParams,
    pid: &mut PidState,
) -> Action {
    let desired = pid.control(target - view.ego_speed, view.dt, params);
    quantize_accel(desired, params.accel_deadband)
}

pub fn p1_action(view: &PlannerView, params: &PlannerParams, pid: &mut PidState) -> Action {
    if p1_admits(view, params) {
        return Action::SwitchRight;
    }
    track_speed(follow_target(view), view, params, pid)
}

pub fn p2_action(view: &PlannerView, params: &PlannerParams, pid: &mut PidState) -> Action {
    if p2_admits(view, params) {
        return Action::SwitchRight;
    }
    track_speed(follow_target(view), view, params, pid)
}

pub fn p3_action(state: &SimState, params: &PlannerParams, pid: &mut PidState) -> Action {
    let view = PlannerView::from_state(state);
    let scene = risk::RiskScene::from_state(state);
    if !view.lane_changing {
        let graph = risk::TimeGraph::build(&scene, params);
        let plan = graph.shortest_path(view.ego_lane);
        if plan.first_move_right() && p1_admits(&view, params) {
            return Action::SwitchRight;
        }
    }
    let target = scene.safest_speed(view.ego_lane, follow_target(&view), params);
    track_speed(target, &view, params, pid)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    P1,
    P2,
    P3,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::P1 => "p1",
            PlannerKind::P2 => "p2",
            PlannerKind::P3 => "p3",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(PlannerKind::P1),
            "p2" => Ok(PlannerKind::P2),
            "p3" => Ok(PlannerKind::P3),
            other => Err(Error::Config(format!("unknown planner '{other}'"))),
        }
    }
}

/// Anything that suggests a primitive action for a state. Used both as a
/// standalone driving policy and as the augmented agent's option.
pub trait Planner: Send {
    fn suggest(&mut self, state: &SimState) -> Action;

    /// Clears per-episode controller state.
    fn reset(&mut self) {}
}

#[derive(Clone, Debug)]
pub struct ClassicalPlanner {
    pub kind: PlannerKind,
    pub params: PlannerParams,
    pid: PidState,
}

impl ClassicalPlanner {
    pub fn new(kind: PlannerKind, params: PlannerParams) -> Self {
        Self {
            kind,
            params,
            pid: PidState::default(),
        }
    }

    pub fn pid(&self) -> &PidState {
        &self.pid
    }
}

impl Planner for ClassicalPlanner {
    fn suggest(&mut self, state: &SimState) -> Action {
        match self.kind {
            PlannerKind::P1 => p1_action(&PlannerView::from_state(state), &self.params, &mut self.pid),
            PlannerKind::P2 => p2_action(&PlannerView::from_state(state), &self.params, &mut self.pid),
            PlannerKind::P3 => p3_action(state, &self.params, &mut self.pid),
        }
    }

    fn reset(&mut self) {
        self.pid = PidState::default();
    }
}

#[cfg(test)]
mod tests;
