//! Independent oracles and scene generators shared by the integration tests.

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lanechange::dqn::{dqn_loss_and_grad, Batch, Mlp};
use lanechange::sim::{LaneChange, SimConfig, SimState, Vehicle, VehicleKind, GRID_COLS, GRID_ROWS};

/// Lateral and longitudinal half extents, read straight from the config.
fn half_extents(v: &Vehicle, cfg: &SimConfig) -> (f64, f64) {
    match v.kind {
        VehicleKind::Car => (cfg.car_width / 2.0, cfg.car_length / 2.0),
        VehicleKind::Motorcycle => (cfg.motorcycle_width / 2.0, cfg.motorcycle_length / 2.0),
    }
}

/// Length of the overlap of `[a0, a1]` and `[b0, b1]`, zero when disjoint.
fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Footprint of `v` as `(x0, x1, y0, y1)`.
fn footprint(v: &Vehicle, cfg: &SimConfig) -> (f64, f64, f64, f64) {
    let (hw, hl) = half_extents(v, cfg);
    (v.lateral_pos - hw, v.lateral_pos + hw, v.long_pos - hl, v.long_pos + hl)
}

/// Cell by cell: a cell takes the largest normalized speed among vehicles
/// whose footprint covers part of it with positive area.
pub fn grid_oracle(state: &SimState) -> Vec<f32> {
    let cfg = &state.config;
    let lane_w = cfg.corridor_width * cfg.corridors_per_lane as f64;
    let limit = cfg.speed_limit_kmh / 3.6;
    let mut out = vec![0.0f32; GRID_COLS * GRID_ROWS];
    let vehicles: Vec<&Vehicle> = std::iter::once(&state.ego).chain(&state.others).collect();
    for col in 0..GRID_COLS {
        let lane = state.ego.lane as i64 + col as i64 - 2;
        for row in 0..GRID_ROWS {
            let cell = &mut out[col * GRID_ROWS + row];
            if lane < 0 || lane >= cfg.n_lanes as i64 {
                *cell = -1.0;
                continue;
            }
            let (cx0, cx1) = (lane as f64 * lane_w, (lane + 1) as f64 * lane_w);
            let (cy0, cy1) = (row as f64 - 50.0, row as f64 - 49.0);
            for v in &vehicles {
                let (x0, x1, y0, y1) = footprint(v, cfg);
                if overlap(cx0, cx1, x0, x1) * overlap(cy0, cy1, y0, y1) > 0.0 {
                    *cell = cell.max((v.speed / limit) as f32);
                }
            }
        }
    }
    out
}

/// Ego footprint shares positive area with another vehicle's.
pub fn collision_oracle(state: &SimState) -> bool {
    let cfg = &state.config;
    let (ex0, ex1, ey0, ey1) = footprint(&state.ego, cfg);
    state.others.iter().any(|o| {
        let (x0, x1, y0, y1) = footprint(o, cfg);
        overlap(ex0, ex1, x0, x1) * overlap(ey0, ey1, y0, y1) > 0.0
    })
}

/// No collision, and some laterally overlapping vehicle is within the safety
/// gap of the ego's nearer end.
pub fn breach_oracle(state: &SimState) -> bool {
    if collision_oracle(state) {
        return false;
    }
    let cfg = &state.config;
    let (ex0, ex1, _, _) = footprint(&state.ego, cfg);
    let (_, ehl) = half_extents(&state.ego, cfg);
    state.others.iter().any(|o| {
        let (x0, x1, _, _) = footprint(o, cfg);
        if overlap(ex0, ex1, x0, x1) <= 0.0 {
            return false;
        }
        let (_, hl) = half_extents(o, cfg);
        let gap = if o.long_pos >= state.ego.long_pos {
            (o.long_pos - hl) - (state.ego.long_pos + ehl)
        } else {
            (state.ego.long_pos - ehl) - (o.long_pos + hl)
        };
        gap < cfg.safety_gap
    })
}

fn random_vehicle(rng: &mut ChaCha8Rng, cfg: &SimConfig, id: u32, long_pos: f64) -> Vehicle {
    let kind = if rng.random_bool(0.3) { VehicleKind::Motorcycle } else { VehicleKind::Car };
    let lane = rng.random_range(0..cfg.n_lanes);
    let lane_w = cfg.lane_width();
    let mut v = Vehicle::new(id, kind, cfg, lane, long_pos, rng.random_range(0.0..=cfg.speed_limit()));
    if kind == VehicleKind::Motorcycle && rng.random_bool(0.5) {
        let c = rng.random_range(0..cfg.corridors_per_lane);
        v.lateral_pos = lane as f64 * lane_w + (c as f64 + 0.5) * cfg.corridor_width;
    }
    if rng.random_bool(0.3) {
        let right = rng.random_bool(0.5);
        let target = if right { (lane + 1).min(cfg.n_lanes - 1) } else { lane.saturating_sub(1) };
        if target != lane {
            let progress: f64 = rng.random();
            let from = v.lateral_pos;
            v.lateral_pos = from + (target as f64 - lane as f64) * lane_w * progress;
            v.lane_change = Some(LaneChange { target_lane: target, progress, from_lateral: from });
        }
    }
    v.adversarial = rng.random_bool(0.4);
    v
}

/// Longitudinal position: continuous, or on a quarter-meter lattice so that
/// edges land exactly on cell boundaries.
fn random_long(rng: &mut ChaCha8Rng, span: f64) -> f64 {
    let y = rng.random_range(-span..span);
    if rng.random_bool(0.5) {
        (y * 4.0).round() / 4.0
    } else {
        y
    }
}

/// A random scene: vehicles anywhere, overlaps and mid-lane-change states
/// included. Every third scene packs traffic close to the ego.
pub fn random_scene(seed: u64) -> SimState {
    let cfg = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ego = random_vehicle(&mut rng, &cfg, 0, 0.0);
    ego.kind = VehicleKind::Car;
    ego.lateral_pos = cfg.lane_center(ego.lane);
    if let Some(lc) = ego.lane_change.as_mut() {
        lc.from_lateral = ego.lateral_pos;
        ego.lateral_pos += (lc.target_lane as f64 - ego.lane as f64) * cfg.lane_width() * lc.progress;
    }
    ego.adversarial = false;
    let span = if seed.is_multiple_of(3) { 8.0 } else { 60.0 };
    let n = rng.random_range(0..=18);
    let others = (1..=n).map(|id| {
        let y = random_long(&mut rng, span);
        random_vehicle(&mut rng, &cfg, id, y)
    }).collect();
    SimState::from_parts(&cfg, seed, ego, others).unwrap()
}

/// A state reached by driving a random action sequence from a reset.
pub fn rollout_scene(seed: u64) -> SimState {
    let cfg = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut state = SimState::reset(&cfg, seed).unwrap();
    let steps = rng.random_range(0..400);
    for _ in 0..steps {
        let a = lanechange::sim::Action::from_index(rng.random_range(0..4)).unwrap();
        if state.step(a).unwrap().done {
            break;
        }
    }
    state
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub params_checked: usize,
}

/// Central finite differences of the DQN loss against the analytic gradient
/// on `n_nets` random networks of shape `20 → 8 → 8 → 8 → K`.
pub fn gradient_check(n_nets: usize, h: f64, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for net_i in 0..n_nets {
        let k = 4 + net_i % 2;
        let sizes = [20, 8, 8, 8, k];
        let online: Mlp<f64> = Mlp::init(&sizes, &mut rng);
        let target: Mlp<f64> = Mlp::init(&sizes, &mut rng);
        let b = 6;
        let batch = Batch {
            states: Array2::from_shape_fn((b, 20), |_| rng.random_range(-1.0..1.0)),
            actions: (0..b).map(|_| rng.random_range(0..k)).collect(),
            rewards: (0..b).map(|_| rng.random_range(-10.0..10.0)).collect(),
            next_states: Array2::from_shape_fn((b, 20), |_| rng.random_range(-1.0..1.0)),
            dones: (0..b).map(|i| i % 3 == 0).collect(),
        };
        let gamma = 0.99;
        let (_, grads) = dqn_loss_and_grad(&online, &target, &batch, gamma).unwrap();
        let analytic = grads.flat();
        let loss_at = |net: &Mlp<f64>| dqn_loss_and_grad(net, &target, &batch, gamma).unwrap().0;
        for (p, &a) in analytic.iter().enumerate() {
            let mut plus = online.clone();
            *plus.flat_mut()[p] += h;
            let mut minus = online.clone();
            *minus.flat_mut()[p] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    GradCheck {
        max_rel_error: worst,
        params_checked: checked,
    }
}
