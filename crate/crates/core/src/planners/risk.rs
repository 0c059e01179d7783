//! Risk field and time-expanded lane graph for the P3 planner.
//!
//! Nodes are `(lane, k)` for `k = 0..=horizon / risk_grid_dt`. Other vehicles
//! are extrapolated at constant velocity. Node risk sums a Gaussian proximity
//! kernel over the vehicles in that lane, weighted up by closing speed:
//!
//! ```text
//! risk(l, k) = Σ_i (1 + max(0, Δv_i) / v_limit) · exp(-d_i(t_k)² / σ²)
//! ```
//!
//! An edge into `(l', k + 1)` costs `risk(l', k + 1) + λ·[l' ≠ l] - μ·(l' - l)`.
//! The ego only moves right, so every edge leaves a node for the same or the
//! next lane.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::sim::SimState;

use super::PlannerParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskVehicle {
    /// Center position relative to the ego, meters.
    pub long_pos: f64,
    pub speed: f64,
    pub length: f64,
}

/// Constant-velocity snapshot of the traffic, grouped by lane.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskScene {
    pub ego_speed: f64,
    pub ego_length: f64,
    pub speed_limit: f64,
    /// `lanes[l]` holds every vehicle whose footprint overlaps lane `l`.
    pub lanes: Vec<Vec<RiskVehicle>>,
}

impl RiskScene {
    pub fn from_state(state: &SimState) -> Self {
        let cfg = &state.config;
        let width = cfg.lane_width();
        let mut lanes = vec![Vec::new(); cfg.n_lanes];
        for v in &state.others {
            let r = v.rect(cfg);
            for (lane, bucket) in lanes.iter_mut().enumerate() {
                let (lo, hi) = (lane as f64 * width, (lane + 1) as f64 * width);
                if r.x_min < hi && lo < r.x_max {
                    bucket.push(RiskVehicle {
                        long_pos: v.long_pos,
                        speed: v.speed,
                        length: v.length(cfg),
                    });
                }
            }
        }
        Self {
            ego_speed: state.ego.speed,
            ego_length: state.ego.length(cfg),
            speed_limit: cfg.speed_limit(),
            lanes,
        }
    }

    pub fn n_lanes(&self) -> usize {
        self.lanes.len()
    }

    /// Risk in `lane` after `t` seconds if the ego holds `ego_speed`.
    pub fn risk_at(&self, lane: usize, t: f64, ego_speed: f64, sigma: f64) -> f64 {
        self.lanes[lane]
            .iter()
            .map(|v| {
                let y = v.long_pos + (v.speed - ego_speed) * t;
                let gap = (y.abs() - (self.ego_length + v.length) / 2.0).max(0.0);
                let closing = if v.long_pos >= 0.0 {
                    ego_speed - v.speed
                } else {
                    v.speed - ego_speed
                };
                let weight = 1.0 + closing.max(0.0) / self.speed_limit;
                weight * (-(gap * gap) / (sigma * sigma)).exp()
            })
            .sum()
    }

    /// Target speed in `lane` with the least risk one layer ahead. Candidates
    /// are `preferred` and a grid from 0 to the limit; a candidate replaces
    /// the current choice only if it is lower by more than the tie tolerance.
    pub fn safest_speed(&self, lane: usize, preferred: f64, params: &PlannerParams) -> f64 {
        let t = params.risk_grid_dt;
        let sigma = params.risk_sigma;
        let mut best = preferred;
        let mut best_risk = self.risk_at(lane, t, preferred, sigma);
        let n = (self.speed_limit / params.risk_speed_step).floor() as usize;
        let grid = (0..=n)
            .map(|i| i as f64 * params.risk_speed_step)
            .chain(std::iter::once(self.speed_limit));
        for speed in grid {
            let risk = self.risk_at(lane, t, speed, sigma);
            if risk < best_risk - params.risk_tie_tolerance {
                best = speed;
                best_risk = risk;
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeGraph {
    n_lanes: usize,
    n_layers: usize,
    /// `risk[k * n_lanes + lane]`
    risk: Vec<f64>,
    lane_change_cost: f64,
    lane_gain_reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    /// Lane at each layer, starting with the ego's lane at layer 0.
    pub lanes: Vec<usize>,
    pub cost: f64,
}

impl Plan {
    pub fn first_move_right(&self) -> bool {
        self.lanes.len() > 1 && self.lanes[1] > self.lanes[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // Min-heap on cost, then on node index for a deterministic pop order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl TimeGraph {
    pub fn build(scene: &RiskScene, params: &PlannerParams) -> Self {
        let steps = (params.horizon / params.risk_grid_dt).round() as usize;
        let n_layers = steps + 1;
        let n_lanes = scene.n_lanes();
        let mut risk = Vec::with_capacity(n_layers * n_lanes);
        for k in 0..n_layers {
            let t = k as f64 * params.risk_grid_dt;
            for lane in 0..n_lanes {
                risk.push(scene.risk_at(lane, t, scene.ego_speed, params.risk_sigma));
            }
        }
        Self {
            n_lanes,
            n_layers,
            risk,
            lane_change_cost: params.lane_change_cost,
            lane_gain_reward: params.lane_gain_reward,
        }
    }

    /// Graph with explicit node risks, `risk[k][lane]`.
    pub fn from_risk(risk: &[Vec<f64>], lane_change_cost: f64, lane_gain_reward: f64) -> Self {
        let n_lanes = risk.first().map_or(0, Vec::len);
        Self {
            n_lanes,
            n_layers: risk.len(),
            risk: risk.iter().flatten().copied().collect(),
            lane_change_cost,
            lane_gain_reward,
        }
    }

    pub fn n_lanes(&self) -> usize {
        self.n_lanes
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn node_risk(&self, lane: usize, layer: usize) -> f64 {
        self.risk[layer * self.n_lanes + lane]
    }

    /// Lanes reachable from `lane` in one layer.
    pub fn successors(&self, lane: usize) -> impl Iterator<Item = usize> {
        let last = self.n_lanes.saturating_sub(1);
        lane..=(lane + 1).min(last)
    }

    /// Cost of the edge `(from, layer - 1) -> (to, layer)`. May be negative.
    pub fn edge_cost(&self, from: usize, to: usize, layer: usize) -> f64 {
        let gain = to as f64 - from as f64;
        let change = if to != from { self.lane_change_cost } else { 0.0 };
        self.node_risk(to, layer) + change - self.lane_gain_reward * gain
    }

    /// Dijkstra from `(start_lane, 0)` to the cheapest node of the last layer.
    ///
    /// Edge costs can be negative because of the lane-gain reward. Every path
    /// to the last layer has exactly `n_layers - 1` edges, so the search runs
    /// on costs shifted by the largest possible reward per edge, which keeps
    /// them non-negative and leaves the path ordering unchanged.
    pub fn shortest_path(&self, start_lane: usize) -> Plan {
        let n = self.n_lanes * self.n_layers;
        if self.n_layers <= 1 {
            return Plan {
                lanes: vec![start_lane],
                cost: 0.0,
            };
        }
        let shift = self.lane_gain_reward.max(0.0);
        let node = |lane: usize, layer: usize| layer * self.n_lanes + lane;
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        let start = node(start_lane, 0);
        dist[start] = 0.0;
        heap.push(HeapEntry {
            cost: 0.0,
            node: start,
        });
        let last = self.n_layers - 1;
        let mut goal = None;
        while let Some(HeapEntry { cost, node: u }) = heap.pop() {
            if cost > dist[u] {
                continue;
            }
            let (lane, layer) = (u % self.n_lanes, u / self.n_lanes);
            if layer == last {
                goal = Some(u);
                break;
            }
            for to in self.successors(lane) {
                let v = node(to, layer + 1);
                let c = cost + self.edge_cost(lane, to, layer + 1) + shift;
                if c < dist[v] {
                    dist[v] = c;
                    prev[v] = u;
                    heap.push(HeapEntry { cost: c, node: v });
                }
            }
        }
        let goal = goal.expect("last layer is always reachable");
        let mut lanes = Vec::with_capacity(self.n_layers);
        let mut at = goal;
        while at != usize::MAX {
            lanes.push(at % self.n_lanes);
            at = prev[at];
        }
        lanes.reverse();
        Plan {
            lanes,
            cost: dist[goal] - shift * last as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every right-or-stay lane sequence from `start`, scored edge by edge.
    fn enumerate_best(graph: &TimeGraph, start: usize) -> f64 {
        fn walk(g: &TimeGraph, lane: usize, layer: usize, acc: f64, best: &mut f64) {
            if layer + 1 == g.n_layers() {
                *best = best.min(acc);
                return;
            }
            for to in g.successors(lane) {
                walk(g, to, layer + 1, acc + g.edge_cost(lane, to, layer + 1), best);
            }
        }
        let mut best = f64::INFINITY;
        walk(graph, start, 0, 0.0, &mut best);
        best
    }

    fn path_cost(graph: &TimeGraph, lanes: &[usize]) -> f64 {
        lanes
            .windows(2)
            .enumerate()
            .map(|(k, w)| graph.edge_cost(w[0], w[1], k + 1))
            .sum()
    }

    #[test]
    fn dijkstra_matches_exhaustive_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let lanes = rng.random_range(1..=4);
            let layers = rng.random_range(1..=9);
            let risk: Vec<Vec<f64>> = (0..layers)
                .map(|_| (0..lanes).map(|_| rng.random_range(0.0..2.0) * rng.random::<f64>()).collect())
                .collect();
            let g = TimeGraph::from_risk(&risk, 0.2, 0.5);
            let start = rng.random_range(0..lanes);
            let plan = g.shortest_path(start);
            let best = enumerate_best(&g, start);
            assert_eq!(plan.lanes.len(), layers);
            assert_eq!(plan.lanes[0], start);
            assert!((plan.cost - best).abs() < 1e-9, "{} vs {}", plan.cost, best);
            assert!((path_cost(&g, &plan.lanes) - best).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_road_plan_moves_right_first() {
        let risk = vec![vec![0.0; 4]; 9];
        let plan = TimeGraph::from_risk(&risk, 0.2, 0.5).shortest_path(0);
        // Three rightward edges at 0.2 - 0.5 each; the order among equal-cost
        // paths is not fixed, but every optimum starts by moving right.
        assert!((plan.cost + 0.9).abs() < 1e-12);
        assert_eq!(*plan.lanes.last().unwrap(), 3);
        assert!(plan.first_move_right());
    }

    #[test]
    fn congested_right_lane_keeps_the_current_lane() {
        // Right lane risky at every layer, current lane clear.
        let risk = vec![vec![0.0, 1.2, 0.0, 0.0]; 9];
        let g = TimeGraph::from_risk(&risk, 0.2, 0.5);
        let plan = g.shortest_path(0);
        assert!(!plan.first_move_right());
        assert!((plan.cost - enumerate_best(&g, 0)).abs() < 1e-12);
    }

    #[test]
    fn risk_kernel_is_one_at_contact_and_decays() {
        let scene = RiskScene {
            ego_speed: 10.0,
            ego_length: 4.0,
            speed_limit: 22.0,
            lanes: vec![vec![RiskVehicle {
                long_pos: 4.0,
                speed: 10.0,
                length: 4.0,
            }]],
        };
        assert!((scene.risk_at(0, 0.0, 10.0, 5.0) - 1.0).abs() < 1e-12);
        // Ego 11 m/s closes at 1 m/s: weight 1 + 1/22.
        assert!((scene.risk_at(0, 0.0, 11.0, 5.0) - (1.0 + 1.0 / 22.0)).abs() < 1e-12);
        // 5 m further away: exp(-1).
        let mut far = scene.clone();
        far.lanes[0][0].long_pos = 9.0;
        assert!((far.risk_at(0, 0.0, 10.0, 5.0) - (-1.0f64).exp()).abs() < 1e-12);
    }
}
