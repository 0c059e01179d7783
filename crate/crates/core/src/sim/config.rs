use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const KMH_PER_MS: f64 = 3.6;

pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / KMH_PER_MS
}

pub fn ms_to_kmh(ms: f64) -> f64 {
    ms * KMH_PER_MS
}

/// Static parameters of the lane-change world. Speeds are configured in km/h
/// and converted to m/s internally; everything else is SI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_lanes: usize,
    pub corridors_per_lane: usize,
    pub corridor_width: f64,
    /// Half-length of the ego-centric window; vehicles leaving it respawn at
    /// the opposite end.
    pub range_half: f64,
    /// Total vehicle count including the ego.
    pub n_vehicles: usize,
    pub n_adversarial: usize,
    pub adversary_lane_change_prob: f64,
    pub dt: f64,
    pub speed_min_kmh: f64,
    pub speed_max_kmh: f64,
    pub speed_limit_kmh: f64,
    pub ego_initial_speed_kmh: f64,
    pub accel: f64,
    /// Magnitude of the braking deceleration.
    pub decel: f64,
    pub lane_change_duration: f64,
    pub safety_gap: f64,
    pub max_steps: u64,
    pub car_width: f64,
    pub car_length: f64,
    pub motorcycle_width: f64,
    pub motorcycle_length: f64,
    pub motorcycle_fraction: f64,
    /// Non-adversarial following: a vehicle that is not changing lanes brakes
    /// at `decel` for the vehicle ahead (the ego included) when it could no
    /// longer stop `traffic_min_gap` behind it.
    pub traffic_braking: bool,
    pub traffic_min_gap: f64,
    /// At reset, no vehicle overlapping the ego laterally starts closer than
    /// this, edge to edge.
    pub spawn_clearance: f64,
    /// Candidate draws per placement before reset gives up or a respawn
    /// accepts an overlapping slot.
    pub spawn_attempts: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_lanes: 4,
            corridors_per_lane: 3,
            corridor_width: 0.7,
            range_half: 100.0,
            n_vehicles: 19,
            n_adversarial: 7,
            adversary_lane_change_prob: 0.01,
            dt: 0.016,
            speed_min_kmh: 20.0,
            speed_max_kmh: 80.0,
            speed_limit_kmh: 80.0,
            ego_initial_speed_kmh: 50.0,
            accel: 3.0,
            decel: 4.0,
            lane_change_duration: 1.0,
            safety_gap: 2.0,
            max_steps: 8000,
            car_width: 2.0,
            car_length: 4.0,
            motorcycle_width: 0.6,
            motorcycle_length: 1.5,
            motorcycle_fraction: 0.2,
            traffic_braking: true,
            traffic_min_gap: 3.0,
            spawn_clearance: 15.0,
            spawn_attempts: 1000,
        }
    }
}

impl SimConfig {
    /// Road with only the ego on it.
    pub fn empty_road() -> Self {
        Self {
            n_vehicles: 1,
            n_adversarial: 0,
            ..Self::default()
        }
    }

    pub fn lane_width(&self) -> f64 {
        self.corridors_per_lane as f64 * self.corridor_width
    }

    pub fn road_width(&self) -> f64 {
        self.n_lanes as f64 * self.lane_width()
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width()
    }

    pub fn speed_limit(&self) -> f64 {
        kmh_to_ms(self.speed_limit_kmh)
    }

    pub fn speed_min(&self) -> f64 {
        kmh_to_ms(self.speed_min_kmh)
    }

    pub fn speed_max(&self) -> f64 {
        kmh_to_ms(self.speed_max_kmh)
    }

    pub fn rightmost_lane(&self) -> usize {
        self.n_lanes - 1
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_lanes == 0 || self.corridors_per_lane == 0 {
            return fail("road needs at least one lane and one corridor".into());
        }
        if self.n_vehicles == 0 {
            return fail("n_vehicles counts the ego and must be at least 1".into());
        }
        if self.n_adversarial > self.n_vehicles - 1 {
            return fail(format!(
                "n_adversarial ({}) exceeds non-ego vehicles ({})",
                self.n_adversarial,
                self.n_vehicles - 1
            ));
        }
        for (name, p) in [
            ("adversary_lane_change_prob", self.adversary_lane_change_prob),
            ("motorcycle_fraction", self.motorcycle_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} = {p} is not a probability"));
            }
        }
        let positive = [
            ("dt", self.dt),
            ("corridor_width", self.corridor_width),
            ("range_half", self.range_half),
            ("lane_change_duration", self.lane_change_duration),
            ("safety_gap", self.safety_gap),
            ("accel", self.accel),
            ("decel", self.decel),
            ("car_width", self.car_width),
            ("car_length", self.car_length),
            ("motorcycle_width", self.motorcycle_width),
            ("motorcycle_length", self.motorcycle_length),
            ("speed_limit_kmh", self.speed_limit_kmh),
            ("traffic_min_gap", self.traffic_min_gap),
            ("spawn_clearance", self.spawn_clearance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(0.0 <= self.speed_min_kmh
            && self.speed_min_kmh <= self.speed_max_kmh
            && self.speed_max_kmh <= self.speed_limit_kmh)
        {
            return fail(format!(
                "need 0 <= speed_min ({}) <= speed_max ({}) <= speed_limit ({})",
                self.speed_min_kmh, self.speed_max_kmh, self.speed_limit_kmh
            ));
        }
        if !(0.0..=self.speed_limit_kmh).contains(&self.ego_initial_speed_kmh) {
            return fail(format!(
                "ego_initial_speed_kmh ({}) outside [0, speed_limit]",
                self.ego_initial_speed_kmh
            ));
        }
        if self.car_width > self.lane_width() {
            return fail(format!(
                "car width {} does not fit in a lane of {} corridors",
                self.car_width, self.corridors_per_lane
            ));
        }
        if self.motorcycle_width > self.corridor_width {
            return fail(format!(
                "motorcycle width {} exceeds corridor width {}",
                self.motorcycle_width, self.corridor_width
            ));
        }
        if self.max_steps == 0 {
            return fail("max_steps must be positive".into());
        }
        if self.spawn_attempts == 0 {
            return fail("spawn_attempts must be positive".into());
        }
        Ok(())
    }
}
