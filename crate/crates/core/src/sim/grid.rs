//! Ego-centric occupancy grid.
//!
//! Columns cover the ego lane and two lanes on each side (column 2 is the ego
//! lane). Rows are one-meter bins over `[-50, 50)` meters relative to the ego
//! center, row 0 being the rearmost. A cell holds the normalized speed of any
//! vehicle whose footprint overlaps it with positive area (the maximum when
//! several do), 0 when free, and -1 when the column lies off the road.

use serde::{Deserialize, Serialize};

use super::SimState;

pub const GRID_COLS: usize = 5;
pub const GRID_ROWS: usize = 100;
pub const GRID_LEN: usize = GRID_COLS * GRID_ROWS;
pub const OFF_ROAD: f32 = -1.0;

const LANES_EACH_SIDE: isize = 2;
const HALF_SPAN: f64 = 50.0;

/// Dense grid stored column-major: `values[col * GRID_ROWS + row]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    values: Vec<f32>,
}

impl Default for OccupancyGrid {
    fn default() -> Self {
        Self {
            values: vec![0.0; GRID_LEN],
        }
    }
}

impl OccupancyGrid {
    pub fn from_values(values: Vec<f32>) -> Option<Self> {
        (values.len() == GRID_LEN).then_some(Self { values })
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.values[col * GRID_ROWS + row]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.values
    }

    /// Lower edge (meters, ego frame) of the bin covered by `row`.
    pub fn row_lower_edge(row: usize) -> f64 {
        row as f64 - HALF_SPAN
    }

    /// Road lane shown in `col` for an ego in `ego_lane`, if it exists.
    pub fn column_lane(ego_lane: usize, col: usize, n_lanes: usize) -> Option<usize> {
        let lane = ego_lane as isize + col as isize - LANES_EACH_SIDE;
        (0..n_lanes as isize).contains(&lane).then_some(lane as usize)
    }
}

pub fn observe(state: &SimState) -> OccupancyGrid {
    let cfg = &state.config;
    let lane_width = cfg.lane_width();
    let limit = cfg.speed_limit();
    let mut grid = OccupancyGrid::default();

    let mut lanes = [None; GRID_COLS];
    for (col, slot) in lanes.iter_mut().enumerate() {
        *slot = OccupancyGrid::column_lane(state.ego.lane, col, cfg.n_lanes);
        if slot.is_none() {
            grid.values[col * GRID_ROWS..(col + 1) * GRID_ROWS].fill(OFF_ROAD);
        }
    }

    for v in std::iter::once(&state.ego).chain(&state.others) {
        let r = v.rect(cfg);
        if r.y_max <= -HALF_SPAN || r.y_min >= HALF_SPAN {
            continue;
        }
        let value = (v.speed / limit) as f32;
        // Candidate rows from the bin arithmetic, widened by one on each side
        // and confirmed with exact edge comparisons.
        let lo = ((r.y_min + HALF_SPAN).floor() as isize - 1).max(0) as usize;
        let hi = ((r.y_max + HALF_SPAN).ceil() as isize + 1).min(GRID_ROWS as isize) as usize;
        for (col, lane) in lanes.iter().enumerate() {
            let Some(lane) = *lane else { continue };
            let lane_lo = lane as f64 * lane_width;
            let lane_hi = (lane + 1) as f64 * lane_width;
            if !(r.x_min < lane_hi && lane_lo < r.x_max) {
                continue;
            }
            for row in lo..hi {
                let bin_lo = OccupancyGrid::row_lower_edge(row);
                if r.y_min < bin_lo + 1.0 && bin_lo < r.y_max {
                    let cell = &mut grid.values[col * GRID_ROWS + row];
                    *cell = cell.max(value);
                }
            }
        }
    }
    grid
}

/// Lossless run-length form of an [`OccupancyGrid`] for the replay buffer.
/// Zero cells are implicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactGrid {
    runs: Vec<Run>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Run {
    start: u16,
    len: u16,
    value: f32,
}

impl Run {
    fn fill<F: From<f32> + Copy>(&self, out: &mut [F]) {
        let start = self.start as usize;
        out[start..start + self.len as usize].fill(F::from(self.value));
    }
}

/// Writes the dense grid described by `runs` into `out`.
pub(crate) fn expand_runs<'a, F: From<f32> + Copy>(runs: impl IntoIterator<Item = &'a Run>, out: &mut [F]) {
    out.fill(F::from(0.0));
    for run in runs {
        run.fill(out);
    }
}

impl CompactGrid {
    pub fn from_values(values: &[f32]) -> Self {
        let mut runs = Vec::new();
        for col in 0..GRID_COLS {
            let column = &values[col * GRID_ROWS..(col + 1) * GRID_ROWS];
            let mut row = 0;
            while row < GRID_ROWS {
                let value = column[row];
                let mut end = row + 1;
                while end < GRID_ROWS && column[end].to_bits() == value.to_bits() {
                    end += 1;
                }
                if value.to_bits() != 0f32.to_bits() {
                    runs.push(Run {
                        start: (col * GRID_ROWS + row) as u16,
                        len: (end - row) as u16,
                        value,
                    });
                }
                row = end;
            }
        }
        Self { runs }
    }

    /// Writes the dense grid into `out`, which must hold [`GRID_LEN`] values.
    pub fn expand_into<F: From<f32> + Copy>(&self, out: &mut [F]) {
        expand_runs(&self.runs, out);
    }

    pub(crate) fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub(crate) fn from_runs(runs: Vec<Run>) -> Self {
        Self { runs }
    }

    pub fn to_grid(&self) -> OccupancyGrid {
        let mut values = vec![0.0f32; GRID_LEN];
        self.expand_into(&mut values);
        OccupancyGrid { values }
    }
}

impl From<&OccupancyGrid> for CompactGrid {
    fn from(grid: &OccupancyGrid) -> Self {
        CompactGrid::from_values(&grid.values)
    }
}
