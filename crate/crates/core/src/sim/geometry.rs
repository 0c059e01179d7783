//! Axis-aligned rectangle tests for vehicle footprints.
//!
//! `x` is lateral (0 at the left road edge, growing to the right) and `y` is
//! longitudinal relative to the ego center (positive ahead).

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn centered(x: f64, y: f64, width: f64, length: f64) -> Self {
        Self {
            x_min: x - width / 2.0,
            x_max: x + width / 2.0,
            y_min: y - length / 2.0,
            y_max: y + length / 2.0,
        }
    }

    /// Open-interval overlap on the lateral axis; touching edges do not count.
    pub fn overlaps_laterally(&self, other: &Rect) -> bool {
        self.x_min < other.x_max && other.x_min < self.x_max
    }

    pub fn overlaps_longitudinally(&self, other: &Rect) -> bool {
        self.y_min < other.y_max && other.y_min < self.y_max
    }

    /// Positive-area intersection. Symmetric in its arguments.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.overlaps_laterally(other) && self.overlaps_longitudinally(other)
    }

    /// Edge-to-edge longitudinal distance; negative when the y-extents overlap.
    pub fn longitudinal_gap(&self, other: &Rect) -> f64 {
        (other.y_min - self.y_max).max(self.y_min - other.y_max)
    }
}
