//! Planar geometry in projected meters.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Point<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    /// Euclidean distance in meters.
    pub fn distance_m(&self, other: &Point<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_km(&self, other: &Point<T>) -> T {
        self.distance_m(other) / T::lit(1000.0)
    }
}

/// Axis-aligned rectangle, closed on every side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Rect<T = f64> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(min_x: T, min_y: T, max_x: T, max_y: T) -> Self {
        Rect { min_x, min_y, max_x, max_y }
    }

    pub fn width(&self) -> T {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> T {
        self.max_y - self.min_y
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.width() > T::zero() && self.height() > T::zero())
            || !self.width().is_finite()
            || !self.height().is_finite()
    }
}

/// Travel time in minutes over `km` at `speed_kmh`.
pub fn minutes_at<T: Scalar>(km: T, speed_kmh: T) -> T {
    km / speed_kmh * T::lit(60.0)
}
