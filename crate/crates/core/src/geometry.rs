//! Points and axis-aligned boxes in pixel space.
//!
//! Coordinates are continuous: pixel `(x, y)` covers `[x, x+1) × [y, y+1)`.

use serde::{Deserialize, Serialize};

/// Integer pixel location, `x` along the width and `y` along the height.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub x: i64,
    pub y: i64,
}

impl Pixel {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

/// Which coordinate frame a box is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Layer frame of pyramid level `n` (1-based), coordinates in `[0, l1]`.
    Layer(u32),
    Image,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub frame: Frame,
}

impl BBox {
    /// Builds a box, reordering corners so that `x0 <= x1` and `y0 <= y1`.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64, frame: Frame) -> Self {
        Self {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
            frame,
        }
    }

    pub fn image(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(x0, y0, x1, y1, Frame::Image)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    /// Area of the intersection with `other`; zero when they only touch.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Intersection box, or `None` when the overlap has zero area.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            frame: self.frame,
        };
        (b.x1 > b.x0 && b.y1 > b.y0).then_some(b)
    }

    /// Inclusive point test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// Clamps the box into `[0, width] × [0, height]`. Returns the clamped box and
    /// whether any coordinate moved.
    pub fn clip(&self, width: f64, height: f64) -> (BBox, bool) {
        let c = BBox {
            x0: self.x0.clamp(0.0, width),
            y0: self.y0.clamp(0.0, height),
            x1: self.x1.clamp(0.0, width),
            y1: self.y1.clamp(0.0, height),
            frame: self.frame,
        };
        let moved = c.as_array() != self.as_array();
        (c, moved)
    }
}
