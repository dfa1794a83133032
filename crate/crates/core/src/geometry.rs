//! Axis-aligned boxes in pixel coordinates (origin top-left) and the two
//! pairwise measures the rest of the crate builds on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for BoundingBox {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

impl BoundingBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Checks finiteness and corner ordering. Zero-area boxes pass.
    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite()) && self.x1 <= self.x2 && self.y1 <= self.y2
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) * 0.5, (self.y1 + self.y2) * 0.5)
    }

    /// Errors unless the box has strictly positive area.
    pub fn require_positive_area(&self) -> Result<()> {
        if self.area() > 0.0 {
            Ok(())
        } else {
            Err(Error::DegenerateBox(self.to_array()))
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    /// Scales the box about the point `(cx, cy)` by the positive factor `s`.
    pub fn scale_about(&self, cx: f64, cy: f64, s: f64) -> Self {
        Self::new(
            cx + (self.x1 - cx) * s,
            cy + (self.y1 - cy) * s,
            cx + (self.x2 - cx) * s,
            cy + (self.y2 - cy) * s,
        )
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }
}

/// Intersection over union; 0 for disjoint or degenerate pairs.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Chebyshev gap between two rectangles: the larger of the per-axis gaps,
/// 0 when the boxes touch or overlap.
pub fn edge_gap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let gap_x = (a.x1.max(b.x1) - a.x2.min(b.x2)).max(0.0);
    let gap_y = (a.y1.max(b.y1) - a.y2.min(b.y2)).max(0.0);
    gap_x.max(gap_y)
}
