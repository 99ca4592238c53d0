//! Pixel rectangles and normalized screen coordinates.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Absolute pixel rectangle. Valid rectangles satisfy `left < right` and
/// `top < bottom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl Rect {
    pub fn new(left: u32, top: u32, right: u32, bottom: u32) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.left < self.right && self.top < self.bottom
    }

    /// Geometric centroid in pixel space.
    pub fn centroid(&self) -> (f64, f64) {
        (
            (self.left as f64 + self.right as f64) / 2.0,
            (self.top as f64 + self.bottom as f64) / 2.0,
        )
    }

    /// Centroid normalized by the screen size into `[0,1]^2`.
    pub fn normalized_centroid(&self, pixel_size: (u32, u32)) -> Point {
        let (cx, cy) = self.centroid();
        Point::clamped(
            cx / pixel_size.0.max(1) as f64,
            cy / pixel_size.1.max(1) as f64,
        )
    }

    /// True when the rectangle has any overlap with the `(width, height)`
    /// viewport anchored at the origin.
    pub fn intersects_viewport(&self, pixel_size: (u32, u32)) -> bool {
        self.left < pixel_size.0 && self.top < pixel_size.1
    }
}

// Serialized as the compact `[left, top, right, bottom]` form used by the
// world-spec files.
impl Serialize for Rect {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.left, self.top, self.right, self.bottom].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Rect {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = <[u32; 4]>::deserialize(deserializer)?;
        let rect = Rect::new(raw[0], raw[1], raw[2], raw[3]);
        if !rect.is_valid() {
            return Err(D::Error::custom(format!(
                "invalid bounds [{}, {}, {}, {}]: left < right and top < bottom required",
                raw[0], raw[1], raw[2], raw[3]
            )));
        }
        Ok(rect)
    }
}

/// Point in normalized `[0,1]^2` screen coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    /// Builds a point, clamping both coordinates into `[0,1]`.
    pub fn clamped(x: f64, y: f64) -> Self {
        Self {
            x: x.clamp(0.0, 1.0),
            y: y.clamp(0.0, 1.0),
        }
    }

    pub fn needs_clamp(x: f64, y: f64) -> bool {
        !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y)
    }

    /// Squared Euclidean distance.
    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}
