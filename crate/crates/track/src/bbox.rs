use serde::{Deserialize, Serialize};

use crate::error::{Result, TrackError};

/// Axis-aligned box in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BoundingBox { x_min, y_min, x_max, y_max };
        b.validate()?;
        Ok(b)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let vals = [self.x_min, self.y_min, self.x_max, self.y_max];
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(TrackError::usage(format!("bounding box {self:?}: non-finite coordinate")));
        }
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(TrackError::usage(format!(
                "bounding box {self:?}: min must be strictly below max"
            )));
        }
        Ok(())
    }

    /// Center/extent view used by the motion model: (cx, cy, w, h).
    pub fn to_cwh(&self) -> [f64; 4] {
        [
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
            self.x_max - self.x_min,
            self.y_max - self.y_min,
        ]
    }

    pub fn from_cwh(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        BoundingBox::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// Intersection over union; 0 for disjoint boxes, 1 for identical ones.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_boxes_have_unit_iou() {
        let b = BoundingBox::new(1.0, 2.0, 5.0, 7.0).unwrap();
        assert_eq!(iou(&b, &b), 1.0);
    }

    #[test]
    fn disjoint_boxes_have_zero_iou() {
        let a = BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = BoundingBox::new(5.0, 5.0, 6.0, 6.0).unwrap();
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn quarter_overlap_matches_area_arithmetic() {
        // Intersection 25, union 100 + 100 - 25 = 175.
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let b = BoundingBox::new(5.0, 5.0, 15.0, 15.0).unwrap();
        assert!((iou(&a, &b) - 25.0 / 175.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_boxes_are_rejected() {
        assert!(BoundingBox::new(5.0, 0.0, 5.0, 10.0).is_err());
        assert!(BoundingBox::new(0.0, 10.0, 10.0, 2.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn center_extent_roundtrips() {
        let b = BoundingBox::new(3.0, 4.0, 11.0, 10.0).unwrap();
        let [cx, cy, w, h] = b.to_cwh();
        assert_eq!([cx, cy, w, h], [7.0, 7.0, 8.0, 6.0]);
        assert_eq!(BoundingBox::from_cwh(cx, cy, w, h).unwrap(), b);
    }
}
