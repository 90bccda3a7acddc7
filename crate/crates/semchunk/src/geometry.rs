//! Rectangle arithmetic on page coordinates.
//!
//! Boxes use pixel coordinates with the origin at the top-left corner and y
//! increasing downward. A box covers the half-open region `[x0,x1) x [y0,y1)`,
//! so abutting boxes have zero intersection and integer-grid oracles are
//! exact. Areas are in px².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle with strictly positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    /// Build a box, rejecting zero-area, non-finite, or negative coordinates.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let b = BBox { x0, y0, x1, y1 };
        b.validate()?;
        Ok(b)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let coords = [self.x0, self.y0, self.x1, self.y1];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "box coordinates must be finite, got ({},{},{},{})",
                self.x0, self.y0, self.x1, self.y1
            )));
        }
        if coords.iter().any(|&c| c < 0.0) {
            return Err(Error::InvalidInput(format!(
                "box coordinates must be >= 0, got ({},{},{},{})",
                self.x0, self.y0, self.x1, self.y1
            )));
        }
        if self.x0 >= self.x1 || self.y0 >= self.y1 {
            return Err(Error::InvalidInput(format!(
                "box must have positive area, got ({},{},{},{})",
                self.x0, self.y0, self.x1, self.y1
            )));
        }
        Ok(())
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

    /// Intersection area with another box; 0 when disjoint.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let h = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        w * h
    }

    /// Intersection rectangle, if it has positive area.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        if x0 < x1 && y0 < y1 {
            Some(BBox { x0, y0, x1, y1 })
        } else {
            None
        }
    }

    /// Expand by `padding` px on every side. Negative origins are allowed in
    /// the intermediate value; callers clamp to the page afterwards.
    pub(crate) fn padded(&self, padding: f64) -> (f64, f64, f64, f64) {
        (
            self.x0 - padding,
            self.y0 - padding,
            self.x1 + padding,
            self.y1 + padding,
        )
    }
}

/// Page dimensions plus its identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageGeom {
    pub page_id: String,
    pub width: u32,
    pub height: u32,
}

impl PageGeom {
    pub fn new(page_id: impl Into<String>, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "page dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(PageGeom {
            page_id: page_id.into(),
            width,
            height,
        })
    }

    pub fn area(&self) -> f64 {
        f64::from(self.width) * f64::from(self.height)
    }

    /// The box covering the whole page.
    pub fn full_box(&self) -> BBox {
        BBox {
            x0: 0.0,
            y0: 0.0,
            x1: f64::from(self.width),
            y1: f64::from(self.height),
        }
    }
}

/// Intersection over union of two boxes; 0 when disjoint, symmetric,
/// 1 for identical boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Exact area of the union of a set of boxes via coordinate-compressed
/// vertical strips. Empty input yields 0.
pub fn union_area(boxes: &[BBox]) -> f64 {
    if boxes.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = boxes.iter().flat_map(|b| [b.x0, b.x1]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut total = 0.0;
    for win in xs.windows(2) {
        let (x_lo, x_hi) = (win[0], win[1]);
        let strip_w = x_hi - x_lo;
        if strip_w <= 0.0 {
            continue;
        }
        // y-intervals of boxes spanning this strip, merged.
        let mut intervals: Vec<(f64, f64)> = boxes
            .iter()
            .filter(|b| b.x0 <= x_lo && b.x1 >= x_hi)
            .map(|b| (b.y0, b.y1))
            .collect();
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut covered = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for (y0, y1) in intervals {
            match cur {
                None => cur = Some((y0, y1)),
                Some((lo, hi)) if y0 <= hi => cur = Some((lo, hi.max(y1))),
                Some((lo, hi)) => {
                    covered += hi - lo;
                    cur = Some((y0, y1));
                }
            }
        }
        if let Some((lo, hi)) = cur {
            covered += hi - lo;
        }
        total += strip_w * covered;
    }
    total
}

/// Clip a box to the page region `[0,width) x [0,height)`.
///
/// Returns [`Error::DegenerateClamp`] when nothing of the box remains on the
/// page.
pub fn clamp(bbox: &BBox, page: &PageGeom) -> Result<BBox> {
    clamp_raw(bbox.x0, bbox.y0, bbox.x1, bbox.y1, page)
}

/// Clip raw corner coordinates (which may be negative, e.g. after padding)
/// to the page region.
pub(crate) fn clamp_raw(x0: f64, y0: f64, x1: f64, y1: f64, page: &PageGeom) -> Result<BBox> {
    let cx0 = x0.max(0.0);
    let cy0 = y0.max(0.0);
    let cx1 = x1.min(f64::from(page.width));
    let cy1 = y1.min(f64::from(page.height));
    if cx0 < cx1 && cy0 < cy1 {
        Ok(BBox {
            x0: cx0,
            y0: cy0,
            x1: cx1,
            y1: cy1,
        })
    } else {
        Err(Error::DegenerateClamp {
            x0,
            y0,
            x1,
            y1,
            width: page.width,
            height: page.height,
        })
    }
}
