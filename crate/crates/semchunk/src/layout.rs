//! Layout domain types shared by detection metrics, chunking, and IO.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clamp, BBox, PageGeom};

/// Box categories: one local kind plus five page-level ("global") kinds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum BoxCategory {
    SemanticBox,
    Title,
    Header,
    Footer,
    Date,
    Author,
}

impl BoxCategory {
    pub const ALL: [BoxCategory; 6] = [
        BoxCategory::SemanticBox,
        BoxCategory::Title,
        BoxCategory::Header,
        BoxCategory::Footer,
        BoxCategory::Date,
        BoxCategory::Author,
    ];

    /// Global boxes carry page-level metadata; semantic boxes are local.
    pub fn is_global(self) -> bool {
        !matches!(self, BoxCategory::SemanticBox)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoxCategory::SemanticBox => "semantic_box",
            BoxCategory::Title => "title",
            BoxCategory::Header => "header",
            BoxCategory::Footer => "footer",
            BoxCategory::Date => "date",
            BoxCategory::Author => "author",
        }
    }

    pub fn parse(label: &str) -> Option<BoxCategory> {
        match label {
            "semantic_box" => Some(BoxCategory::SemanticBox),
            "title" => Some(BoxCategory::Title),
            "header" => Some(BoxCategory::Header),
            "footer" => Some(BoxCategory::Footer),
            "date" => Some(BoxCategory::Date),
            "author" => Some(BoxCategory::Author),
            _ => None,
        }
    }
}

/// A categorized rectangle with a detector confidence.
/// Ground-truth annotations carry confidence 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutBox {
    pub bbox: BBox,
    pub category: BoxCategory,
    pub confidence: f64,
}

impl LayoutBox {
    pub fn new(bbox: BBox, category: BoxCategory, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) || confidence.is_nan() {
            return Err(Error::InvalidInput(format!(
                "confidence must be in [0,1], got {confidence}"
            )));
        }
        Ok(LayoutBox {
            bbox,
            category,
            confidence,
        })
    }

    /// Ground-truth box (confidence pinned to 1.0).
    pub fn ground_truth(bbox: BBox, category: BoxCategory) -> Self {
        LayoutBox {
            bbox,
            category,
            confidence: 1.0,
        }
    }
}

/// A page's predicted (or annotated) box set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutPrediction {
    pub page: PageGeom,
    pub boxes: Vec<LayoutBox>,
}

impl LayoutPrediction {
    pub fn new(page: PageGeom, boxes: Vec<LayoutBox>) -> Self {
        LayoutPrediction { page, boxes }
    }

    /// Clip every box to the page; boxes falling entirely outside are
    /// dropped and reported back to the caller by index.
    pub fn clamped(&self) -> (LayoutPrediction, Vec<usize>) {
        let mut kept = Vec::with_capacity(self.boxes.len());
        let mut dropped = Vec::new();
        for (i, b) in self.boxes.iter().enumerate() {
            match clamp(&b.bbox, &self.page) {
                Ok(bbox) => kept.push(LayoutBox { bbox, ..b.clone() }),
                Err(_) => dropped.push(i),
            }
        }
        (
            LayoutPrediction {
                page: self.page.clone(),
                boxes: kept,
            },
            dropped,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_labels_round_trip() {
        for cat in BoxCategory::ALL {
            assert_eq!(BoxCategory::parse(cat.as_str()), Some(cat));
        }
        assert_eq!(BoxCategory::parse("figure"), None);
    }

    #[test]
    fn only_semantic_box_is_local() {
        assert!(!BoxCategory::SemanticBox.is_global());
        for cat in [
            BoxCategory::Title,
            BoxCategory::Header,
            BoxCategory::Footer,
            BoxCategory::Date,
            BoxCategory::Author,
        ] {
            assert!(cat.is_global());
        }
    }

    #[test]
    fn confidence_bounds_enforced() {
        let bbox = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(LayoutBox::new(bbox, BoxCategory::SemanticBox, 1.2).is_err());
        assert!(LayoutBox::new(bbox, BoxCategory::SemanticBox, -0.1).is_err());
        assert!(LayoutBox::new(bbox, BoxCategory::SemanticBox, 0.4).is_ok());
    }
}
