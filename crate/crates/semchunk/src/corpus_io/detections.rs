//! External detector outputs.
//!
//! Two input shapes are accepted:
//! - native JSON Lines, one detection per line:
//!   `{page_id, x0, y0, x1, y1, category, confidence}`
//! - a COCO results array: `[{image_id, bbox: [x,y,w,h], category_id, score}]`
//!   (x,y,w,h converts to corner form; `category_id` becomes the stringified
//!   label, so a label map for COCO input keys on `"0"`, `"1"`, ...).
//!
//! Labels are free-form strings until a [`LabelMap`] resolves them to
//! canonical categories.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, PageGeom};
use crate::layout::{BoxCategory, LayoutBox, LayoutPrediction};

use super::{json_error, read_utf8, Loaded};

/// One raw detection before category mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub label: String,
    pub confidence: f64,
}

/// All detections for one page, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionDoc {
    pub page_id: String,
    pub detections: Vec<Detection>,
}

/// Maps detector label strings to canonical categories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelMap(pub BTreeMap<String, BoxCategory>);

impl LabelMap {
    /// Identity map over the six canonical category names.
    pub fn identity() -> Self {
        LabelMap(
            BoxCategory::ALL
                .iter()
                .map(|c| (c.as_str().to_string(), *c))
                .collect(),
        )
    }

    pub fn resolve(&self, label: &str, page_id: &str) -> Result<BoxCategory> {
        self.0
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnmappedLabel {
                page_id: page_id.to_string(),
                label: label.to_string(),
            })
    }
}

/// Load a label map file: a JSON object of `{"detector label": "category"}`.
pub fn load_label_map(path: &Path) -> Result<LabelMap> {
    let text = read_utf8(path)?;
    let raw: BTreeMap<String, String> =
        serde_json::from_str(&text).map_err(|e| json_error(path, None, &e))?;
    let mut map = BTreeMap::new();
    for (label, cat) in raw {
        let category = BoxCategory::parse(&cat).ok_or_else(|| Error::Category {
            context: format!("label map entry `{label}`"),
            label: cat.clone(),
        })?;
        map.insert(label, category);
    }
    Ok(LabelMap(map))
}

#[derive(Serialize, Deserialize)]
struct NativeLine {
    page_id: String,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    category: String,
    confidence: f64,
}

#[derive(Deserialize)]
struct CocoResult {
    image_id: serde_json::Value,
    bbox: [f64; 4],
    category_id: i64,
    score: f64,
}

/// Load detections from either supported shape, grouping lines by page in
/// first-appearance order. Confidences outside [0,1] and degenerate boxes
/// are errors, not warnings: they indicate a broken detector export.
pub fn load_detections(path: &Path) -> Result<Loaded<Vec<DetectionDoc>>> {
    let text = read_utf8(path)?;
    let trimmed = text.trim_start();
    let mut pages: Vec<DetectionDoc> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();

    let mut push = |page_id: String, det: Detection| {
        if let Some(&i) = index.get(&page_id) {
            pages[i].detections.push(det);
        } else {
            index.insert(page_id.clone(), pages.len());
            pages.push(DetectionDoc {
                page_id,
                detections: vec![det],
            });
        }
    };

    if trimmed.starts_with('[') {
        // COCO results array
        let results: Vec<CocoResult> =
            serde_json::from_str(&text).map_err(|e| json_error(path, None, &e))?;
        for (i, r) in results.into_iter().enumerate() {
            let page_id = match &r.image_id {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            let [x, y, w, h] = r.bbox;
            let bbox = BBox::new(x, y, x + w, y + h).map_err(|e| Error::Geometry {
                context: format!("page {page_id}, result {i}"),
                msg: e.to_string(),
            })?;
            let confidence = check_confidence(path, r.score, &page_id)?;
            push(
                page_id,
                Detection {
                    bbox,
                    label: r.category_id.to_string(),
                    confidence,
                },
            );
        }
    } else {
        super::for_each_jsonl_line(path, |line_no, line| {
            let raw: NativeLine =
                serde_json::from_str(line).map_err(|e| json_error(path, Some(line_no), &e))?;
            let bbox = BBox::new(raw.x0, raw.y0, raw.x1, raw.y1).map_err(|e| Error::Geometry {
                context: format!("page {}, line {}", raw.page_id, line_no),
                msg: e.to_string(),
            })?;
            let confidence = check_confidence(path, raw.confidence, &raw.page_id)?;
            push(
                raw.page_id,
                Detection {
                    bbox,
                    label: raw.category,
                    confidence,
                },
            );
            Ok(())
        })?;
    }

    Ok(Loaded {
        value: pages,
        warnings: Vec::new(),
    })
}

fn check_confidence(path: &Path, value: f64, page_id: &str) -> Result<f64> {
    if (0.0..=1.0).contains(&value) && !value.is_nan() {
        Ok(value)
    } else {
        Err(Error::Parse {
            path: path.to_path_buf(),
            line: None,
            msg: format!("confidence {value} out of [0,1] on page {page_id}"),
        })
    }
}

/// Resolve a detection doc against a page geometry and label map.
pub fn to_layout_prediction(
    doc: &DetectionDoc,
    page: &PageGeom,
    label_map: &LabelMap,
) -> Result<LayoutPrediction> {
    let mut boxes = Vec::with_capacity(doc.detections.len());
    for det in &doc.detections {
        let category = label_map.resolve(&det.label, &doc.page_id)?;
        boxes.push(LayoutBox::new(det.bbox, category, det.confidence)?);
    }
    Ok(LayoutPrediction::new(page.clone(), boxes))
}

/// Write detections in the native JSON Lines shape.
pub fn write_detections(path: &Path, docs: &[DetectionDoc]) -> Result<()> {
    let lines: Vec<NativeLine> = docs
        .iter()
        .flat_map(|d| {
            d.detections.iter().map(|det| NativeLine {
                page_id: d.page_id.clone(),
                x0: det.bbox.x0,
                y0: det.bbox.y0,
                x1: det.bbox.x1,
                y1: det.bbox.y1,
                category: det.label.clone(),
                confidence: det.confidence,
            })
        })
        .collect();
    super::write_jsonl(path, &lines)
}
