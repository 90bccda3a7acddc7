//! Semantic-layout annotation files.
//!
//! Schema: a JSON array of pages (a single page object is also accepted):
//! `{page_id, width, height, image_uri, boxes: [{x0,y0,x1,y1,category}]}`.
//! Annotation boxes carry confidence 1.0. Annotated rectangles are expected
//! not to overlap; overlaps load fine but are reported as warnings, since
//! predicted layouts flow through the same type and may legitimately overlap.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, PageGeom};
use crate::layout::{BoxCategory, LayoutBox};

use super::{json_error, read_utf8, Diagnostic, Loaded};

/// One annotated page.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationDoc {
    pub page: PageGeom,
    pub image_uri: String,
    pub boxes: Vec<LayoutBox>,
}

#[derive(Serialize, Deserialize)]
struct RawDoc {
    page_id: String,
    width: u32,
    height: u32,
    image_uri: String,
    boxes: Vec<RawBox>,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    category: String,
}

pub fn load_annotations(path: &Path) -> Result<Loaded<Vec<AnnotationDoc>>> {
    let text = read_utf8(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| json_error(path, None, &e))?;
    let raws: Vec<RawDoc> = if value.is_array() {
        serde_json::from_value(value).map_err(|e| json_error(path, None, &e))?
    } else {
        vec![serde_json::from_value(value).map_err(|e| json_error(path, None, &e))?]
    };

    let mut docs = Vec::with_capacity(raws.len());
    let mut warnings = Vec::new();
    for raw in raws {
        let page = PageGeom::new(raw.page_id.clone(), raw.width, raw.height)?;
        let mut boxes = Vec::with_capacity(raw.boxes.len());
        for (i, rb) in raw.boxes.iter().enumerate() {
            let bbox = BBox::new(rb.x0, rb.y0, rb.x1, rb.y1).map_err(|e| Error::Geometry {
                context: format!("page {}, box {}", raw.page_id, i),
                msg: e.to_string(),
            })?;
            let category = BoxCategory::parse(&rb.category).ok_or_else(|| Error::Category {
                context: format!("page {}, box {}", raw.page_id, i),
                label: rb.category.clone(),
            })?;
            boxes.push(LayoutBox::ground_truth(bbox, category));
        }
        // non-overlap constraint on annotations
        for i in 0..boxes.len() {
            for j in (i + 1)..boxes.len() {
                let inter = boxes[i].bbox.intersection_area(&boxes[j].bbox);
                if inter > 0.0 {
                    warnings.push(Diagnostic::new(
                        format!("page {}, boxes {}/{}", raw.page_id, i, j),
                        format!(
                            "annotation rectangles must not overlap; intersection is {inter} px²"
                        ),
                    ));
                }
            }
        }
        docs.push(AnnotationDoc {
            page,
            image_uri: raw.image_uri,
            boxes,
        });
    }
    Ok(Loaded {
        value: docs,
        warnings,
    })
}

/// Write annotation docs in canonical form (always a JSON array).
pub fn write_annotations(path: &Path, docs: &[AnnotationDoc]) -> Result<()> {
    let raws: Vec<RawDoc> = docs
        .iter()
        .map(|d| RawDoc {
            page_id: d.page.page_id.clone(),
            width: d.page.width,
            height: d.page.height,
            image_uri: d.image_uri.clone(),
            boxes: d
                .boxes
                .iter()
                .map(|b| RawBox {
                    x0: b.bbox.x0,
                    y0: b.bbox.y0,
                    x1: b.bbox.x1,
                    y1: b.bbox.y1,
                    category: b.category.as_str().to_string(),
                })
                .collect(),
        })
        .collect();
    super::write_canonical_json(path, &raws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_tmp(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.json");
        fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn minimal_doc_loads_clean() {
        let (_d, path) = write_tmp(
            r#"{"page_id":"p1","width":100,"height":100,"image_uri":"p1.png",
                "boxes":[{"x0":0,"y0":0,"x1":50,"y1":50,"category":"semantic_box"}]}"#,
        );
        let loaded = load_annotations(&path).unwrap();
        assert_eq!(loaded.value.len(), 1);
        assert!(loaded.warnings.is_empty());
        assert_eq!(loaded.value[0].boxes[0].confidence, 1.0);
    }

    #[test]
    fn degenerate_box_is_an_error_with_context() {
        let (_d, path) = write_tmp(
            r#"{"page_id":"p1","width":100,"height":100,"image_uri":"p1.png",
                "boxes":[{"x0":10,"y0":0,"x1":10,"y1":50,"category":"semantic_box"}]}"#,
        );
        let err = load_annotations(&path).unwrap_err();
        match err {
            Error::Geometry { context, .. } => {
                assert!(context.contains("p1"));
                assert!(context.contains("box 0"));
            }
            other => panic!("expected Geometry error, got {other}"),
        }
    }

    #[test]
    fn overlap_is_a_warning_not_an_error() {
        let (_d, path) = write_tmp(
            r#"{"page_id":"p1","width":100,"height":100,"image_uri":"p1.png","boxes":[
                {"x0":0,"y0":0,"x1":50,"y1":50,"category":"semantic_box"},
                {"x0":40,"y0":40,"x1":80,"y1":80,"category":"semantic_box"}]}"#,
        );
        let loaded = load_annotations(&path).unwrap();
        assert_eq!(loaded.value[0].boxes.len(), 2);
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].message.contains("must not overlap"));
    }

    #[test]
    fn unknown_category_is_rejected() {
        let (_d, path) = write_tmp(
            r#"{"page_id":"p1","width":100,"height":100,"image_uri":"p1.png",
                "boxes":[{"x0":0,"y0":0,"x1":50,"y1":50,"category":"figure"}]}"#,
        );
        assert!(matches!(
            load_annotations(&path).unwrap_err(),
            Error::Category { .. }
        ));
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let (_d, path) = write_tmp(
            r#"[{"page_id":"p1","width":100,"height":200,"image_uri":"p1.png",
                "boxes":[{"x0":0.25,"y0":0,"x1":50.5,"y1":50,"category":"title"}]}]"#,
        );
        let docs = load_annotations(&path).unwrap().value;
        let out1 = path.with_extension("out1.json");
        write_annotations(&out1, &docs).unwrap();
        let docs2 = load_annotations(&out1).unwrap().value;
        let out2 = path.with_extension("out2.json");
        write_annotations(&out2, &docs2).unwrap();
        assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());
    }
}
