//! Post-processing of layout predictions into ordered page chunks:
//! confidence filtering, reading-order estimation, crop planning, the
//! whole-page fallback, and granularity statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clamp_raw, BBox, PageGeom};
use crate::layout::{BoxCategory, LayoutBox, LayoutPrediction};

/// Confidence threshold used when none is given.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.4;

/// Containment ratio above which a box counts as duplicated by another.
pub const CONTAINMENT_SUPPRESSION_RATIO: f64 = 0.95;

/// A crop region on a page with its rank in the page's reading order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub page_id: String,
    pub bbox: BBox,
    pub category: BoxCategory,
    pub order_index: usize,
    pub confidence: f64,
}

impl Chunk {
    /// Crop image file name for this chunk.
    pub fn crop_file_name(&self) -> String {
        format!("{}__{}.png", self.page_id, self.order_index)
    }
}

/// A box dropped during crop planning, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropWarning {
    pub page_id: String,
    pub box_index: usize,
    pub reason: String,
}

/// Corpus-level chunk granularity summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularityStats {
    /// Mean number of chunks per page.
    pub chunks_per_image: f64,
    /// Mean over all chunks of (chunk area / page area), as a percentage.
    pub relative_chunk_size_pct: f64,
    pub n_pages: usize,
}

/// Keep boxes with confidence at or above `threshold`, preserving order.
pub fn filter_confidence(pred: &LayoutPrediction, threshold: f64) -> LayoutPrediction {
    LayoutPrediction {
        page: pred.page.clone(),
        boxes: pred
            .boxes
            .iter()
            .filter(|b| b.confidence >= threshold)
            .cloned()
            .collect(),
    }
}

/// Sort boxes into reading order: by the y-coordinate of the upper-left
/// corner, then by the x-coordinate. The sort is stable, so boxes with equal
/// corners keep their input order. All categories participate.
pub fn reading_order(boxes: &[LayoutBox]) -> Vec<LayoutBox> {
    let mut out = boxes.to_vec();
    out.sort_by(|a, b| {
        a.bbox
            .y0
            .total_cmp(&b.bbox.y0)
            .then(a.bbox.x0.total_cmp(&b.bbox.x0))
    });
    out
}

/// Options for [`plan_crops`].
#[derive(Debug, Clone, Copy)]
pub struct CropOptions {
    /// Pixels added on every side of each box before clamping.
    pub padding_px: f64,
    /// Drop boxes that are almost entirely contained in another box.
    pub suppress_contained: bool,
}

impl Default for CropOptions {
    fn default() -> Self {
        CropOptions {
            padding_px: 0.0,
            suppress_contained: false,
        }
    }
}

/// Turn a page's boxes into ordered chunks.
///
/// Each box is padded, clamped to the page, and ranked by [`reading_order`].
/// Boxes that end up with no area on the page are dropped with a warning
/// rather than failing the page.
pub fn plan_crops(pred: &LayoutPrediction, opts: CropOptions) -> (Vec<Chunk>, Vec<CropWarning>) {
    let mut warnings = Vec::new();
    let mut survivors: Vec<LayoutBox> = Vec::with_capacity(pred.boxes.len());

    let boxes: Vec<LayoutBox> = if opts.suppress_contained {
        let (kept, suppressed) = suppress_contained(&pred.boxes, CONTAINMENT_SUPPRESSION_RATIO);
        for idx in suppressed {
            warnings.push(CropWarning {
                page_id: pred.page.page_id.clone(),
                box_index: idx,
                reason: format!(
                    "box is >= {:.0}% contained in another box",
                    CONTAINMENT_SUPPRESSION_RATIO * 100.0
                ),
            });
        }
        kept
    } else {
        pred.boxes.clone()
    };

    for (i, b) in boxes.iter().enumerate() {
        let (x0, y0, x1, y1) = b.bbox.padded(opts.padding_px);
        match clamp_raw(x0, y0, x1, y1, &pred.page) {
            Ok(bbox) => survivors.push(LayoutBox { bbox, ..b.clone() }),
            Err(e) => warnings.push(CropWarning {
                page_id: pred.page.page_id.clone(),
                box_index: i,
                reason: e.to_string(),
            }),
        }
    }

    let ordered = reading_order(&survivors);
    let chunks = ordered
        .into_iter()
        .enumerate()
        .map(|(rank, b)| Chunk {
            chunk_id: format!("{}__{}", pred.page.page_id, rank),
            page_id: pred.page.page_id.clone(),
            bbox: b.bbox,
            category: b.category,
            order_index: rank,
            confidence: b.confidence,
        })
        .collect();
    (chunks, warnings)
}

/// Indices of boxes whose area is at least `ratio` inside some other kept
/// box. Larger boxes win; among equals, earlier input order wins.
fn suppress_contained(boxes: &[LayoutBox], ratio: f64) -> (Vec<LayoutBox>, Vec<usize>) {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        boxes[b]
            .bbox
            .area()
            .total_cmp(&boxes[a].bbox.area())
            .then(a.cmp(&b))
    });
    let mut kept_idx: Vec<usize> = Vec::new();
    let mut suppressed: Vec<usize> = Vec::new();
    for &i in &order {
        let area = boxes[i].bbox.area();
        let contained = kept_idx.iter().any(|&k| {
            boxes[i].bbox.intersection_area(&boxes[k].bbox) >= ratio * area
        });
        if contained {
            suppressed.push(i);
        } else {
            kept_idx.push(i);
        }
    }
    kept_idx.sort_unstable();
    suppressed.sort_unstable();
    let kept = kept_idx.iter().map(|&i| boxes[i].clone()).collect();
    (kept, suppressed)
}

/// The "no chunking" baseline: one chunk spanning the whole page.
pub fn whole_page_chunk(page: &PageGeom) -> Vec<Chunk> {
    vec![Chunk {
        chunk_id: format!("{}__0", page.page_id),
        page_id: page.page_id.clone(),
        bbox: page.full_box(),
        category: BoxCategory::SemanticBox,
        order_index: 0,
        confidence: 1.0,
    }]
}

/// Which chunks enter granularity statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GranularityScope {
    /// Semantic and global boxes alike (default).
    #[default]
    AllBoxes,
    /// Semantic boxes only.
    SemanticOnly,
}

/// Mean chunks per page and mean relative chunk size across a corpus.
///
/// The relative size averages (chunk area / page area) over every chunk in
/// scope, pooled across pages, and is reported as a percentage.
pub fn granularity_stats(
    chunk_sets: &[(PageGeom, Vec<Chunk>)],
    scope: GranularityScope,
) -> Result<GranularityStats> {
    if chunk_sets.is_empty() {
        return Err(Error::EmptyCorpus("no pages for granularity statistics"));
    }
    let mut total_chunks = 0usize;
    let mut ratio_sum = 0.0f64;
    for (page, chunks) in chunk_sets {
        let page_area = page.area();
        for c in chunks {
            if scope == GranularityScope::SemanticOnly && c.category.is_global() {
                continue;
            }
            total_chunks += 1;
            ratio_sum += c.bbox.area() / page_area;
        }
    }
    let n_pages = chunk_sets.len();
    let relative = if total_chunks == 0 {
        0.0
    } else {
        ratio_sum / total_chunks as f64 * 100.0
    };
    Ok(GranularityStats {
        chunks_per_image: total_chunks as f64 / n_pages as f64,
        relative_chunk_size_pct: relative,
        n_pages,
    })
}
