//! Detection-quality metrics: optimal bipartite matching over IoU, union-area
//! coverage, and confidence-threshold sweeps for model selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, union_area, BBox};
use crate::layout::{LayoutBox, LayoutPrediction};
use crate::par;

/// Default thresholds for confidence sweeps.
pub const DEFAULT_SWEEP_THRESHOLDS: [f64; 4] = [0.2, 0.3, 0.4, 0.5];

/// Tolerance for "same objective" when breaking assignment ties.
const TIE_EPS: f64 = 1e-9;

/// An optimal bipartite assignment: `pairs` are `(row, col)` index pairs,
/// sorted by row, with `|pairs| = min(n_rows, n_cols)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub objective: f64,
}

impl Assignment {
    pub fn empty() -> Self {
        Assignment {
            pairs: Vec::new(),
            objective: 0.0,
        }
    }
}

/// Matching-based IoU over one page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedIoUReport {
    pub score: f64,
    pub pairs: Assignment,
    pub n_pred: usize,
    pub n_gt: usize,
    pub per_pair_iou: Vec<f64>,
}

/// Fraction of ground-truth area overlapped by predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub coverage: f64,
    pub covered_area: f64,
    pub gt_area: f64,
}

/// One row of a confidence-threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub confidence_threshold: f64,
    pub matched_iou: f64,
    pub coverage: f64,
    pub n_boxes_kept: usize,
}

/// How per-page matched-IoU scores are combined into a corpus score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusAggregation {
    /// Unweighted mean of per-page scores (default).
    PerPageMean,
    /// Pool numerators and denominators corpus-wide:
    /// sum of matched IoUs over sum of per-page `max(|P|,|G|)`.
    Pooled,
}

/// Maximum-weight bipartite assignment of size `min(n_rows, n_cols)`.
///
/// Implemented as min-cost assignment on `(max_weight - w)` over a
/// square-padded matrix (padded cells carry the weight-zero cost). Ties on
/// the objective are broken deterministically: among all optimal
/// assignments, the lexicographically smallest pair list is returned.
///
/// Weights must be finite and non-negative; rows must be equal length.
/// An empty matrix (either dimension zero) yields the empty assignment.
pub fn hungarian_max(weights: &[Vec<f64>]) -> Assignment {
    let n_rows = weights.len();
    let n_cols = weights.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 {
        return Assignment::empty();
    }
    for row in weights {
        assert_eq!(row.len(), n_cols, "weight matrix must be rectangular");
        for &w in row {
            assert!(w.is_finite() && w >= 0.0, "weights must be finite and >= 0");
        }
    }

    let target_size = n_rows.min(n_cols);
    let mut avail_cols: Vec<usize> = (0..n_cols).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(target_size);
    // Optimal total over the remaining rows x available cols. Re-anchored to
    // an exactly solved subproblem after every fixed pair, so tolerance does
    // not accumulate across steps.
    let mut remaining = solve_max(weights, 0, &avail_cols);

    for row in 0..n_rows {
        if pairs.len() == target_size {
            break;
        }
        let mut fixed: Option<(usize, f64)> = None;
        for (slot, &col) in avail_cols.iter().enumerate() {
            let mut rest_cols = avail_cols.clone();
            rest_cols.remove(slot);
            let rest = solve_max(weights, row + 1, &rest_cols);
            if weights[row][col] + rest >= remaining - tie_eps(remaining) {
                fixed = Some((slot, rest));
                break;
            }
        }
        match fixed {
            Some((slot, rest)) => {
                let col = avail_cols.remove(slot);
                pairs.push((row, col));
                remaining = rest;
            }
            None => {
                // No column preserves optimality: every optimal solution
                // leaves this row unmatched (only possible with surplus rows).
                remaining = solve_max(weights, row + 1, &avail_cols);
            }
        }
    }

    let objective = pairs.iter().map(|&(r, c)| weights[r][c]).sum();
    Assignment { pairs, objective }
}

fn tie_eps(value: f64) -> f64 {
    TIE_EPS * (1.0 + value.abs())
}

/// Optimal max-weight assignment value over the submatrix formed by rows
/// `row_start..` and the given columns.
fn solve_max(weights: &[Vec<f64>], row_start: usize, cols: &[usize]) -> f64 {
    let n_rows = weights.len().saturating_sub(row_start);
    let n_cols = cols.len();
    if n_rows == 0 || n_cols == 0 {
        return 0.0;
    }
    let mut max_w = 0.0f64;
    for row in &weights[row_start..] {
        for &c in cols {
            max_w = max_w.max(row[c]);
        }
    }
    let n = n_rows.max(n_cols);
    // cost = max_w - weight; padded cells are weight 0 (cost max_w)
    let mut cost = vec![vec![max_w; n]; n];
    for (i, row) in weights[row_start..].iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            cost[i][j] = max_w - row[c];
        }
    }
    let min_cost = min_cost_assign(&cost);
    n as f64 * max_w - min_cost
}

/// Min-cost perfect matching on a square matrix via shortest augmenting
/// paths with potentials. O(n^3). Returns the optimal total cost.
fn min_cost_assign(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    if n == 0 {
        return 0.0;
    }
    // 1-indexed internals; p[j] = row assigned to column j, 0 = none.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=n).map(|j| cost[p[j] - 1][j - 1]).sum()
}

/// Matching-based IoU between predicted and ground-truth boxes.
///
/// Predictions and ground truth are matched by [`hungarian_max`] on the
/// pairwise IoU matrix; unmatched boxes on either side contribute 0, so the
/// score is the summed matched IoU divided by `max(|preds|, |gts|)`. Both
/// sides empty scores 1.0. With `class_aware`, cross-category pairs are
/// forced to IoU 0 before matching.
pub fn matched_iou(preds: &[LayoutBox], gts: &[LayoutBox], class_aware: bool) -> MatchedIoUReport {
    let n_pred = preds.len();
    let n_gt = gts.len();
    if n_pred == 0 && n_gt == 0 {
        return MatchedIoUReport {
            score: 1.0,
            pairs: Assignment::empty(),
            n_pred,
            n_gt,
            per_pair_iou: Vec::new(),
        };
    }
    if n_pred == 0 || n_gt == 0 {
        return MatchedIoUReport {
            score: 0.0,
            pairs: Assignment::empty(),
            n_pred,
            n_gt,
            per_pair_iou: Vec::new(),
        };
    }

    let weights: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| {
                    if class_aware && p.category != g.category {
                        0.0
                    } else {
                        iou(&p.bbox, &g.bbox)
                    }
                })
                .collect()
        })
        .collect();

    let pairs = hungarian_max(&weights);
    let per_pair_iou: Vec<f64> = pairs.pairs.iter().map(|&(r, c)| weights[r][c]).collect();
    let score = per_pair_iou.iter().sum::<f64>() / n_pred.max(n_gt) as f64;
    MatchedIoUReport {
        score,
        pairs,
        n_pred,
        n_gt,
        per_pair_iou,
    }
}

/// Fraction of ground-truth area covered by the predicted boxes.
///
/// The covered region is the intersection of the prediction union with the
/// ground-truth union, so the ratio cannot exceed 1. No ground truth at all
/// counts as fully covered.
pub fn coverage(preds: &[BBox], gts: &[BBox]) -> CoverageReport {
    let gt_area = union_area(gts);
    if gts.is_empty() {
        return CoverageReport {
            coverage: 1.0,
            covered_area: 0.0,
            gt_area: 0.0,
        };
    }
    // area(U preds ∩ U gts) = union area of all pairwise intersections
    let mut pieces = Vec::new();
    for p in preds {
        for g in gts {
            if let Some(piece) = p.intersection(g) {
                pieces.push(piece);
            }
        }
    }
    let covered_area = union_area(&pieces);
    CoverageReport {
        coverage: covered_area / gt_area,
        covered_area,
        gt_area,
    }
}

/// Corpus-level matched IoU under the chosen aggregation.
pub fn corpus_matched_iou(
    pages: &[(Vec<LayoutBox>, Vec<LayoutBox>)],
    class_aware: bool,
    aggregation: CorpusAggregation,
) -> Result<f64> {
    if pages.is_empty() {
        return Err(Error::EmptyCorpus("no pages to evaluate"));
    }
    let reports = par::map(pages, |(preds, gts)| matched_iou(preds, gts, class_aware));
    Ok(match aggregation {
        CorpusAggregation::PerPageMean => {
            reports.iter().map(|r| r.score).sum::<f64>() / reports.len() as f64
        }
        CorpusAggregation::Pooled => {
            let num: f64 = reports.iter().map(|r| r.per_pair_iou.iter().sum::<f64>()).sum();
            let den: usize = reports
                .iter()
                .map(|r| r.n_pred.max(r.n_gt))
                .sum();
            if den == 0 {
                1.0
            } else {
                num / den as f64
            }
        }
    })
}

/// Evaluate matched IoU and coverage at each confidence threshold.
///
/// `pages` pairs each prediction with its ground-truth boxes. Per-row values
/// are unweighted means over pages; `n_boxes_kept` is the corpus-wide count
/// of predictions surviving the threshold.
pub fn threshold_sweep(
    pages: &[(LayoutPrediction, Vec<LayoutBox>)],
    thresholds: &[f64],
    class_aware: bool,
) -> Result<Vec<SweepRow>> {
    if pages.is_empty() {
        return Err(Error::EmptyCorpus("no pages to sweep"));
    }
    for t in thresholds {
        if !(*t > 0.0 && *t <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "sweep threshold must be in (0,1], got {t}"
            )));
        }
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "sweep thresholds must be strictly increasing".into(),
        ));
    }

    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let per_page = par::map(pages, |(pred, gts)| {
            let kept: Vec<LayoutBox> = pred
                .boxes
                .iter()
                .filter(|b| b.confidence >= t)
                .cloned()
                .collect();
            let iou_score = matched_iou(&kept, gts, class_aware).score;
            let kept_boxes: Vec<BBox> = kept.iter().map(|b| b.bbox).collect();
            let gt_boxes: Vec<BBox> = gts.iter().map(|b| b.bbox).collect();
            let cov = coverage(&kept_boxes, &gt_boxes).coverage;
            (iou_score, cov, kept.len())
        });
        let n = per_page.len() as f64;
        rows.push(SweepRow {
            confidence_threshold: t,
            matched_iou: per_page.iter().map(|r| r.0).sum::<f64>() / n,
            coverage: per_page.iter().map(|r| r.1).sum::<f64>() / n,
            n_boxes_kept: per_page.iter().map(|r| r.2).sum(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PageGeom;
    use crate::layout::BoxCategory;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn semantic(x0: f64, y0: f64, x1: f64, y1: f64, conf: f64) -> LayoutBox {
        LayoutBox::new(bb(x0, y0, x1, y1), BoxCategory::SemanticBox, conf).unwrap()
    }

    #[test]
    fn hungarian_single_cell() {
        let a = hungarian_max(&[vec![0.5]]);
        assert_eq!(a.pairs, vec![(0, 0)]);
        assert_eq!(a.objective, 0.5);
    }

    #[test]
    fn hungarian_diagonal_wins() {
        let a = hungarian_max(&[vec![0.9, 0.1], vec![0.2, 0.8]]);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert!((a.objective - 1.7).abs() < 1e-12);
    }

    #[test]
    fn hungarian_antidiagonal_wins() {
        let a = hungarian_max(&[vec![0.4, 0.6], vec![0.7, 0.3]]);
        assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
        assert!((a.objective - 1.3).abs() < 1e-12);
    }

    #[test]
    fn hungarian_empty_matrix() {
        assert_eq!(hungarian_max(&[]), Assignment::empty());
        let no_cols: Vec<Vec<f64>> = vec![vec![], vec![]];
        assert_eq!(hungarian_max(&no_cols), Assignment::empty());
    }

    #[test]
    fn hungarian_tie_break_is_lexicographic() {
        // every assignment scores 1.0; expect the identity pairing
        let a = hungarian_max(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);

        let z = hungarian_max(&[vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]);
        assert_eq!(z.pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn hungarian_rectangular_leaves_surplus_rows_unmatched() {
        // 2 rows, 1 col: only the higher-weight row should be matched
        let a = hungarian_max(&[vec![0.0], vec![5.0]]);
        assert_eq!(a.pairs, vec![(1, 0)]);
        assert_eq!(a.objective, 5.0);
    }

    #[test]
    fn matched_iou_identity_and_empties() {
        let boxes = vec![semantic(0.0, 0.0, 10.0, 10.0, 1.0), semantic(20.0, 0.0, 30.0, 10.0, 1.0)];
        let r = matched_iou(&boxes, &boxes, false);
        assert_eq!(r.score, 1.0);

        let both_empty = matched_iou(&[], &[], false);
        assert_eq!(both_empty.score, 1.0);

        let no_preds = matched_iou(&[], &boxes, false);
        assert_eq!(no_preds.score, 0.0);
    }

    #[test]
    fn matched_iou_penalizes_extra_prediction() {
        let gts = vec![semantic(0.0, 0.0, 10.0, 10.0, 1.0)];
        let preds = vec![
            semantic(0.0, 0.0, 10.0, 10.0, 0.9),
            semantic(50.0, 50.0, 60.0, 60.0, 0.9),
        ];
        let r = matched_iou(&preds, &gts, false);
        assert_eq!(r.score, 0.5);
        assert_eq!(r.pairs.pairs, vec![(0, 0)]);
    }

    #[test]
    fn matched_iou_class_aware_zeroes_cross_category() {
        let gt = vec![LayoutBox::ground_truth(bb(0.0, 0.0, 10.0, 10.0), BoxCategory::Title)];
        let pred = vec![semantic(0.0, 0.0, 10.0, 10.0, 0.9)];
        assert_eq!(matched_iou(&pred, &gt, false).score, 1.0);
        assert_eq!(matched_iou(&pred, &gt, true).score, 0.0);
    }

    #[test]
    fn coverage_examples() {
        let a = vec![bb(0.0, 0.0, 2.0, 2.0)];
        let g = vec![bb(1.0, 1.0, 3.0, 3.0)];
        let r = coverage(&a, &g);
        assert_eq!(r.coverage, 0.25);
        assert_eq!(r.covered_area, 1.0);
        assert_eq!(r.gt_area, 4.0);

        assert_eq!(coverage(&a, &a).coverage, 1.0);
        assert_eq!(coverage(&[], &g).coverage, 0.0);
        assert_eq!(coverage(&a, &[]).coverage, 1.0);
    }

    #[test]
    fn coverage_never_exceeds_one() {
        // predictions much larger than ground truth
        let preds = vec![bb(0.0, 0.0, 100.0, 100.0)];
        let gts = vec![bb(10.0, 10.0, 20.0, 20.0)];
        assert_eq!(coverage(&preds, &gts).coverage, 1.0);
    }

    #[test]
    fn sweep_filters_and_orders() {
        let page = PageGeom::new("p1", 1000, 1000).unwrap();
        let gt = vec![semantic(0.0, 0.0, 100.0, 100.0, 1.0)];
        let pred = LayoutPrediction::new(
            page,
            vec![semantic(0.0, 0.0, 100.0, 100.0, 0.3)],
        );
        let rows = threshold_sweep(&[(pred, gt)], &[0.2, 0.4], false).unwrap();
        assert_eq!(rows.len(), 2);
        // kept at 0.2: perfect match
        assert_eq!(rows[0].matched_iou, 1.0);
        assert_eq!(rows[0].coverage, 1.0);
        assert_eq!(rows[0].n_boxes_kept, 1);
        // filtered out at 0.4
        assert_eq!(rows[1].matched_iou, 0.0);
        assert_eq!(rows[1].coverage, 0.0);
        assert_eq!(rows[1].n_boxes_kept, 0);
    }

    #[test]
    fn sweep_rejects_bad_inputs() {
        assert!(matches!(
            threshold_sweep(&[], &[0.2], false),
            Err(Error::EmptyCorpus(_))
        ));
        let page = PageGeom::new("p1", 100, 100).unwrap();
        let pages = vec![(LayoutPrediction::new(page, vec![]), vec![])];
        assert!(threshold_sweep(&pages, &[0.4, 0.2], false).is_err());
        assert!(threshold_sweep(&pages, &[0.0, 0.2], false).is_err());
    }
}
