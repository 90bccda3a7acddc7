//! Property tests for the spec-level invariants of geometry, matching,
//! chunk ordering, retrieval, and scoring.

use proptest::prelude::*;

use semchunk::chunker::reading_order;
use semchunk::geometry::{iou, union_area, BBox};
use semchunk::layout::{BoxCategory, LayoutBox};
use semchunk::match_eval::{coverage, matched_iou};
use semchunk::rag_eval::token_f1;
use semchunk::retrieval::bm25::{bm25_build, bm25_query};
use semchunk::retrieval::lcs::{lcs_len, lcs_score, LcsGranularity};

fn arb_box() -> impl Strategy<Value = BBox> {
    (0u32..200, 0u32..200, 1u32..60, 1u32..60).prop_map(|(x0, y0, w, h)| {
        BBox::new(
            f64::from(x0),
            f64::from(y0),
            f64::from(x0 + w),
            f64::from(y0 + h),
        )
        .unwrap()
    })
}

fn arb_layout(max: usize) -> impl Strategy<Value = Vec<LayoutBox>> {
    prop::collection::vec(arb_box(), 0..max)
        .prop_map(|boxes| boxes.into_iter().map(|b| LayoutBox::ground_truth(b, BoxCategory::SemanticBox)).collect())
}

proptest! {
    #[test]
    fn iou_bounds_symmetry_identity(a in arb_box(), b in arb_box()) {
        let ab = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, iou(&b, &a));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn union_area_monotone_and_permutation_invariant(
        boxes in prop::collection::vec(arb_box(), 1..8),
        extra in arb_box(),
    ) {
        let base = union_area(&boxes);
        let mut more = boxes.clone();
        more.push(extra);
        prop_assert!(union_area(&more) >= base - 1e-9);

        let mut reversed = boxes.clone();
        reversed.reverse();
        prop_assert!((union_area(&reversed) - base).abs() < 1e-9);
    }

    #[test]
    fn matched_iou_self_is_one_and_bounded(layout in arb_layout(6), other in arb_layout(6)) {
        if !layout.is_empty() {
            prop_assert_eq!(matched_iou(&layout, &layout, false).score, 1.0);
        }
        let score = matched_iou(&layout, &other, false).score;
        prop_assert!((0.0..=1.0).contains(&score));
    }

    #[test]
    fn coverage_bounded_and_monotone(preds in arb_layout(6), gts in arb_layout(6), extra in arb_box()) {
        let pred_boxes: Vec<BBox> = preds.iter().map(|b| b.bbox).collect();
        let gt_boxes: Vec<BBox> = gts.iter().map(|b| b.bbox).collect();
        let base = coverage(&pred_boxes, &gt_boxes).coverage;
        prop_assert!((0.0..=1.0).contains(&base));

        let mut more = pred_boxes.clone();
        more.push(extra);
        prop_assert!(coverage(&more, &gt_boxes).coverage >= base - 1e-9);
    }

    #[test]
    fn reading_order_is_a_permutation_and_stable(layout in arb_layout(10)) {
        let ordered = reading_order(&layout);
        prop_assert_eq!(ordered.len(), layout.len());
        // same multiset
        let mut a: Vec<String> = layout.iter().map(|b| format!("{:?}", b.bbox)).collect();
        let mut b: Vec<String> = ordered.iter().map(|b| format!("{:?}", b.bbox)).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        // idempotent
        prop_assert_eq!(reading_order(&ordered), ordered.clone());
        // keys non-decreasing
        for w in ordered.windows(2) {
            let ka = (w[0].bbox.y0, w[0].bbox.x0);
            let kb = (w[1].bbox.y0, w[1].bbox.x0);
            prop_assert!(ka <= kb);
        }
    }

    #[test]
    fn reading_order_input_order_invariant_on_distinct_keys(layout in arb_layout(8)) {
        // distinct (y0,x0) keys only
        let mut seen = std::collections::BTreeSet::new();
        let distinct: Vec<LayoutBox> = layout
            .into_iter()
            .filter(|b| seen.insert((b.bbox.y0.to_bits(), b.bbox.x0.to_bits())))
            .collect();
        let mut shuffled = distinct.clone();
        shuffled.reverse();
        prop_assert_eq!(reading_order(&distinct), reading_order(&shuffled));
    }

    #[test]
    fn bm25_scores_nonnegative_and_sorted(
        docs in prop::collection::vec("[a-d ]{1,30}", 1..8),
        query in "[a-d ]{1,10}",
    ) {
        let units: Vec<(String, String)> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("d{i}"), d.clone()))
            .collect();
        if let Ok(index) = bm25_build(&units, 1.5, 0.75) {
            let res = bm25_query(&index, "q", &query, 5);
            prop_assert!(res.ranked.len() <= 5);
            for w in res.ranked.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
            for r in &res.ranked {
                prop_assert!(r.score > 0.0);
            }
        }
    }

    #[test]
    fn lcs_matches_dp_and_score_monotone(
        a in prop::collection::vec(0u8..5, 0..80),
        b in prop::collection::vec(0u8..5, 0..80),
        suffix in prop::collection::vec(0u8..5, 0..20),
    ) {
        // independent quadratic DP
        let mut prev = vec![0usize; b.len() + 1];
        let mut cur = vec![0usize; b.len() + 1];
        for sym in &a {
            for (j, other) in b.iter().enumerate() {
                cur[j + 1] = if sym == other { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        prop_assert_eq!(lcs_len(&a, &b), prev[b.len()]);

        // appending to the candidate never decreases the LCS
        let mut extended = b.clone();
        extended.extend_from_slice(&suffix);
        prop_assert!(lcs_len(&a, &extended) >= lcs_len(&a, &b));
    }

    #[test]
    fn lcs_score_bounds_and_substring(haystack in "[a-f]{0,40}", evidence in "[a-f]{1,10}") {
        let padded = format!("xx {haystack} {evidence} yy");
        let score = lcs_score(&evidence, &[padded], LcsGranularity::Char).unwrap();
        prop_assert_eq!(score, 1.0);

        let alone = lcs_score(&evidence, &[haystack], LcsGranularity::Char).unwrap();
        prop_assert!((0.0..=1.0).contains(&alone));
    }

    #[test]
    fn token_f1_bounds_and_symmetry(a in "[a-c ]{0,30}", b in "[a-c ]{0,30}") {
        let s = token_f1(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s.f1));
        prop_assert!((0.0..=1.0).contains(&s.precision));
        prop_assert!((0.0..=1.0).contains(&s.recall));
        let t = token_f1(&b, &a);
        prop_assert_eq!(s.precision, t.recall);
        prop_assert_eq!(s.recall, t.precision);
        prop_assert!((s.f1 - t.f1).abs() < 1e-12);
        prop_assert_eq!(token_f1(&a, &a).f1, if a.split_whitespace().count() == 0 { 1.0 } else { 1.0 });
    }

    #[test]
    fn judge_binarization_monotone(score in 1.0f64..=5.0, threshold in 1.0f64..=5.0) {
        let correct = score >= threshold;
        let higher = (score + 0.5).min(5.0);
        let correct_higher = higher >= threshold;
        // raising a score never flips correct -> incorrect
        prop_assert!(!(correct && !correct_higher));
    }
}
