//! `layout-eval` and `sweep`: detection quality against annotations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Args;
use serde::Serialize;

use crate::chunker::DEFAULT_CONFIDENCE_THRESHOLD;
use crate::corpus_io::canonical::{sha256_digest, write_canonical_json};
use crate::corpus_io::detections::to_layout_prediction;
use crate::corpus_io::{load_annotations, load_detections, load_label_map, Diagnostic, LabelMap};
use crate::error::Result;
use crate::layout::{LayoutBox, LayoutPrediction};
use crate::match_eval::{matched_iou, threshold_sweep, SweepRow};
use crate::par;
use crate::reports::{
    now_unix_ms, sweep_to_csv, write_meta, LayoutEvalReport, PageEval, RunMeta, SweepReport,
};

#[derive(Args)]
pub struct LayoutEvalArgs {
    /// Ground-truth annotation file (JSON)
    #[arg(long)]
    annotations: PathBuf,
    /// Detection file (native JSONL or COCO results)
    #[arg(long)]
    detections: PathBuf,
    /// Label map JSON for detector categories
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// Confidence threshold applied to detections
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    confidence: f64,
    /// Zero out cross-category IoU before matching
    #[arg(long)]
    class_aware: bool,
    /// Output report path (JSON)
    #[arg(short, long)]
    out: PathBuf,
    /// Exit with code 2 when warnings were produced
    #[arg(long)]
    strict_warnings: bool,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// Comma-separated thresholds, strictly increasing
    #[arg(long, default_value = "0.2,0.3,0.4,0.5")]
    thresholds: String,
    #[arg(long)]
    class_aware: bool,
    /// Output JSON report
    #[arg(long)]
    out_json: PathBuf,
    /// Output CSV table
    #[arg(long)]
    out_csv: PathBuf,
    #[arg(long)]
    strict_warnings: bool,
}

pub(crate) type PairedPages = Vec<(LayoutPrediction, Vec<LayoutBox>)>;

/// Pair each annotated page with its (possibly empty) detection-based
/// prediction.
pub(crate) fn paired_pages(
    annotations: &Path,
    detections: &Path,
    label_map: Option<&PathBuf>,
) -> Result<(PairedPages, Vec<Diagnostic>)> {
    let label_map = match label_map {
        Some(path) => load_label_map(path)?,
        None => LabelMap::identity(),
    };
    let ann = load_annotations(annotations)?;
    let det = load_detections(detections)?;
    let mut warnings = ann.warnings;
    warnings.extend(det.warnings);

    let mut pages = Vec::with_capacity(ann.value.len());
    for doc in &ann.value {
        let pred = match det
            .value
            .iter()
            .find(|d| d.page_id == doc.page.page_id)
        {
            Some(d) => to_layout_prediction(d, &doc.page, &label_map)?,
            None => LayoutPrediction::new(doc.page.clone(), Vec::new()),
        };
        pages.push((pred, doc.boxes.clone()));
    }
    for d in &det.value {
        if !ann.value.iter().any(|a| a.page.page_id == d.page_id) {
            warnings.push(Diagnostic::new(
                format!("page {}", d.page_id),
                "detections for a page absent from the annotations; ignored",
            ));
        }
    }
    Ok((pages, warnings))
}

#[derive(Serialize)]
struct LayoutEvalConfig<'a> {
    annotations: &'a PathBuf,
    detections: &'a PathBuf,
    label_map: &'a Option<PathBuf>,
    confidence: f64,
    class_aware: bool,
}

pub fn run_layout_eval(args: LayoutEvalArgs) -> Result<ExitCode> {
    let started = now_unix_ms();
    let digest = sha256_digest(&LayoutEvalConfig {
        annotations: &args.annotations,
        detections: &args.detections,
        label_map: &args.label_map,
        confidence: args.confidence,
        class_aware: args.class_aware,
    })?;
    let (pages, warnings) =
        paired_pages(&args.annotations, &args.detections, args.label_map.as_ref())?;

    let per_page: Vec<PageEval> = par::map(&pages, |(pred, gts)| {
        let kept: Vec<LayoutBox> = pred
            .boxes
            .iter()
            .filter(|b| b.confidence >= args.confidence)
            .cloned()
            .collect();
        let iou_report = matched_iou(&kept, gts, args.class_aware);
        let kept_boxes: Vec<_> = kept.iter().map(|b| b.bbox).collect();
        let gt_boxes: Vec<_> = gts.iter().map(|b| b.bbox).collect();
        let cov = crate::match_eval::coverage(&kept_boxes, &gt_boxes);
        PageEval {
            page_id: pred.page.page_id.clone(),
            matched_iou: iou_report.score,
            coverage: cov.coverage,
            n_pred: kept.len(),
            n_gt: gts.len(),
        }
    });

    let n = per_page.len();
    let report = LayoutEvalReport {
        confidence_threshold: args.confidence,
        matched_iou: per_page.iter().map(|p| p.matched_iou).sum::<f64>() / n as f64,
        coverage: per_page.iter().map(|p| p.coverage).sum::<f64>() / n as f64,
        n_pages: n,
        n_boxes_kept: per_page.iter().map(|p| p.n_pred).sum(),
        per_page,
        config_digest: digest,
    };
    write_canonical_json(&args.out, &report)?;
    write_meta(
        &args.out,
        &RunMeta {
            started_unix_ms: started,
            duration_ms: now_unix_ms().saturating_sub(started),
            mean_wall_time_s: None,
        },
    )?;
    println!(
        "layout-eval: {} pages, matched IoU {:.4}, coverage {:.4}",
        report.n_pages, report.matched_iou, report.coverage
    );
    super::finish(&warnings, args.strict_warnings)
}

#[derive(Serialize)]
struct SweepConfig<'a> {
    annotations: &'a PathBuf,
    detections: &'a PathBuf,
    label_map: &'a Option<PathBuf>,
    thresholds: &'a [f64],
    class_aware: bool,
}

pub fn run_sweep(args: SweepArgs) -> Result<ExitCode> {
    let started = now_unix_ms();
    let thresholds = super::parse_thresholds(&args.thresholds)?;
    let digest = sha256_digest(&SweepConfig {
        annotations: &args.annotations,
        detections: &args.detections,
        label_map: &args.label_map,
        thresholds: &thresholds,
        class_aware: args.class_aware,
    })?;
    let (pages, warnings) =
        paired_pages(&args.annotations, &args.detections, args.label_map.as_ref())?;
    let rows: Vec<SweepRow> = threshold_sweep(&pages, &thresholds, args.class_aware)?;

    let report = SweepReport {
        rows: rows.clone(),
        n_pages: pages.len(),
        config_digest: digest,
    };
    write_canonical_json(&args.out_json, &report)?;
    std::fs::write(&args.out_csv, sweep_to_csv(&rows))?;
    write_meta(
        &args.out_json,
        &RunMeta {
            started_unix_ms: started,
            duration_ms: now_unix_ms().saturating_sub(started),
            mean_wall_time_s: None,
        },
    )?;
    for row in &rows {
        println!(
            "sweep: t={:.2} matched_iou={:.4} coverage={:.4} kept={}",
            row.confidence_threshold, row.matched_iou, row.coverage, row.n_boxes_kept
        );
    }
    super::finish(&warnings, args.strict_warnings)
}
