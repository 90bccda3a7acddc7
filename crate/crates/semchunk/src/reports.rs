//! Report files emitted by the pipeline commands.
//!
//! Reports serialize canonically (stable key order, fixed float format) so a
//! rerun with the same configuration is byte-identical. Anything that varies
//! between runs — wall-clock timestamps, durations — goes to a `.meta.json`
//! sidecar next to the report instead.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::chunker::GranularityStats;
use crate::corpus_io::canonical::{fmt_sig6, write_canonical_json};
use crate::corpus_io::qa::QaCategory;
use crate::error::{Error, Result};
use crate::match_eval::SweepRow;
use crate::rag_eval::CategoryReport;

/// Per-stage scoring report, one per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub mode: String,
    pub per_category: BTreeMap<QaCategory, f64>,
    pub overall: f64,
    pub n_items: usize,
    pub config_digest: String,
}

impl RunReport {
    pub fn from_category_report(
        run_id: impl Into<String>,
        mode: &str,
        report: &CategoryReport,
        config_digest: impl Into<String>,
    ) -> Self {
        RunReport {
            run_id: run_id.into(),
            mode: mode.to_string(),
            per_category: report.per_category.clone(),
            overall: report.overall,
            n_items: report.n_items,
            config_digest: config_digest.into(),
        }
    }
}

/// Mean of several run reports (e.g. across retrieval/answer model
/// combinations). Categories average over the reports that carry them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    pub run_id: String,
    pub mode: String,
    pub per_category: BTreeMap<QaCategory, f64>,
    pub overall: f64,
    pub n_runs: usize,
    pub n_items: usize,
    pub config_digest: String,
}

pub fn merge_run_reports(
    run_id: &str,
    reports: &[RunReport],
    config_digest: &str,
) -> Result<MergedReport> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("no run reports to merge"));
    }
    let mode = &reports[0].mode;
    if reports.iter().any(|r| &r.mode != mode) {
        return Err(Error::InvalidInput(
            "run reports to merge must share one mode".into(),
        ));
    }
    let mut sums: BTreeMap<QaCategory, (f64, usize)> = BTreeMap::new();
    for r in reports {
        for (cat, v) in &r.per_category {
            let e = sums.entry(*cat).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let per_category: BTreeMap<QaCategory, f64> = sums
        .into_iter()
        .map(|(cat, (sum, n))| (cat, sum / n as f64))
        .collect();
    let overall = reports.iter().map(|r| r.overall).sum::<f64>() / reports.len() as f64;
    Ok(MergedReport {
        run_id: run_id.to_string(),
        mode: mode.clone(),
        per_category,
        overall,
        n_runs: reports.len(),
        n_items: reports.iter().map(|r| r.n_items).sum(),
        config_digest: config_digest.to_string(),
    })
}

/// Per-page detection metrics inside a layout evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageEval {
    pub page_id: String,
    pub matched_iou: f64,
    pub coverage: f64,
    pub n_pred: usize,
    pub n_gt: usize,
}

/// Detection quality at a single confidence threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEvalReport {
    pub confidence_threshold: f64,
    pub matched_iou: f64,
    pub coverage: f64,
    pub n_pages: usize,
    pub n_boxes_kept: usize,
    pub per_page: Vec<PageEval>,
    pub config_digest: String,
}

/// Full confidence sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub n_pages: usize,
    pub config_digest: String,
}

/// Sweep rows as CSV, with the same float formatting as the JSON reports.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("confidence_threshold,matched_iou,coverage,n_boxes_kept\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_sig6(r.confidence_threshold),
            fmt_sig6(r.matched_iou),
            fmt_sig6(r.coverage),
            r.n_boxes_kept
        ));
    }
    out
}

/// Granularity statistics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub stats: GranularityStats,
    pub config_digest: String,
}

/// Deterministic part of the conversion cost output; wall time lives in the
/// sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReportFile {
    pub n_pages: usize,
    pub mean_input_tokens: f64,
    pub mean_output_tokens: f64,
    pub mean_chunks: f64,
    pub per_request_input_tokens: f64,
    pub config_digest: String,
}

/// Run metadata sidecar: everything time-dependent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub started_unix_ms: u64,
    pub duration_ms: u64,
    /// Mean per-page conversion wall time, when the run converted pages.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_wall_time_s: Option<f64>,
}

/// Sidecar path for a report: `<report>.meta.json`.
pub fn meta_path(report_path: &Path) -> PathBuf {
    let mut name = report_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".meta.json");
    report_path.with_file_name(name)
}

pub fn write_meta(report_path: &Path, meta: &RunMeta) -> Result<()> {
    write_canonical_json(&meta_path(report_path), meta)
}

pub fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn load_run_report(path: &Path) -> Result<RunReport> {
    let text = crate::corpus_io::read_utf8(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        line: None,
        msg: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape() {
        let rows = vec![
            SweepRow {
                confidence_threshold: 0.2,
                matched_iou: 0.5,
                coverage: 1.0 / 3.0,
                n_boxes_kept: 7,
            },
            SweepRow {
                confidence_threshold: 0.3,
                matched_iou: 0.25,
                coverage: 0.25,
                n_boxes_kept: 5,
            },
        ];
        let csv = sweep_to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "confidence_threshold,matched_iou,coverage,n_boxes_kept");
        assert_eq!(lines[1], "0.2,0.5,0.333333,7");
        assert_eq!(lines[2], "0.3,0.25,0.25,5");
    }

    #[test]
    fn merge_averages_reports() {
        let mk = |overall: f64, txt: f64| RunReport {
            run_id: "r".into(),
            mode: "overall".into(),
            per_category: [(QaCategory::Txt, txt)].into_iter().collect(),
            overall,
            n_items: 10,
            config_digest: "d".into(),
        };
        let merged = merge_run_reports("m", &[mk(30.0, 30.0), mk(50.0, 50.0)], "d").unwrap();
        assert_eq!(merged.overall, 40.0);
        assert_eq!(merged.per_category[&QaCategory::Txt], 40.0);
        assert_eq!(merged.n_runs, 2);
        assert_eq!(merged.n_items, 20);
    }

    #[test]
    fn merge_rejects_mixed_modes() {
        let a = RunReport {
            run_id: "a".into(),
            mode: "overall".into(),
            per_category: BTreeMap::new(),
            overall: 0.0,
            n_items: 0,
            config_digest: "d".into(),
        };
        let mut b = a.clone();
        b.mode = "retrieval".into();
        assert!(merge_run_reports("m", &[a, b], "d").is_err());
    }

    #[test]
    fn meta_sidecar_path() {
        assert_eq!(
            meta_path(Path::new("/tmp/report.json")),
            PathBuf::from("/tmp/report.json.meta.json")
        );
    }
}
