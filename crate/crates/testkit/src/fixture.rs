//! The bundled three-page demo corpus.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::Serialize;

/// One colored layout region and the text the mock server reads from it.
#[derive(Debug, Clone)]
pub struct RegionSpec {
    pub page_id: &'static str,
    /// (x0, y0, x1, y1) in pixels.
    pub bbox: (u32, u32, u32, u32),
    pub category: &'static str,
    pub confidence: f64,
    pub color: (u8, u8, u8),
    pub text: &'static str,
}

/// One QA item over the fixture texts.
#[derive(Debug, Clone)]
pub struct QaSpec {
    pub qa_id: &'static str,
    pub question: &'static str,
    pub gold_answer: &'static str,
    pub evidence: &'static str,
    pub category: &'static str,
    pub source_page_ids: &'static [&'static str],
}

/// Paths and tables of a generated fixture corpus.
#[derive(Debug, Clone)]
pub struct FixtureCorpus {
    pub dir: PathBuf,
    pub manifest_path: PathBuf,
    pub annotations_path: PathBuf,
    pub detections_path: PathBuf,
    pub qa_path: PathBuf,
    pub pages_dir: PathBuf,
    pub regions: Vec<RegionSpec>,
    pub qa: Vec<QaSpec>,
    /// color -> markdown text, for the mock server.
    pub text_table: BTreeMap<(u8, u8, u8), String>,
    /// (question, gold answer, evidence), for the mock answer model.
    pub qa_table: Vec<(String, String, String)>,
}

const PAGE_W: u32 = 600;
const PAGE_H: u32 = 800;
const PAGES: [&str; 3] = ["p1", "p2", "p3"];

fn regions() -> Vec<RegionSpec> {
    vec![
        RegionSpec {
            page_id: "p1",
            bbox: (40, 20, 560, 80),
            category: "title",
            confidence: 0.95,
            color: (200, 30, 30),
            text: "# Annual Report 2024",
        },
        RegionSpec {
            page_id: "p1",
            bbox: (40, 120, 560, 400),
            category: "semantic_box",
            confidence: 0.9,
            color: (30, 200, 30),
            text: "Revenue grew to 42 million dollars in fiscal 2024, driven by subscription renewals.",
        },
        RegionSpec {
            page_id: "p1",
            bbox: (40, 430, 560, 760),
            category: "semantic_box",
            confidence: 0.85,
            color: (30, 30, 200),
            text: "The board approved a dividend of 3 euros per share, payable in June.",
        },
        RegionSpec {
            page_id: "p2",
            bbox: (30, 40, 570, 380),
            category: "semantic_box",
            confidence: 0.88,
            color: (200, 200, 30),
            text: "Headcount by region: Europe 120, Asia 340, Americas 95.",
        },
        RegionSpec {
            page_id: "p2",
            bbox: (30, 420, 570, 770),
            category: "semantic_box",
            confidence: 0.8,
            color: (200, 30, 200),
            text: "Operating margin improved to 18 percent on cost discipline.",
        },
        RegionSpec {
            page_id: "p3",
            bbox: (40, 10, 560, 60),
            category: "header",
            confidence: 0.92,
            color: (30, 200, 200),
            text: "Quarterly Bulletin",
        },
        RegionSpec {
            page_id: "p3",
            bbox: (40, 100, 560, 420),
            category: "semantic_box",
            confidence: 0.9,
            color: (120, 60, 180),
            text: "The new product line launches in March 2025 across all markets.",
        },
        RegionSpec {
            page_id: "p3",
            bbox: (40, 450, 560, 780),
            category: "semantic_box",
            confidence: 0.82,
            color: (60, 120, 90),
            text: "Customer satisfaction reached a score of 91 this quarter.",
        },
    ]
}

fn qa_items() -> Vec<QaSpec> {
    vec![
        QaSpec {
            qa_id: "q1",
            question: "What did revenue grow to in fiscal 2024?",
            gold_answer: "42 million dollars",
            evidence: "Revenue grew to 42 million dollars",
            category: "TXT",
            source_page_ids: &["p1"],
        },
        QaSpec {
            qa_id: "q2",
            question: "What is the headcount in Asia?",
            gold_answer: "340",
            evidence: "Asia 340",
            category: "TAB",
            source_page_ids: &["p2"],
        },
        QaSpec {
            qa_id: "q3",
            question: "What did operating margin improve to?",
            gold_answer: "18 percent",
            evidence: "Operating margin improved to 18 percent",
            category: "CHA",
            source_page_ids: &["p2"],
        },
        QaSpec {
            qa_id: "q4",
            question: "When does the new product line launch?",
            gold_answer: "March 2025",
            evidence: "The new product line launches in March 2025",
            category: "RO",
            source_page_ids: &["p3"],
        },
        QaSpec {
            qa_id: "q5",
            question: "What dividend was approved by the board?",
            gold_answer: "3 euros per share",
            evidence: "dividend of 3 euros per share",
            category: "TXT",
            source_page_ids: &["p1"],
        },
        QaSpec {
            qa_id: "q6",
            question: "What score did customer satisfaction reach?",
            gold_answer: "91",
            evidence: "Customer satisfaction reached a score of 91",
            category: "FOR",
            source_page_ids: &["p3"],
        },
    ]
}

#[derive(Serialize)]
struct AnnBox {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    category: String,
}

#[derive(Serialize)]
struct AnnDoc {
    page_id: String,
    width: u32,
    height: u32,
    image_uri: String,
    boxes: Vec<AnnBox>,
}

/// Generate the corpus under `dir`: page PNGs, manifest, annotations,
/// detections, and QA file. Deterministic: the same `dir` contents every
/// call.
pub fn build_corpus(dir: &Path) -> std::io::Result<FixtureCorpus> {
    let pages_dir = dir.join("pages");
    fs::create_dir_all(&pages_dir)?;
    let regions = regions();
    let qa = qa_items();

    // render pages
    for page_id in PAGES {
        let mut img = RgbImage::from_pixel(PAGE_W, PAGE_H, Rgb([255, 255, 255]));
        for r in regions.iter().filter(|r| r.page_id == page_id) {
            let (x0, y0, x1, y1) = r.bbox;
            for y in y0..y1 {
                for x in x0..x1 {
                    img.put_pixel(x, y, Rgb([r.color.0, r.color.1, r.color.2]));
                }
            }
        }
        img.save(pages_dir.join(format!("{page_id}.png")))
            .map_err(std::io::Error::other)?;
    }

    // manifest
    let manifest_path = dir.join("manifest.json");
    let pages_json: Vec<serde_json::Value> = PAGES
        .iter()
        .map(|p| {
            serde_json::json!({
                "page_id": p,
                "image_uri": format!("pages/{p}.png"),
                "width": PAGE_W,
                "height": PAGE_H,
            })
        })
        .collect();
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "corpus_id": "demo-3p",
            "pages": pages_json,
            "checksums": {},
        }))?,
    )?;

    // annotations: the regions themselves, confidence implied 1.0
    let annotations_path = dir.join("annotations.json");
    let docs: Vec<AnnDoc> = PAGES
        .iter()
        .map(|p| AnnDoc {
            page_id: p.to_string(),
            width: PAGE_W,
            height: PAGE_H,
            image_uri: format!("pages/{p}.png"),
            boxes: regions
                .iter()
                .filter(|r| r.page_id == *p)
                .map(|r| AnnBox {
                    x0: f64::from(r.bbox.0),
                    y0: f64::from(r.bbox.1),
                    x1: f64::from(r.bbox.2),
                    y1: f64::from(r.bbox.3),
                    category: r.category.to_string(),
                })
                .collect(),
        })
        .collect();
    fs::write(&annotations_path, serde_json::to_string_pretty(&docs)?)?;

    // detections: the regions at their confidences, plus one low-confidence
    // duplicate that a 0.4 threshold removes
    let detections_path = dir.join("detections.jsonl");
    let mut det_lines: Vec<String> = regions
        .iter()
        .map(|r| {
            serde_json::json!({
                "page_id": r.page_id,
                "x0": r.bbox.0, "y0": r.bbox.1, "x1": r.bbox.2, "y1": r.bbox.3,
                "category": r.category,
                "confidence": r.confidence,
            })
            .to_string()
        })
        .collect();
    det_lines.push(
        serde_json::json!({
            "page_id": "p1",
            "x0": 45, "y0": 125, "x1": 300, "y1": 200,
            "category": "semantic_box",
            "confidence": 0.3,
        })
        .to_string(),
    );
    fs::write(&detections_path, det_lines.join("\n") + "\n")?;

    // qa set
    let qa_path = dir.join("qa.jsonl");
    let qa_lines: Vec<String> = qa
        .iter()
        .map(|q| {
            serde_json::json!({
                "qa_id": q.qa_id,
                "question": q.question,
                "gold_answer": q.gold_answer,
                "evidence": q.evidence,
                "category": q.category,
                "source_page_ids": q.source_page_ids,
            })
            .to_string()
        })
        .collect();
    fs::write(&qa_path, qa_lines.join("\n") + "\n")?;

    let text_table = regions
        .iter()
        .map(|r| (r.color, r.text.to_string()))
        .collect();
    let qa_table = qa
        .iter()
        .map(|q| {
            (
                q.question.to_string(),
                q.gold_answer.to_string(),
                q.evidence.to_string(),
            )
        })
        .collect();

    Ok(FixtureCorpus {
        dir: dir.to_path_buf(),
        manifest_path,
        annotations_path,
        detections_path,
        qa_path,
        pages_dir,
        regions,
        qa,
        text_table,
        qa_table,
    })
}
