//! Semantic layout chunking and RAG evaluation toolkit.
//!
//! Turns page images plus coarse layout detections into ordered chunks for
//! textual and visual RAG pipelines, and evaluates every stage: detection
//! quality (matching-based IoU, coverage, confidence sweeps), chunk
//! granularity, VLM conversion cost, retrieval quality (BM25 / LCS evidence
//! inclusion / multi-vector MaxSim), and answer quality (token F1 and
//! judge-based accuracy).
//!
//! Per-page work parallelizes over rayon by default; build with
//! `--no-default-features` for a fully sequential build.

pub mod chunker;
pub mod cli;
pub mod corpus_io;
pub mod crops;
pub mod error;
pub mod geometry;
pub mod layout;
pub mod match_eval;
pub mod par;
pub mod rag_eval;
pub mod reports;
pub mod retrieval;
pub mod vlm_convert;

pub use error::{Error, Result};
pub use geometry::{iou, union_area, BBox, PageGeom};
pub use layout::{BoxCategory, LayoutBox, LayoutPrediction};
