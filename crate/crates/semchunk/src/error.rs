use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type. Loader errors carry file/line context so the CLI
/// can report them without re-deriving it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}{}: {msg}", fmt_line(*line))]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        msg: String,
    },

    #[error("schema error in {path}{}: {msg}", fmt_line(*line))]
    Schema {
        path: PathBuf,
        line: Option<usize>,
        msg: String,
    },

    #[error("invalid box geometry at {context}: {msg}")]
    Geometry { context: String, msg: String },

    #[error("unknown category `{label}` at {context}")]
    Category { context: String, label: String },

    #[error("no mapping for detector label `{label}` (page {page_id})")]
    UnmappedLabel { page_id: String, label: String },

    #[error("duplicate unit id `{0}`")]
    DuplicateId(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("box ({x0},{y0},{x1},{y1}) has no area inside the {width}x{height} page")]
    DegenerateClamp {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        width: u32,
        height: u32,
    },

    #[error("chunks span multiple pages: {0} and {1}")]
    MixedPages(String, String),

    #[error("missing stage output for qa item `{qa_id}`: {what}")]
    MissingStageOutput { qa_id: String, what: &'static str },

    #[error("judge response has no JSON object with `reason` and `score`: {0}")]
    JudgeParse(String),

    #[error("judge score {0} outside [1,5]")]
    ScoreRange(f64),

    #[error("endpoint returned {status}: {body}")]
    Endpoint { status: u16, body: String },

    #[error("request timed out after {0}s")]
    Timeout(u64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("http transport error: {0}")]
    Http(String),
}

fn fmt_line(line: Option<usize>) -> String {
    match line {
        Some(n) => format!(":{n}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
