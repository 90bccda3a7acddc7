//! Loading and storing of corpus artifacts: annotations, detector outputs,
//! QA sets, page manifests, and cached pipeline products.
//!
//! Native formats are JSON / JSON Lines with snake_case keys, always UTF-8
//! (a byte-order mark is rejected). Writers emit a canonical form — stable
//! key order and fixed 6-significant-digit float formatting — so reruns are
//! byte-identical and files diff cleanly.

pub mod annotations;
pub mod canonical;
pub mod detections;
pub mod manifest;
pub mod qa;
pub mod records;

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use annotations::{load_annotations, write_annotations, AnnotationDoc};
pub use canonical::{canonical_json_string, sha256_digest, write_canonical_json};
pub use detections::{
    load_detections, load_label_map, write_detections, Detection, DetectionDoc, LabelMap,
};
pub use manifest::{load_manifest, write_manifest, Manifest, PageEntry};
pub use qa::{load_qa, write_qa, QAItem, QaCategory};
pub use records::{
    load_answers, load_chunk_texts, load_chunks, load_embeddings, load_index, load_page_texts,
    load_retrieval_results, load_verdicts, write_answers, write_chunk_texts, write_chunks,
    write_index, write_page_texts, write_retrieval_results, write_verdicts, AnswerRecord,
    ChunkTextRecord,
};

/// A non-fatal problem found while loading; loaders never drop records
/// silently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Where the problem is ("page p3, boxes 0/2", "qa q7", ...).
    pub context: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(context: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            context: context.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "warning ({}): {}", self.context, self.message)
    }
}

/// A loaded value plus the warnings produced while loading it.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<Diagnostic>,
}

/// Read a file as UTF-8, rejecting a leading byte-order mark.
pub(crate) fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(&[0xEF, 0xBB, 0xBF]) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: None,
            msg: "file starts with a UTF-8 BOM; files must be plain UTF-8".into(),
        });
    }
    String::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: None,
        msg: format!("invalid UTF-8: {e}"),
    })
}

/// Classify a serde_json error as a parse (syntax) or schema (shape) error.
pub(crate) fn json_error(path: &Path, line: Option<usize>, err: &serde_json::Error) -> Error {
    let msg = err.to_string();
    match err.classify() {
        serde_json::error::Category::Data => Error::Schema {
            path: path.to_path_buf(),
            line,
            msg,
        },
        _ => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        },
    }
}

/// Parse a JSON Lines file, calling `f` with each non-empty line and its
/// 1-based line number.
pub(crate) fn for_each_jsonl_line<F>(path: &Path, mut f: F) -> Result<()>
where
    F: FnMut(usize, &str) -> Result<()>,
{
    let text = read_utf8(path)?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        f(i + 1, line)?;
    }
    Ok(())
}

/// Serialize records as canonical JSON Lines.
pub(crate) fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&canonical_json_string(r)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn bom_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bom.json");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(&[0xEF, 0xBB, 0xBF]).unwrap();
        f.write_all(b"{}").unwrap();
        drop(f);
        let err = read_utf8(&path).unwrap_err();
        assert!(err.to_string().contains("BOM"), "{err}");
    }
}
