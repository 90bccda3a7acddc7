//! JSON Lines records produced and consumed between pipeline stages:
//! chunk manifests, converted texts, embeddings, retrieval results,
//! generated answers, and judge verdicts — plus the serialized BM25 index.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chunker::Chunk;
use crate::error::{Error, Result};
use crate::rag_eval::JudgeVerdict;
use crate::retrieval::bm25::{IndexedDoc, TextIndex};
use crate::retrieval::maxsim::MultiVec;
use crate::retrieval::RetrievalResult;
use crate::vlm_convert::PageText;

use super::{json_error, read_utf8, write_jsonl};

/// Converted markdown for one chunk, as stored between stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkTextRecord {
    pub chunk_id: String,
    pub page_id: String,
    pub markdown: String,
}

/// A generated answer for one QA item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub qa_id: String,
    pub answer: String,
}

fn load_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    super::for_each_jsonl_line(path, |line_no, line| {
        let record: T =
            serde_json::from_str(line).map_err(|e| json_error(path, Some(line_no), &e))?;
        out.push(record);
        Ok(())
    })?;
    Ok(out)
}

pub fn load_chunks(path: &Path) -> Result<Vec<Chunk>> {
    let chunks: Vec<Chunk> = load_jsonl(path)?;
    for c in &chunks {
        c.bbox.validate().map_err(|e| Error::Geometry {
            context: format!("chunk {}", c.chunk_id),
            msg: e.to_string(),
        })?;
    }
    Ok(chunks)
}

pub fn write_chunks(path: &Path, chunks: &[Chunk]) -> Result<()> {
    write_jsonl(path, chunks)
}

pub fn load_chunk_texts(path: &Path) -> Result<Vec<ChunkTextRecord>> {
    load_jsonl(path)
}

pub fn write_chunk_texts(path: &Path, records: &[ChunkTextRecord]) -> Result<()> {
    write_jsonl(path, records)
}

pub fn load_page_texts(path: &Path) -> Result<Vec<PageText>> {
    load_jsonl(path)
}

pub fn write_page_texts(path: &Path, records: &[PageText]) -> Result<()> {
    write_jsonl(path, records)
}

pub fn load_answers(path: &Path) -> Result<Vec<AnswerRecord>> {
    load_jsonl(path)
}

pub fn write_answers(path: &Path, records: &[AnswerRecord]) -> Result<()> {
    write_jsonl(path, records)
}

pub fn load_verdicts(path: &Path) -> Result<Vec<JudgeVerdict>> {
    load_jsonl(path)
}

pub fn write_verdicts(path: &Path, records: &[JudgeVerdict]) -> Result<()> {
    write_jsonl(path, records)
}

pub fn load_retrieval_results(path: &Path) -> Result<Vec<RetrievalResult>> {
    load_jsonl(path)
}

pub fn write_retrieval_results(path: &Path, records: &[RetrievalResult]) -> Result<()> {
    write_jsonl(path, records)
}

/// Embedding file: JSON Lines of `{unit_id, vectors: [[...]]}`.
pub fn load_embeddings(path: &Path) -> Result<Vec<MultiVec>> {
    #[derive(Deserialize)]
    struct Raw {
        unit_id: String,
        vectors: Vec<Vec<f32>>,
    }
    let raws: Vec<Raw> = load_jsonl(path)?;
    raws.into_iter()
        .map(|r| MultiVec::new(r.unit_id, r.vectors))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    k1: f64,
    b: f64,
    documents: Vec<IndexedDoc>,
}

/// Persist a BM25 index (documents + parameters; postings rebuild on load).
pub fn write_index(path: &Path, index: &TextIndex) -> Result<()> {
    super::write_canonical_json(
        path,
        &IndexFile {
            k1: index.k1,
            b: index.b,
            documents: index.documents.clone(),
        },
    )
}

pub fn load_index(path: &Path) -> Result<TextIndex> {
    let text = read_utf8(path)?;
    let file: IndexFile = serde_json::from_str(&text).map_err(|e| json_error(path, None, &e))?;
    TextIndex::from_documents(file.documents, file.k1, file.b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::layout::BoxCategory;
    use crate::retrieval::bm25::bm25_build;

    #[test]
    fn chunk_manifest_round_trip() {
        let chunks = vec![Chunk {
            chunk_id: "p1__0".into(),
            page_id: "p1".into(),
            bbox: BBox::new(0.0, 0.0, 10.5, 20.25).unwrap(),
            category: BoxCategory::SemanticBox,
            order_index: 0,
            confidence: 0.9,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chunks.jsonl");
        write_chunks(&path, &chunks).unwrap();
        let loaded = load_chunks(&path).unwrap();
        assert_eq!(loaded, chunks);

        // a second write is byte-identical
        let path2 = dir.path().join("chunks2.jsonl");
        write_chunks(&path2, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn corrupt_chunk_bbox_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chunks.jsonl");
        std::fs::write(
            &path,
            r#"{"chunk_id":"c","page_id":"p","bbox":{"x0":5,"y0":0,"x1":5,"y1":10},"category":"semantic_box","order_index":0,"confidence":1}"#,
        )
        .unwrap();
        assert!(matches!(
            load_chunks(&path).unwrap_err(),
            Error::Geometry { .. }
        ));
    }

    #[test]
    fn embeddings_load_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"unit_id":"a","vectors":[[1.0,0.0],[0.0,1.0]]}"#,
                "\n",
                r#"{"unit_id":"b","vectors":[[0.5,0.5]]}"#,
            ),
        )
        .unwrap();
        let embs = load_embeddings(&path).unwrap();
        assert_eq!(embs.len(), 2);
        assert_eq!(embs[0].dim(), 2);

        std::fs::write(&path, r#"{"unit_id":"bad","vectors":[[1.0],[1.0,2.0]]}"#).unwrap();
        assert!(load_embeddings(&path).is_err());
    }

    #[test]
    fn index_round_trip_preserves_scores() {
        let units = vec![
            ("d1".to_string(), "cat sat".to_string()),
            ("d2".to_string(), "dog ran".to_string()),
        ];
        let idx = bm25_build(&units, 1.5, 0.75).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        write_index(&path, &idx).unwrap();
        let loaded = load_index(&path).unwrap();
        let a = crate::retrieval::bm25::bm25_query(&idx, "q", "cat", 5);
        let b = crate::retrieval::bm25::bm25_query(&loaded, "q", "cat", 5);
        assert_eq!(a, b);
    }
}
