//! `index` and `retrieve`: BM25 indexing and retrieval (text or image
//! embeddings).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use serde::Serialize;

use crate::corpus_io::canonical::sha256_digest;
use crate::corpus_io::records::write_index;
use crate::corpus_io::{
    load_chunk_texts, load_embeddings, load_page_texts, load_qa, write_retrieval_results,
};
use crate::error::{Error, Result};
use crate::par;
use crate::reports::{now_unix_ms, write_meta, RunMeta};
use crate::retrieval::{
    bm25_build, bm25_query, rank_images, RetrievalResult, DEFAULT_B, DEFAULT_K1, DEFAULT_TOP_K,
};

#[derive(Args)]
pub struct IndexArgs {
    /// Page texts to index (unit = page)
    #[arg(long, conflicts_with = "chunk_texts")]
    pages: Option<PathBuf>,
    /// Chunk texts to index (unit = chunk)
    #[arg(long)]
    chunk_texts: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K1)]
    k1: f64,
    #[arg(long, default_value_t = DEFAULT_B)]
    b: f64,
    /// Output index file (JSON)
    #[arg(short, long)]
    out: PathBuf,
}

pub fn run_index(args: IndexArgs) -> Result<ExitCode> {
    let units: Vec<(String, String)> = match (&args.pages, &args.chunk_texts) {
        (Some(pages), None) => load_page_texts(pages)?
            .into_iter()
            .map(|p| (p.page_id, p.text))
            .collect(),
        (None, Some(chunk_texts)) => load_chunk_texts(chunk_texts)?
            .into_iter()
            .map(|c| (c.chunk_id, c.markdown))
            .collect(),
        _ => {
            return Err(Error::InvalidInput(
                "exactly one of --pages or --chunk-texts is required".into(),
            ))
        }
    };
    let index = bm25_build(&units, args.k1, args.b)?;
    write_index(&args.out, &index)?;
    println!("index: {} units", index.len());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct RetrieveArgs {
    /// QA set; questions become queries (BM25 mode)
    #[arg(long)]
    qa: Option<PathBuf>,
    /// BM25 index file
    #[arg(long)]
    index: Option<PathBuf>,
    /// Document embeddings (MaxSim mode)
    #[arg(long, requires = "query_embeddings", conflicts_with = "index")]
    doc_embeddings: Option<PathBuf>,
    /// Query embeddings; unit_id is the query id (MaxSim mode)
    #[arg(long)]
    query_embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    /// Output retrieval results (JSONL)
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct RetrieveConfig<'a> {
    qa: &'a Option<PathBuf>,
    index: &'a Option<PathBuf>,
    doc_embeddings: &'a Option<PathBuf>,
    query_embeddings: &'a Option<PathBuf>,
    top_k: usize,
}

pub fn run_retrieve(args: RetrieveArgs) -> Result<ExitCode> {
    if args.top_k == 0 {
        return Err(Error::InvalidInput("--top-k must be >= 1".into()));
    }
    let started = now_unix_ms();
    let _digest = sha256_digest(&RetrieveConfig {
        qa: &args.qa,
        index: &args.index,
        doc_embeddings: &args.doc_embeddings,
        query_embeddings: &args.query_embeddings,
        top_k: args.top_k,
    })?;

    let results: Vec<RetrievalResult> = match (&args.index, &args.doc_embeddings) {
        (Some(index_path), None) => {
            let qa_path = args.qa.as_ref().ok_or_else(|| {
                Error::InvalidInput("--qa is required for BM25 retrieval".into())
            })?;
            let qa = load_qa(qa_path)?.value;
            let index = crate::corpus_io::records::load_index(index_path)?;
            par::map(&qa, |item| {
                bm25_query(&index, &item.qa_id, &item.question, args.top_k)
            })
        }
        (None, Some(doc_path)) => {
            let queries = load_embeddings(
                args.query_embeddings
                    .as_ref()
                    .expect("clap enforces --query-embeddings"),
            )?;
            let docs = load_embeddings(doc_path)?;
            let ranked = par::map(&queries, |q| rank_images(q, &docs, args.top_k));
            ranked.into_iter().collect::<Result<Vec<_>>>()?
        }
        _ => {
            return Err(Error::InvalidInput(
                "exactly one retrieval mode required: --index or --doc-embeddings".into(),
            ))
        }
    };

    write_retrieval_results(&args.out, &results)?;
    write_meta(
        &args.out,
        &RunMeta {
            started_unix_ms: started,
            duration_ms: now_unix_ms().saturating_sub(started),
            mean_wall_time_s: None,
        },
    )?;
    println!("retrieve: {} queries, top-{}", results.len(), args.top_k);
    Ok(ExitCode::SUCCESS)
}
