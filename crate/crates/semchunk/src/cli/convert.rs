//! `convert`: chunk crops -> markdown via the VLM endpoint, page assembly,
//! and the cost report.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use crate::chunker::Chunk;
use crate::corpus_io::canonical::{sha256_digest, write_canonical_json};
use crate::corpus_io::{
    load_chunks, load_manifest, write_chunk_texts, write_page_texts, ChunkTextRecord, Diagnostic,
};
use crate::crops::{load_page_image, render_crop};
use crate::error::{Error, Result};
use crate::reports::{now_unix_ms, write_meta, CostReportFile, RunMeta};
use crate::vlm_convert::{
    assemble_page_text, cost_report, ChunkText, PageLog, PageText, VlmClient, DEFAULT_OCR_PROMPT,
};

#[derive(Args)]
pub struct ConvertArgs {
    /// Chunk manifest (JSONL)
    #[arg(long)]
    chunks: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Directory with pre-rendered crops; missing crops render on the fly
    #[arg(long)]
    crops_dir: Option<PathBuf>,
    /// Base directory for page images (default: the manifest's directory)
    #[arg(long)]
    images_dir: Option<PathBuf>,
    /// Conversion prompt file; defaults to the built-in OCR prompt
    #[arg(long)]
    prompt_file: Option<PathBuf>,
    /// Separator between chunk texts in the page sequence
    #[arg(long, default_value = "\n\n")]
    separator: String,
    #[command(flatten)]
    endpoint: super::EndpointArgs,
    /// Output page texts (JSONL)
    #[arg(long)]
    out_pages: PathBuf,
    /// Output per-chunk texts (JSONL)
    #[arg(long)]
    out_chunk_texts: PathBuf,
    /// Output cost report (JSON)
    #[arg(long)]
    out_cost: PathBuf,
    #[arg(long)]
    strict_warnings: bool,
}

#[derive(Serialize)]
struct ConvertConfig<'a> {
    chunks: &'a PathBuf,
    manifest: &'a PathBuf,
    model: &'a str,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    repetition_penalty: f64,
    prompt_digest: String,
    separator: &'a str,
}

pub fn run_convert(args: ConvertArgs) -> Result<ExitCode> {
    let started = now_unix_ms();
    let prompt = match &args.prompt_file {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT_OCR_PROMPT.to_string(),
    };
    let digest = sha256_digest(&ConvertConfig {
        chunks: &args.chunks,
        manifest: &args.manifest,
        model: &args.endpoint.model,
        temperature: args.endpoint.temperature,
        top_p: args.endpoint.top_p,
        max_tokens: args.endpoint.max_tokens,
        repetition_penalty: args.endpoint.repetition_penalty,
        prompt_digest: sha256_digest(&prompt)?,
        separator: &args.separator,
    })?;

    let manifest = load_manifest(&args.manifest)?;
    let chunks = load_chunks(&args.chunks)?;
    let client = VlmClient::new(args.endpoint.to_params(), args.endpoint.cache_dir.clone())?;

    let mut by_page: BTreeMap<&str, Vec<&Chunk>> = BTreeMap::new();
    for c in &chunks {
        by_page.entry(c.page_id.as_str()).or_default().push(c);
    }
    for page_chunks in by_page.values_mut() {
        page_chunks.sort_by_key(|c| c.order_index);
    }

    let images_base = args.images_dir.clone().unwrap_or_else(|| {
        args.manifest
            .parent()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
    });

    let mut warnings: Vec<Diagnostic> = Vec::new();
    let mut page_texts: Vec<PageText> = Vec::new();
    let mut chunk_records: Vec<ChunkTextRecord> = Vec::new();
    let mut page_logs: Vec<PageLog> = Vec::new();
    let mut cache_hits = 0usize;

    for entry in &manifest.pages {
        let Some(page_chunks) = by_page.get(entry.page_id.as_str()) else {
            warnings.push(Diagnostic::new(
                format!("page {}", entry.page_id),
                "no chunks in the manifest; page skipped",
            ));
            continue;
        };

        // gather crop bytes (pre-rendered file, else render from the page image)
        let mut items: Vec<(String, Vec<u8>)> = Vec::with_capacity(page_chunks.len());
        let mut page_image = None;
        for chunk in page_chunks {
            let crop_path = args
                .crops_dir
                .as_ref()
                .map(|d| d.join(chunk.crop_file_name()));
            let bytes = match crop_path {
                Some(p) if p.exists() => std::fs::read(&p)?,
                _ => {
                    if page_image.is_none() {
                        page_image =
                            Some(load_page_image(&images_base.join(&entry.image_uri))?);
                    }
                    render_crop(page_image.as_ref().unwrap(), chunk)?
                }
            };
            items.push((chunk.chunk_id.clone(), bytes));
        }

        let page_started = Instant::now();
        let results = client.convert_chunks(&items, &prompt);
        let mut texts: Vec<ChunkText> = Vec::with_capacity(results.len());
        for r in results {
            texts.push(r?);
        }
        let wall_time_s = page_started.elapsed().as_secs_f64();

        for t in &texts {
            if t.from_cache {
                cache_hits += 1;
            }
            if t.usage_missing {
                warnings.push(Diagnostic::new(
                    format!("chunk {}", t.chunk_id),
                    "endpoint reported no token usage; counts recorded as -1",
                ));
            }
            chunk_records.push(ChunkTextRecord {
                chunk_id: t.chunk_id.clone(),
                page_id: entry.page_id.clone(),
                markdown: t.markdown.clone(),
            });
        }
        page_texts.push(assemble_page_text(&entry.page_id, &texts, &args.separator)?);
        page_logs.push(PageLog {
            page_id: entry.page_id.clone(),
            n_chunks: texts.len(),
            input_tokens: texts.iter().map(|t| t.input_tokens.max(0)).sum(),
            output_tokens: texts.iter().map(|t| t.output_tokens.max(0)).sum(),
            wall_time_s,
        });
    }

    if page_logs.is_empty() {
        return Err(Error::EmptyCorpus("no pages were converted"));
    }

    write_page_texts(&args.out_pages, &page_texts)?;
    write_chunk_texts(&args.out_chunk_texts, &chunk_records)?;

    let report = cost_report(&page_logs)?;
    write_canonical_json(
        &args.out_cost,
        &CostReportFile {
            n_pages: report.n_pages,
            mean_input_tokens: report.mean_input_tokens,
            mean_output_tokens: report.mean_output_tokens,
            mean_chunks: report.mean_chunks,
            per_request_input_tokens: report.per_request_input_tokens,
            config_digest: digest.clone(),
        },
    )?;
    write_meta(
        &args.out_cost,
        &RunMeta {
            started_unix_ms: started,
            duration_ms: now_unix_ms().saturating_sub(started),
            mean_wall_time_s: Some(report.mean_wall_time_s),
        },
    )?;
    println!(
        "convert: {} pages, {} chunks ({} from cache), {:.1} input tokens/request",
        report.n_pages,
        chunk_records.len(),
        cache_hits,
        report.per_request_input_tokens
    );
    super::finish(&warnings, args.strict_warnings)
}
