//! `chunk` and `stats`: crop planning and granularity statistics.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use serde::Serialize;

use crate::chunker::{
    filter_confidence, granularity_stats, plan_crops, whole_page_chunk, Chunk, CropOptions,
    GranularityScope, DEFAULT_CONFIDENCE_THRESHOLD,
};
use crate::corpus_io::canonical::{sha256_digest, write_canonical_json};
use crate::corpus_io::detections::to_layout_prediction;
use crate::corpus_io::{
    load_chunks, load_detections, load_label_map, load_manifest, write_chunks, Diagnostic,
    LabelMap,
};
use crate::crops::{load_page_image, render_crops_to_dir};
use crate::error::{Error, Result};
use crate::layout::LayoutPrediction;
use crate::reports::{now_unix_ms, write_meta, RunMeta, StatsReport};

#[derive(Args)]
pub struct ChunkArgs {
    /// Corpus manifest (page list + dimensions)
    #[arg(long)]
    manifest: PathBuf,
    /// Detection file; mutually exclusive with --whole-page
    #[arg(long, conflicts_with = "whole_page")]
    detections: Option<PathBuf>,
    /// One full-page chunk per page instead of detections
    #[arg(long)]
    whole_page: bool,
    #[arg(long)]
    label_map: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    confidence: f64,
    /// Padding in pixels around each box before clamping
    #[arg(long, default_value_t = 0.0)]
    padding: f64,
    /// Drop boxes almost fully contained in another box
    #[arg(long)]
    suppress_contained: bool,
    /// Emit a whole-page chunk for pages whose boxes all drop out
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    fallback_whole_page: bool,
    /// Base directory for page images (default: the manifest's directory)
    #[arg(long)]
    images_dir: Option<PathBuf>,
    /// Skip crop rendering (metric-only runs need no image decoding)
    #[arg(long)]
    no_render: bool,
    /// Directory for rendered crops
    #[arg(long)]
    crops_dir: Option<PathBuf>,
    /// Output chunk manifest (JSONL)
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    strict_warnings: bool,
}

#[derive(Serialize)]
struct ChunkConfig<'a> {
    manifest: &'a PathBuf,
    detections: &'a Option<PathBuf>,
    whole_page: bool,
    label_map: &'a Option<PathBuf>,
    confidence: f64,
    padding: f64,
    suppress_contained: bool,
    fallback_whole_page: bool,
}

pub fn run_chunk(args: ChunkArgs) -> Result<ExitCode> {
    if args.detections.is_none() && !args.whole_page {
        return Err(Error::InvalidInput(
            "exactly one chunk source required: --detections or --whole-page".into(),
        ));
    }
    let started = now_unix_ms();
    let digest = sha256_digest(&ChunkConfig {
        manifest: &args.manifest,
        detections: &args.detections,
        whole_page: args.whole_page,
        label_map: &args.label_map,
        confidence: args.confidence,
        padding: args.padding,
        suppress_contained: args.suppress_contained,
        fallback_whole_page: args.fallback_whole_page,
    })?;

    let manifest = load_manifest(&args.manifest)?;
    let mut warnings: Vec<Diagnostic> = Vec::new();
    let mut all_chunks: Vec<Chunk> = Vec::new();

    let detections = match &args.detections {
        Some(path) => {
            let loaded = load_detections(path)?;
            warnings.extend(loaded.warnings);
            Some(loaded.value)
        }
        None => None,
    };
    let label_map = match &args.label_map {
        Some(path) => load_label_map(path)?,
        None => LabelMap::identity(),
    };

    for entry in &manifest.pages {
        let page = manifest.page_geom(&entry.page_id).expect("page in manifest");
        let chunks = if let Some(dets) = &detections {
            let pred = match dets.iter().find(|d| d.page_id == entry.page_id) {
                Some(doc) => to_layout_prediction(doc, &page, &label_map)?,
                None => LayoutPrediction::new(page.clone(), Vec::new()),
            };
            let kept = filter_confidence(&pred, args.confidence);
            let (chunks, crop_warnings) = plan_crops(
                &kept,
                CropOptions {
                    padding_px: args.padding,
                    suppress_contained: args.suppress_contained,
                },
            );
            for w in crop_warnings {
                warnings.push(Diagnostic::new(
                    format!("page {}, box {}", w.page_id, w.box_index),
                    w.reason,
                ));
            }
            if chunks.is_empty() && args.fallback_whole_page {
                warnings.push(Diagnostic::new(
                    format!("page {}", entry.page_id),
                    "no boxes survived; falling back to a whole-page chunk",
                ));
                whole_page_chunk(&page)
            } else {
                chunks
            }
        } else {
            whole_page_chunk(&page)
        };
        all_chunks.extend(chunks);
    }

    write_chunks(&args.out, &all_chunks)?;

    if !args.no_render {
        let crops_dir = args.crops_dir.clone().ok_or_else(|| {
            Error::InvalidInput("--crops-dir is required unless --no-render is set".into())
        })?;
        let base = args.images_dir.clone().unwrap_or_else(|| {
            args.manifest
                .parent()
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."))
        });
        for entry in &manifest.pages {
            let page_chunks: Vec<Chunk> = all_chunks
                .iter()
                .filter(|c| c.page_id == entry.page_id)
                .cloned()
                .collect();
            if page_chunks.is_empty() {
                continue;
            }
            let image = load_page_image(&base.join(&entry.image_uri))?;
            render_crops_to_dir(&image, &page_chunks, &crops_dir)?;
        }
    }

    write_meta(
        &args.out,
        &RunMeta {
            started_unix_ms: started,
            duration_ms: now_unix_ms().saturating_sub(started),
            mean_wall_time_s: None,
        },
    )?;
    println!(
        "chunk: {} chunks over {} pages (digest {})",
        all_chunks.len(),
        manifest.pages.len(),
        &digest[..12]
    );
    super::finish(&warnings, args.strict_warnings)
}

#[derive(Args)]
pub struct StatsArgs {
    /// Chunk manifest (JSONL)
    #[arg(long)]
    chunks: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Restrict statistics to semantic boxes
    #[arg(long)]
    semantic_only: bool,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct StatsConfig<'a> {
    chunks: &'a PathBuf,
    manifest: &'a PathBuf,
    semantic_only: bool,
}

pub fn run_stats(args: StatsArgs) -> Result<ExitCode> {
    let started = now_unix_ms();
    let digest = sha256_digest(&StatsConfig {
        chunks: &args.chunks,
        manifest: &args.manifest,
        semantic_only: args.semantic_only,
    })?;
    let manifest = load_manifest(&args.manifest)?;
    let chunks = load_chunks(&args.chunks)?;

    let mut by_page: BTreeMap<&str, Vec<Chunk>> = BTreeMap::new();
    for c in &chunks {
        by_page.entry(c.page_id.as_str()).or_default().push(c.clone());
    }
    let chunk_sets: Vec<_> = manifest
        .pages
        .iter()
        .map(|entry| {
            let geom = manifest.page_geom(&entry.page_id).expect("page in manifest");
            let page_chunks = by_page.remove(entry.page_id.as_str()).unwrap_or_default();
            (geom, page_chunks)
        })
        .collect();
    if let Some(orphan) = by_page.keys().next() {
        return Err(Error::InvalidInput(format!(
            "chunk manifest references page `{orphan}` absent from the corpus manifest"
        )));
    }

    let scope = if args.semantic_only {
        GranularityScope::SemanticOnly
    } else {
        GranularityScope::AllBoxes
    };
    let stats = granularity_stats(&chunk_sets, scope)?;
    println!(
        "stats: {:.2} chunks/image, {:.1}% relative size over {} pages",
        stats.chunks_per_image, stats.relative_chunk_size_pct, stats.n_pages
    );
    write_canonical_json(
        &args.out,
        &StatsReport {
            stats,
            config_digest: digest,
        },
    )?;
    write_meta(
        &args.out,
        &RunMeta {
            started_unix_ms: started,
            duration_ms: now_unix_ms().saturating_sub(started),
            mean_wall_time_s: None,
        },
    )?;
    Ok(ExitCode::SUCCESS)
}
