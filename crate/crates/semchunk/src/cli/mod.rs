//! Command-line surface: one subcommand per pipeline stage plus report
//! merging. Every command writes canonical reports carrying a config digest;
//! timestamps and durations go to `.meta.json` sidecars so reruns stay
//! byte-identical. Exit codes: 0 clean, 1 error, 2 warnings under
//! `--strict-warnings`.

mod chunking;
mod convert;
mod layout;
mod rag;
mod retrieve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::corpus_io::Diagnostic;
use crate::error::Result;

/// Environment variable holding the endpoint API key.
pub const API_KEY_ENV: &str = "SEMCHUNK_API_KEY";

#[derive(Parser)]
#[command(
    name = "semchunk",
    version,
    about = "Semantic layout chunking and RAG evaluation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score detections against annotations at one confidence threshold
    LayoutEval(layout::LayoutEvalArgs),
    /// Sweep detection metrics over confidence thresholds
    Sweep(layout::SweepArgs),
    /// Plan chunks from detections (or whole pages) and render crops
    Chunk(chunking::ChunkArgs),
    /// Granularity statistics over a chunk manifest
    Stats(chunking::StatsArgs),
    /// Convert chunk crops to markdown via a VLM endpoint
    Convert(convert::ConvertArgs),
    /// Build a BM25 index over page or chunk texts
    Index(retrieve::IndexArgs),
    /// Run retrieval queries (BM25 or multi-vector MaxSim)
    Retrieve(retrieve::RetrieveArgs),
    /// Score a pipeline stage over a QA set
    Rag(rag::RagArgs),
    /// Judge generated answers with an LLM endpoint
    Judge(rag::JudgeArgs),
    /// Merge run reports (mean across runs)
    Report(rag::ReportArgs),
}

/// Flags shared by endpoint-calling commands.
#[derive(Args, Clone)]
pub struct EndpointArgs {
    /// Chat-completions base URL (e.g. http://localhost:8000)
    #[arg(long)]
    pub endpoint: String,
    /// Model name sent in requests
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 0.3)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0.95)]
    pub top_p: f64,
    #[arg(long, default_value_t = 8192)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = 1.1)]
    pub repetition_penalty: f64,
    /// Request timeout in seconds
    #[arg(long, default_value_t = 120)]
    pub timeout: u64,
    /// Retries on transient failures (exponential backoff)
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    /// Maximum concurrent requests
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
    /// Conversion cache directory
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

impl EndpointArgs {
    pub fn to_params(&self) -> crate::vlm_convert::ConvertParams {
        let mut params = crate::vlm_convert::ConvertParams::new(&self.endpoint, &self.model);
        params.temperature = self.temperature;
        params.top_p = self.top_p;
        params.max_tokens = self.max_tokens;
        params.repetition_penalty = self.repetition_penalty;
        params.timeout_s = self.timeout;
        params.retries = self.retries;
        params.max_in_flight = self.jobs;
        params.api_key = std::env::var(API_KEY_ENV).ok();
        params
    }
}

/// Entry point for the `semchunk` binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::LayoutEval(args) => layout::run_layout_eval(args),
        Command::Sweep(args) => layout::run_sweep(args),
        Command::Chunk(args) => chunking::run_chunk(args),
        Command::Stats(args) => chunking::run_stats(args),
        Command::Convert(args) => convert::run_convert(args),
        Command::Index(args) => retrieve::run_index(args),
        Command::Retrieve(args) => retrieve::run_retrieve(args),
        Command::Rag(args) => rag::run_rag(args),
        Command::Judge(args) => rag::run_judge(args),
        Command::Report(args) => rag::run_report(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Print a warning summary and pick the exit code.
fn finish(warnings: &[Diagnostic], strict_warnings: bool) -> Result<ExitCode> {
    if !warnings.is_empty() {
        eprintln!("{} warning(s):", warnings.len());
        for w in warnings {
            eprintln!("  {w}");
        }
        if strict_warnings {
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_thresholds(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| {
                crate::error::Error::InvalidInput(format!("bad threshold `{s}`: {e}"))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn thresholds_parse() {
        assert_eq!(
            parse_thresholds("0.2,0.3, 0.4").unwrap(),
            vec![0.2, 0.3, 0.4]
        );
        assert!(parse_thresholds("0.2,x").is_err());
    }
}
