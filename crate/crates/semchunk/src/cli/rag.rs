//! `rag`, `judge`, and `report`: answer-quality scoring and report merging.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::corpus_io::canonical::{sha256_digest, write_canonical_json};
use crate::corpus_io::qa::QAItem;
use crate::corpus_io::{
    load_answers, load_chunk_texts, load_page_texts, load_qa, load_retrieval_results,
    load_verdicts, write_answers, write_verdicts, AnswerRecord, Diagnostic,
};
use crate::error::{Error, Result};
use crate::par;
use crate::rag_eval::{
    judge as judge_one, pipeline_score, JudgeVerdict, ScoreMode, StageOutputs,
    DEFAULT_JUDGE_THRESHOLD,
};
use crate::reports::{
    load_run_report, merge_run_reports, now_unix_ms, write_meta, RunMeta, RunReport,
};
use crate::retrieval::{LcsGranularity, DEFAULT_TOP_K};
use crate::vlm_convert::{AnswerContext, ConvertParams, VlmClient};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Retrieval,
    Generation,
    Overall,
}

impl From<ModeArg> for ScoreMode {
    fn from(m: ModeArg) -> ScoreMode {
        match m {
            ModeArg::Retrieval => ScoreMode::Retrieval,
            ModeArg::Generation => ScoreMode::Generation,
            ModeArg::Overall => ScoreMode::Overall,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LcsLevelArg {
    Char,
    Word,
}

impl From<LcsLevelArg> for LcsGranularity {
    fn from(l: LcsLevelArg) -> LcsGranularity {
        match l {
            LcsLevelArg::Char => LcsGranularity::Char,
            LcsLevelArg::Word => LcsGranularity::Word,
        }
    }
}

/// Endpoint flags for commands where the endpoint is optional (answers or
/// verdicts may arrive precomputed).
#[derive(Args, Clone)]
pub struct OptionalEndpointArgs {
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 0.3)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0.95)]
    pub top_p: f64,
    #[arg(long, default_value_t = 8192)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = 1.1)]
    pub repetition_penalty: f64,
    #[arg(long, default_value_t = 120)]
    pub timeout: u64,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

impl OptionalEndpointArgs {
    fn to_params(&self, what: &str) -> Result<ConvertParams> {
        let (Some(endpoint), Some(model)) = (&self.endpoint, &self.model) else {
            return Err(Error::InvalidInput(format!(
                "{what} requires --endpoint and --model (or precomputed inputs)"
            )));
        };
        let mut params = ConvertParams::new(endpoint, model);
        params.temperature = self.temperature;
        params.top_p = self.top_p;
        params.max_tokens = self.max_tokens;
        params.repetition_penalty = self.repetition_penalty;
        params.timeout_s = self.timeout;
        params.retries = self.retries;
        params.max_in_flight = self.jobs;
        params.api_key = std::env::var(super::API_KEY_ENV).ok();
        Ok(params)
    }
}

#[derive(Args)]
pub struct RagArgs {
    /// QA set (JSONL)
    #[arg(long)]
    qa: PathBuf,
    /// Pipeline stage to score
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Retrieval results (JSONL); needed for retrieval mode and for
    /// generating overall answers
    #[arg(long)]
    retrieval: Option<PathBuf>,
    /// Unit texts: page texts (unit = page)
    #[arg(long, conflicts_with = "chunk_texts")]
    pages: Option<PathBuf>,
    /// Unit texts: chunk texts (unit = chunk)
    #[arg(long)]
    chunk_texts: Option<PathBuf>,
    /// Precomputed answers (JSONL); otherwise generated via the endpoint
    #[arg(long)]
    answers: Option<PathBuf>,
    /// Precomputed judge verdicts (JSONL)
    #[arg(long)]
    verdicts: Option<PathBuf>,
    /// Score overall mode with judge verdicts instead of token F1
    #[arg(long)]
    judge: bool,
    #[arg(long, default_value_t = DEFAULT_JUDGE_THRESHOLD)]
    judge_threshold: f64,
    /// Retrieved texts fed to answer generation
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    /// LCS granularity for retrieval scoring
    #[arg(long, value_enum, default_value_t = LcsLevelArg::Char)]
    lcs_level: LcsLevelArg,
    #[command(flatten)]
    endpoint: OptionalEndpointArgs,
    /// Run identifier recorded in the report (default: config digest prefix)
    #[arg(long)]
    run_id: Option<String>,
    /// Output report (JSON)
    #[arg(short, long)]
    out: PathBuf,
    /// Write generated answers here (JSONL)
    #[arg(long)]
    out_answers: Option<PathBuf>,
    /// Write computed verdicts here (JSONL)
    #[arg(long)]
    out_verdicts: Option<PathBuf>,
    #[arg(long)]
    strict_warnings: bool,
}

#[derive(Serialize)]
struct RagConfig<'a> {
    qa: &'a PathBuf,
    mode: &'a str,
    retrieval: &'a Option<PathBuf>,
    pages: &'a Option<PathBuf>,
    chunk_texts: &'a Option<PathBuf>,
    answers: &'a Option<PathBuf>,
    verdicts: &'a Option<PathBuf>,
    judge: bool,
    judge_threshold: f64,
    top_k: usize,
    lcs_level: &'a str,
    model: &'a Option<String>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    repetition_penalty: f64,
}

fn load_unit_texts(
    pages: Option<&PathBuf>,
    chunk_texts: Option<&PathBuf>,
) -> Result<Option<BTreeMap<String, String>>> {
    match (pages, chunk_texts) {
        (Some(path), None) => Ok(Some(
            load_page_texts(path)?
                .into_iter()
                .map(|p| (p.page_id, p.text))
                .collect(),
        )),
        (None, Some(path)) => Ok(Some(
            load_chunk_texts(path)?
                .into_iter()
                .map(|c| (c.chunk_id, c.markdown))
                .collect(),
        )),
        (None, None) => Ok(None),
        _ => unreachable!("clap conflicts_with prevents both"),
    }
}

/// Ranked texts per qa item, resolved against the unit-text table.
fn resolve_retrieved_texts(
    retrieval_path: &std::path::Path,
    unit_texts: &BTreeMap<String, String>,
    top_k: usize,
) -> Result<BTreeMap<String, Vec<String>>> {
    let results = load_retrieval_results(retrieval_path)?;
    let mut out = BTreeMap::new();
    for r in results {
        let mut texts = Vec::new();
        for ranked in r.ranked.iter().take(top_k) {
            let text = unit_texts.get(&ranked.unit_id).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "retrieved unit `{}` has no text in the unit-text table",
                    ranked.unit_id
                ))
            })?;
            texts.push(text.clone());
        }
        out.insert(r.query_id, texts);
    }
    Ok(out)
}

fn generate_answers(
    client: &VlmClient,
    qa: &[QAItem],
    contexts: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<AnswerRecord>> {
    let generated = par::map_bounded(client.params().max_in_flight, qa, |item| {
        let context = contexts.get(&item.qa_id).ok_or_else(|| {
            Error::MissingStageOutput {
                qa_id: item.qa_id.clone(),
                what: "generation context",
            }
        })?;
        let answer =
            client.generate_answer(&item.question, &AnswerContext::Texts(context.clone()))?;
        Ok(AnswerRecord {
            qa_id: item.qa_id.clone(),
            answer,
        })
    });
    generated.into_iter().collect()
}

fn compute_verdicts(
    client: &VlmClient,
    qa: &[QAItem],
    answers: &BTreeMap<String, String>,
    threshold: f64,
) -> Result<Vec<JudgeVerdict>> {
    let verdicts = par::map_bounded(client.params().max_in_flight, qa, |item| {
        let answer = answers
            .get(&item.qa_id)
            .ok_or_else(|| Error::MissingStageOutput {
                qa_id: item.qa_id.clone(),
                what: "generated answer",
            })?;
        judge_one(
            client,
            &item.qa_id,
            &item.question,
            &item.gold_answer,
            answer,
            threshold,
        )
    });
    verdicts.into_iter().collect()
}

pub fn run_rag(args: RagArgs) -> Result<ExitCode> {
    let started = now_unix_ms();
    let mode: ScoreMode = args.mode.into();
    let lcs_level: LcsGranularity = args.lcs_level.into();
    let digest = sha256_digest(&RagConfig {
        qa: &args.qa,
        mode: mode.as_str(),
        retrieval: &args.retrieval,
        pages: &args.pages,
        chunk_texts: &args.chunk_texts,
        answers: &args.answers,
        verdicts: &args.verdicts,
        judge: args.judge,
        judge_threshold: args.judge_threshold,
        top_k: args.top_k,
        lcs_level: match args.lcs_level {
            LcsLevelArg::Char => "char",
            LcsLevelArg::Word => "word",
        },
        model: &args.endpoint.model,
        temperature: args.endpoint.temperature,
        top_p: args.endpoint.top_p,
        max_tokens: args.endpoint.max_tokens,
        repetition_penalty: args.endpoint.repetition_penalty,
    })?;

    let loaded_qa = load_qa(&args.qa)?;
    let qa = loaded_qa.value;
    let mut warnings: Vec<Diagnostic> = loaded_qa.warnings;
    let unit_texts = load_unit_texts(args.pages.as_ref(), args.chunk_texts.as_ref())?;

    let mut outputs = StageOutputs::default();
    match mode {
        ScoreMode::Retrieval => {
            let retrieval = args.retrieval.as_ref().ok_or_else(|| {
                Error::InvalidInput("retrieval mode requires --retrieval".into())
            })?;
            let unit_texts = unit_texts.as_ref().ok_or_else(|| {
                Error::InvalidInput(
                    "retrieval mode requires unit texts (--pages or --chunk-texts)".into(),
                )
            })?;
            let texts = resolve_retrieved_texts(retrieval, unit_texts, args.top_k)?;
            outputs.retrieved_texts = texts.into_iter().collect();
        }
        ScoreMode::Generation | ScoreMode::Overall => {
            let answers: Vec<AnswerRecord> = match &args.answers {
                Some(path) => load_answers(path)?,
                None => {
                    let client = VlmClient::new(
                        args.endpoint.to_params("answer generation")?,
                        args.endpoint.cache_dir.clone(),
                    )?;
                    let contexts: BTreeMap<String, Vec<String>> = match mode {
                        ScoreMode::Generation => {
                            // ground-truth pages as context
                            let unit_texts = unit_texts.as_ref().ok_or_else(|| {
                                Error::InvalidInput(
                                    "generation mode requires --pages for ground-truth context"
                                        .into(),
                                )
                            })?;
                            let mut map = BTreeMap::new();
                            for item in &qa {
                                let mut texts = Vec::new();
                                for pid in &item.source_page_ids {
                                    let text = unit_texts.get(pid).ok_or_else(|| {
                                        Error::InvalidInput(format!(
                                            "qa {} references page `{pid}` with no text",
                                            item.qa_id
                                        ))
                                    })?;
                                    texts.push(text.clone());
                                }
                                map.insert(item.qa_id.clone(), texts);
                            }
                            map
                        }
                        _ => {
                            // retrieved texts as context
                            let retrieval = args.retrieval.as_ref().ok_or_else(|| {
                                Error::InvalidInput(
                                    "overall mode without --answers requires --retrieval".into(),
                                )
                            })?;
                            let unit_texts = unit_texts.as_ref().ok_or_else(|| {
                                Error::InvalidInput(
                                    "overall mode requires unit texts (--pages or --chunk-texts)"
                                        .into(),
                                )
                            })?;
                            resolve_retrieved_texts(retrieval, unit_texts, args.top_k)?
                        }
                    };
                    let generated = generate_answers(&client, &qa, &contexts)?;
                    if let Some(path) = &args.out_answers {
                        write_answers(path, &generated)?;
                    }
                    generated
                }
            };
            for a in answers {
                outputs.answers.insert(a.qa_id, a.answer);
            }

            if args.judge && mode == ScoreMode::Overall {
                let verdicts: Vec<JudgeVerdict> = match &args.verdicts {
                    Some(path) => load_verdicts(path)?,
                    None => {
                        let client = VlmClient::new(
                            args.endpoint.to_params("judging")?,
                            args.endpoint.cache_dir.clone(),
                        )?;
                        let computed = compute_verdicts(
                            &client,
                            &qa,
                            &outputs.answers.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
                            args.judge_threshold,
                        )?;
                        if let Some(path) = &args.out_verdicts {
                            write_verdicts(path, &computed)?;
                        }
                        computed
                    }
                };
                for v in verdicts {
                    outputs.verdicts.insert(v.qa_id.clone(), v);
                }
            }
        }
    }

    let skipped = qa
        .iter()
        .filter(|i| {
            mode == ScoreMode::Retrieval
                && crate::retrieval::normalize_text(&i.evidence).is_empty()
        })
        .count();
    if skipped > 0 {
        warnings.push(Diagnostic::new(
            "retrieval scoring",
            format!("{skipped} item(s) skipped: evidence empty after normalization"),
        ));
    }

    let report = pipeline_score(&qa, mode, &outputs, args.judge, lcs_level)?;
    let run_id = args
        .run_id
        .clone()
        .unwrap_or_else(|| format!("run-{}", &digest[..12]));
    let run_report = RunReport::from_category_report(run_id, mode.as_str(), &report, &digest);
    write_canonical_json(&args.out, &run_report)?;
    write_meta(
        &args.out,
        &RunMeta {
            started_unix_ms: started,
            duration_ms: now_unix_ms().saturating_sub(started),
            mean_wall_time_s: None,
        },
    )?;
    println!(
        "rag {}: overall {:.1} over {} item(s)",
        mode.as_str(),
        run_report.overall,
        run_report.n_items
    );
    super::finish(&warnings, args.strict_warnings)
}

#[derive(Args)]
pub struct JudgeArgs {
    #[arg(long)]
    qa: PathBuf,
    /// Generated answers to judge (JSONL)
    #[arg(long)]
    answers: PathBuf,
    #[arg(long, default_value_t = DEFAULT_JUDGE_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    endpoint: super::EndpointArgs,
    /// Output verdicts (JSONL)
    #[arg(short, long)]
    out: PathBuf,
}

pub fn run_judge(args: JudgeArgs) -> Result<ExitCode> {
    let qa = load_qa(&args.qa)?.value;
    let answers: BTreeMap<String, String> = load_answers(&args.answers)?
        .into_iter()
        .map(|a| (a.qa_id, a.answer))
        .collect();
    let client = VlmClient::new(args.endpoint.to_params(), args.endpoint.cache_dir.clone())?;
    let verdicts = compute_verdicts(&client, &qa, &answers, args.threshold)?;
    write_verdicts(&args.out, &verdicts)?;
    let correct = verdicts.iter().filter(|v| v.correct).count();
    println!("judge: {}/{} correct", correct, verdicts.len());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct ReportArgs {
    /// Run reports to merge
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "merged")]
    run_id: String,
    #[arg(short, long)]
    out: PathBuf,
}

pub fn run_report(args: ReportArgs) -> Result<ExitCode> {
    let reports = args
        .inputs
        .iter()
        .map(|p| load_run_report(p))
        .collect::<Result<Vec<_>>>()?;
    let digest = sha256_digest(&args.inputs)?;
    let merged = merge_run_reports(&args.run_id, &reports, &digest)?;
    write_canonical_json(&args.out, &merged)?;
    println!(
        "report: merged {} run(s), overall {:.1}",
        merged.n_runs, merged.overall
    );
    Ok(ExitCode::SUCCESS)
}
