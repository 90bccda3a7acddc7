//! Answer-quality scoring: token F1, judge-based binarization, and
//! category/overall aggregation.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus_io::qa::{QAItem, QaCategory};
use crate::error::{Error, Result};
use crate::retrieval::lcs::{lcs_score, LcsGranularity};
use crate::retrieval::normalize::normalize_text;
use crate::vlm_convert::VlmClient;

/// Judge scores at or above this count as correct.
pub const DEFAULT_JUDGE_THRESHOLD: f64 = 4.0;

/// Answer-judging prompt pair. `{query}`, `{reference_answer}`, and
/// `{generated_answer}` are substituted at request time; doubled braces
/// escape literal ones.
pub const JUDGE_SYSTEM_PROMPT: &str = r#"You are an expert evaluation system for a question answering chatbot.

You are given the following information:
- a user query and reference answer
- a generated answer

You may also be given a reference answer to use for reference in your evaluation.

Your job is to judge the relevance and correctness of the generated answer.
Output a single score that represents a holistic evaluation.
You must return your response in a line with only the score.
Do not return answers in any other format.
On a separate line provide your reasoning for the score as well.

Follow these guidelines for scoring:
- Your score has to be between 1 and 5, where 1 is the worst and 5 is the best.
- Your output format should be in JSON with fields "reason" and "score" shown below.
- If the generated answer is not relevant to the user query, you should give a score of 1.
- If the generated answer is relevant but contains mistakes, you should give a score between 2 and 3.
- If the generated answer is relevant and fully correct, you should give a score between 4 and 5.

Example Response in JSON format:
{{
    "reason": "The generated answer has the exact same metrics as the reference answer, but it is not as concise.",
    "score": "4.0"

}}"#;

pub const JUDGE_USER_PROMPT: &str = r#"## User Query
{query}

## Reference Answer
{reference_answer}

## Generated Answer
{generated_answer}"#;

/// Precision/recall/F1 over shared tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// One judged answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub qa_id: String,
    pub reason: String,
    pub score: f64,
    pub correct: bool,
}

/// Per-category means plus their macro average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub per_category: BTreeMap<QaCategory, f64>,
    pub overall: f64,
    pub n_items: usize,
}

/// Which pipeline stage a report scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    Retrieval,
    Generation,
    Overall,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::Retrieval => "retrieval",
            ScoreMode::Generation => "generation",
            ScoreMode::Overall => "overall",
        }
    }
}

/// Token-level F1 between a generated answer and the gold answer.
///
/// Tokens come from the shared normalizer; the intersection is a multiset
/// intersection (repeated tokens count up to their minimum multiplicity).
/// Two empty token lists score 1.0; exactly one empty scores 0.0.
pub fn token_f1(prediction: &str, gold: &str) -> F1Score {
    let pred = normalize_text(prediction);
    let gold = normalize_text(gold);
    if pred.is_empty() && gold.is_empty() {
        return F1Score {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    if pred.is_empty() || gold.is_empty() {
        return F1Score {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let mut gold_counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold {
        *gold_counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut common = 0usize;
    for t in &pred {
        if let Some(c) = gold_counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    F1Score {
        precision,
        recall,
        f1,
    }
}

/// Fill the judge prompt templates for one item.
pub fn render_judge_prompt(
    question: &str,
    reference_answer: &str,
    generated_answer: &str,
) -> (String, String) {
    let system = JUDGE_SYSTEM_PROMPT.replace("{{", "{").replace("}}", "}");
    let user = JUDGE_USER_PROMPT
        .replace("{query}", question)
        .replace("{reference_answer}", reference_answer)
        .replace("{generated_answer}", generated_answer);
    (system, user)
}

/// Extract `(reason, score)` from a judge response. The model may wrap the
/// JSON object in prose or code fences; the first balanced object carrying
/// both fields wins. Scores parse as numbers or numeric strings and must
/// lie in [1,5].
pub fn parse_judge_response(text: &str) -> Result<(String, f64)> {
    for candidate in balanced_json_objects(text) {
        let Ok(value) = serde_json::from_str::<serde_json::Value>(candidate) else {
            continue;
        };
        let Some(reason) = value.get("reason").and_then(|r| r.as_str()) else {
            continue;
        };
        let score = match value.get("score") {
            Some(serde_json::Value::Number(n)) => n.as_f64(),
            Some(serde_json::Value::String(s)) => s.trim().parse::<f64>().ok(),
            _ => None,
        };
        let Some(score) = score else {
            continue;
        };
        if !(1.0..=5.0).contains(&score) {
            return Err(Error::ScoreRange(score));
        }
        return Ok((reason.to_string(), score));
    }
    Err(Error::JudgeParse(truncate_for_error(text)))
}

fn truncate_for_error(text: &str) -> String {
    const LIMIT: usize = 200;
    if text.chars().count() <= LIMIT {
        text.to_string()
    } else {
        let cut: String = text.chars().take(LIMIT).collect();
        format!("{cut}…")
    }
}

/// Candidate balanced `{...}` slices of `text`, outermost first.
fn balanced_json_objects(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    out.push(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    out
}

/// Score one generated answer with the judge endpoint and binarize at
/// `threshold`.
pub fn judge(
    client: &VlmClient,
    qa_id: &str,
    question: &str,
    gold_answer: &str,
    generated: &str,
    threshold: f64,
) -> Result<JudgeVerdict> {
    let (system, user) = render_judge_prompt(question, gold_answer, generated);
    let messages = serde_json::json!([
        {"role": "system", "content": system},
        {"role": "user", "content": user}
    ]);
    let outcome = client.chat(messages)?;
    let (reason, score) = parse_judge_response(&outcome.content)?;
    Ok(JudgeVerdict {
        qa_id: qa_id.to_string(),
        reason,
        score,
        correct: score >= threshold,
    })
}

/// Per-category unweighted means; overall is the macro average of the
/// category means for categories that are present.
pub fn aggregate(items: &[(QaCategory, f64)]) -> Result<CategoryReport> {
    if items.is_empty() {
        return Err(Error::EmptyInput("no scored items to aggregate"));
    }
    let mut sums: BTreeMap<QaCategory, (f64, usize)> = BTreeMap::new();
    for (cat, score) in items {
        let entry = sums.entry(*cat).or_insert((0.0, 0));
        entry.0 += score;
        entry.1 += 1;
    }
    let per_category: BTreeMap<QaCategory, f64> = sums
        .into_iter()
        .map(|(cat, (sum, n))| (cat, sum / n as f64))
        .collect();
    let overall = per_category.values().sum::<f64>() / per_category.len() as f64;
    Ok(CategoryReport {
        per_category,
        overall,
        n_items: items.len(),
    })
}

/// Stage outputs for [`pipeline_score`], keyed by `qa_id`.
#[derive(Debug, Default)]
pub struct StageOutputs {
    /// Retrieval mode: retrieved candidate texts per item, in rank order.
    pub retrieved_texts: HashMap<String, Vec<String>>,
    /// Generation/overall mode: the generated answer per item.
    pub answers: HashMap<String, String>,
    /// Overall mode with the judge: verdicts per item.
    pub verdicts: HashMap<String, JudgeVerdict>,
}

/// Score a QA set at one pipeline stage and aggregate per category.
///
/// - retrieval: evidence-inclusion LCS against the retrieved texts; items
///   whose evidence normalizes to nothing are skipped.
/// - generation/overall: token F1 of the recorded answer against gold; with
///   `use_judge`, overall instead scores 1/0 from the verdicts.
///
/// Per-item scores are scaled to percentages before aggregation.
pub fn pipeline_score(
    qa: &[QAItem],
    mode: ScoreMode,
    outputs: &StageOutputs,
    use_judge: bool,
    lcs_granularity: LcsGranularity,
) -> Result<CategoryReport> {
    let mut items: Vec<(QaCategory, f64)> = Vec::with_capacity(qa.len());
    for item in qa {
        let score = match mode {
            ScoreMode::Retrieval => {
                if normalize_text(&item.evidence).is_empty() {
                    continue;
                }
                let texts = outputs.retrieved_texts.get(&item.qa_id).ok_or_else(|| {
                    Error::MissingStageOutput {
                        qa_id: item.qa_id.clone(),
                        what: "retrieved texts",
                    }
                })?;
                lcs_score(&item.evidence, texts, lcs_granularity)?
            }
            ScoreMode::Generation | ScoreMode::Overall => {
                if use_judge && mode == ScoreMode::Overall {
                    let verdict = outputs.verdicts.get(&item.qa_id).ok_or_else(|| {
                        Error::MissingStageOutput {
                            qa_id: item.qa_id.clone(),
                            what: "judge verdict",
                        }
                    })?;
                    if verdict.correct {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let answer = outputs.answers.get(&item.qa_id).ok_or_else(|| {
                        Error::MissingStageOutput {
                            qa_id: item.qa_id.clone(),
                            what: "generated answer",
                        }
                    })?;
                    token_f1(answer, &item.gold_answer).f1
                }
            }
        };
        items.push((item.category, score * 100.0));
    }
    aggregate(&items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_identity() {
        let s = token_f1("cat sat", "cat sat");
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn f1_worked_example() {
        // P = 2/3, R = 1, F1 = 0.8
        let s = token_f1("the cat sat", "cat sat");
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.recall, 1.0);
        assert!((s.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn f1_disjoint_and_empty() {
        assert_eq!(token_f1("dog", "cat").f1, 0.0);
        assert_eq!(token_f1("", "").f1, 1.0);
        assert_eq!(token_f1("", "cat").f1, 0.0);
        assert_eq!(token_f1("cat", "").f1, 0.0);
    }

    #[test]
    fn f1_multiset_counts_repeats() {
        // "a a b" vs "a b b": common multiset is {a, b} = 2
        let s = token_f1("a a b", "a b b");
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn f1_swap_exchanges_precision_and_recall() {
        let a = token_f1("the cat sat", "cat sat");
        let b = token_f1("cat sat", "the cat sat");
        assert_eq!(a.precision, b.recall);
        assert_eq!(a.recall, b.precision);
        assert_eq!(a.f1, b.f1);
    }

    #[test]
    fn judge_response_with_string_score() {
        let (reason, score) =
            parse_judge_response(r#"{"reason":"matches the reference","score":"4.0"}"#).unwrap();
        assert_eq!(score, 4.0);
        assert!(reason.contains("matches"));
    }

    #[test]
    fn judge_response_with_numeric_score_and_fences() {
        let text = "Here is my evaluation:\n```json\n{\"reason\": \"ok\", \"score\": 3}\n```";
        let (_, score) = parse_judge_response(text).unwrap();
        assert_eq!(score, 3.0);
    }

    #[test]
    fn judge_response_missing_score_is_parse_error() {
        assert!(matches!(
            parse_judge_response(r#"{"reason":"no score here"}"#),
            Err(Error::JudgeParse(_))
        ));
        assert!(matches!(
            parse_judge_response("no json at all"),
            Err(Error::JudgeParse(_))
        ));
    }

    #[test]
    fn judge_score_out_of_range() {
        assert!(matches!(
            parse_judge_response(r#"{"reason":"r","score":"7"}"#),
            Err(Error::ScoreRange(_))
        ));
    }

    #[test]
    fn judge_prompt_renders_placeholders_and_braces() {
        let (system, user) = render_judge_prompt("Q?", "ref", "gen");
        assert!(system.contains("\"reason\""));
        assert!(!system.contains("{{"));
        assert!(user.contains("## User Query\nQ?"));
        assert!(user.contains("## Reference Answer\nref"));
        assert!(user.contains("## Generated Answer\ngen"));
    }

    #[test]
    fn aggregate_macro_average() {
        let items: Vec<(QaCategory, f64)> = vec![
            (QaCategory::Txt, 86.0),
            (QaCategory::Tab, 70.0),
            (QaCategory::For, 73.5),
            (QaCategory::Cha, 63.4),
            (QaCategory::Ro, 86.3),
        ];
        let report = aggregate(&items).unwrap();
        assert!((report.overall - 75.8).abs() < 0.05);
    }

    #[test]
    fn aggregate_three_categories() {
        let items = vec![
            (QaCategory::Txt, 81.7),
            (QaCategory::Cha, 72.7),
            (QaCategory::Tab, 73.8),
        ];
        let report = aggregate(&items).unwrap();
        assert!((report.overall - 76.1).abs() < 0.05);
    }

    #[test]
    fn aggregate_single_category_is_identity() {
        let report = aggregate(&[(QaCategory::Ro, 42.5)]).unwrap();
        assert_eq!(report.overall, 42.5);
        assert_eq!(report.per_category[&QaCategory::Ro], 42.5);
    }

    #[test]
    fn aggregate_is_order_invariant() {
        let a = vec![
            (QaCategory::Txt, 10.0),
            (QaCategory::Tab, 30.0),
            (QaCategory::Txt, 20.0),
        ];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(aggregate(&a).unwrap(), aggregate(&b).unwrap());
    }

    #[test]
    fn aggregate_empty_is_error() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn pipeline_retrieval_mode_scores_and_skips() {
        let qa = vec![
            QAItem {
                qa_id: "q1".into(),
                question: "?".into(),
                gold_answer: "g".into(),
                evidence: "alpha beta".into(),
                category: QaCategory::Txt,
                source_page_ids: vec![],
            },
            QAItem {
                qa_id: "q2".into(),
                question: "?".into(),
                gold_answer: "g".into(),
                evidence: " ,. ".into(), // normalizes to empty; skipped
                category: QaCategory::Tab,
                source_page_ids: vec![],
            },
        ];
        let mut outputs = StageOutputs::default();
        outputs
            .retrieved_texts
            .insert("q1".into(), vec!["context alpha beta more".into()]);
        let report = pipeline_score(
            &qa,
            ScoreMode::Retrieval,
            &outputs,
            false,
            LcsGranularity::Char,
        )
        .unwrap();
        assert_eq!(report.n_items, 1);
        assert_eq!(report.per_category[&QaCategory::Txt], 100.0);
    }

    #[test]
    fn pipeline_generation_missing_answer_is_error() {
        let qa = vec![QAItem {
            qa_id: "q1".into(),
            question: "?".into(),
            gold_answer: "g".into(),
            evidence: "e".into(),
            category: QaCategory::Txt,
            source_page_ids: vec![],
        }];
        let outputs = StageOutputs::default();
        assert!(matches!(
            pipeline_score(
                &qa,
                ScoreMode::Generation,
                &outputs,
                false,
                LcsGranularity::Char
            ),
            Err(Error::MissingStageOutput { .. })
        ));
    }
}
