//! VLM text conversion over an HTTP chat-completions contract: one request
//! per chunk crop, content-addressed caching, bounded request parallelism,
//! page-text assembly in reading order, and token/latency cost accounting.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::par;

/// Default conversion prompt for turning page crops into Markdown.
pub const DEFAULT_OCR_PROMPT: &str = r#"You are a powerful OCR assistant tasked with converting PDF images to the Markdown format. You MUST obey the following criteria:
1. Plain text processing:
- Accurately recognize all text content in the PDF image without guessing or inferring.
- Precisely recognize all text in the PDF image without making assumptions in the Markdown format.
- Maintain the original document structure, including headings, paragraphs, lists, etc.
2. Formula Processing:
- Convert all formulas to LaTeX.
- Enclose inline formulas with $ $. For example: This is an inline formula $ E = mc^2 $.
- Enclose block formulas with $$ $$. For example: $$ \frac{-b \pm \sqrt{b^2 - 4ac}}{2a} $$.
3. Table Processing:
- Convert all tables to LaTeX format.
- Enclose the tabular data with \begin{table} \end{table}.
4. Chart Processing:
- Convert all Charts to LaTeX format.
- Enclose the chart data in tabular with \begin{table} \end{table}.
5. Figure Handling:
- Ignore figures from the PDF image; do not describe or convert images.
6. Output Format:
- Ensure the Markdown output has a clear structure with appropriate line breaks.
- Maintain the original layout and format as closely as possible.
Please strictly follow these guidelines to ensure accuracy and consistency in the conversion. Your task is to accurately convert the content of the PDF image using these format requirements without adding any extra explanations or comments."#;

/// Endpoint and sampling configuration for conversion requests.
///
/// The API key never serializes, so config digests and reports cannot
/// leak it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvertParams {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub repetition_penalty: f64,
    pub max_in_flight: usize,
    pub timeout_s: u64,
    pub retries: u32,
    /// First retry delay; doubles per attempt (1s, 2s, 4s by default).
    pub retry_base_ms: u64,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl ConvertParams {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ConvertParams {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.3,
            top_p: 0.95,
            max_tokens: 8192,
            repetition_penalty: 1.1,
            max_in_flight: 4,
            timeout_s: 120,
            retries: 3,
            retry_base_ms: 1000,
            api_key: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(Error::InvalidInput("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidInput("max_tokens must be > 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::InvalidInput("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }
}

/// Converted markdown for one chunk, with usage accounting.
///
/// Token counts are -1 when the endpoint reported no usage; `usage_missing`
/// marks those results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkText {
    pub chunk_id: String,
    pub markdown: String,
    pub input_tokens: i64,
    pub output_tokens: i64,
    pub latency_ms: u64,
    pub from_cache: bool,
    #[serde(default)]
    pub usage_missing: bool,
}

/// A page's assembled text in reading order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageText {
    pub page_id: String,
    pub text: String,
    pub chunk_order: Vec<String>,
}

/// Per-page conversion log entry feeding the cost report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageLog {
    pub page_id: String,
    pub n_chunks: usize,
    pub input_tokens: i64,
    pub output_tokens: i64,
    pub wall_time_s: f64,
}

/// Corpus-level conversion cost summary (per-page means).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub n_pages: usize,
    pub mean_input_tokens: f64,
    pub mean_output_tokens: f64,
    pub mean_chunks: f64,
    pub mean_wall_time_s: f64,
    /// mean input tokens per request: mean_input_tokens / mean_chunks.
    pub per_request_input_tokens: f64,
}

#[derive(Serialize, Deserialize)]
struct CachedConversion {
    markdown: String,
    input_tokens: i64,
    output_tokens: i64,
    usage_missing: bool,
}

pub(crate) struct ChatOutcome {
    pub content: String,
    pub prompt_tokens: Option<i64>,
    pub completion_tokens: Option<i64>,
    pub latency_ms: u64,
}

/// Shared conversion client; safe for concurrent submission. At most
/// `max_in_flight` requests are outstanding at any instant.
pub struct VlmClient {
    params: ConvertParams,
    http: reqwest::blocking::Client,
    cache_dir: Option<PathBuf>,
}

impl VlmClient {
    pub fn new(params: ConvertParams, cache_dir: Option<PathBuf>) -> Result<Self> {
        params.validate()?;
        if let Some(dir) = &cache_dir {
            fs::create_dir_all(dir)?;
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(params.timeout_s))
            .build()
            .map_err(|e| Error::Http(e.to_string()))?;
        Ok(VlmClient {
            params,
            http,
            cache_dir,
        })
    }

    pub fn params(&self) -> &ConvertParams {
        &self.params
    }

    /// Convert one chunk crop to markdown. Identical (image, prompt, model,
    /// sampling) tuples are served from the cache without endpoint traffic.
    pub fn convert_chunk(&self, chunk_id: &str, image: &[u8], prompt: &str) -> Result<ChunkText> {
        if image.is_empty() {
            return Err(Error::InvalidInput("empty chunk image".into()));
        }
        let key = self.cache_key(image, prompt);
        if let Some(hit) = self.cache_get(&key)? {
            return Ok(ChunkText {
                chunk_id: chunk_id.to_string(),
                markdown: hit.markdown,
                input_tokens: hit.input_tokens,
                output_tokens: hit.output_tokens,
                latency_ms: 0,
                from_cache: true,
                usage_missing: hit.usage_missing,
            });
        }

        let image_b64 = base64::engine::general_purpose::STANDARD.encode(image);
        let messages = serde_json::json!([
            {"role": "system", "content": prompt},
            {"role": "user", "content": [
                {"type": "image_url",
                 "image_url": {"url": format!("data:image/png;base64,{image_b64}")}}
            ]}
        ]);
        let outcome = self.chat(messages)?;
        let usage_missing = outcome.prompt_tokens.is_none() || outcome.completion_tokens.is_none();
        let result = ChunkText {
            chunk_id: chunk_id.to_string(),
            markdown: outcome.content,
            input_tokens: outcome.prompt_tokens.unwrap_or(-1),
            output_tokens: outcome.completion_tokens.unwrap_or(-1),
            latency_ms: outcome.latency_ms,
            from_cache: false,
            usage_missing,
        };
        self.cache_put(&key, &result)?;
        Ok(result)
    }

    /// Convert many chunks with bounded parallelism (`max_in_flight`).
    /// Results come back in input order regardless of completion order.
    pub fn convert_chunks(
        &self,
        items: &[(String, Vec<u8>)],
        prompt: &str,
    ) -> Vec<Result<ChunkText>> {
        par::map_bounded(self.params.max_in_flight, items, |(chunk_id, image)| {
            self.convert_chunk(chunk_id, image, prompt)
        })
    }

    /// Ask the answer model a question over retrieved context, in rank order.
    pub fn generate_answer(&self, question: &str, context: &AnswerContext) -> Result<String> {
        const SYSTEM: &str = "You are a question answering assistant. Answer the question using only the provided context. Reply with the answer only.";
        let messages = match context {
            AnswerContext::Texts(texts) => {
                if texts.is_empty() {
                    return Err(Error::InvalidInput("answer context is empty".into()));
                }
                let mut body = String::new();
                for (i, t) in texts.iter().enumerate() {
                    body.push_str(&format!("Context {}:\n{}\n\n", i + 1, t));
                }
                body.push_str(&format!("Question: {question}"));
                serde_json::json!([
                    {"role": "system", "content": SYSTEM},
                    {"role": "user", "content": body}
                ])
            }
            AnswerContext::Images(images) => {
                if images.is_empty() {
                    return Err(Error::InvalidInput("answer context is empty".into()));
                }
                let mut parts: Vec<serde_json::Value> = images
                    .iter()
                    .map(|img| {
                        let b64 = base64::engine::general_purpose::STANDARD.encode(img);
                        serde_json::json!({
                            "type": "image_url",
                            "image_url": {"url": format!("data:image/png;base64,{b64}")}
                        })
                    })
                    .collect();
                parts.push(serde_json::json!({"type": "text", "text": format!("Question: {question}")}));
                serde_json::json!([
                    {"role": "system", "content": SYSTEM},
                    {"role": "user", "content": parts}
                ])
            }
        };
        Ok(self.chat(messages)?.content)
    }

    /// One chat-completions round trip with retry on transient failures.
    pub(crate) fn chat(&self, messages: serde_json::Value) -> Result<ChatOutcome> {
        let url = format!(
            "{}/v1/chat/completions",
            self.params.endpoint.trim_end_matches('/')
        );
        let body = serde_json::json!({
            "model": self.params.model,
            "messages": messages,
            "temperature": self.params.temperature,
            "top_p": self.params.top_p,
            "max_tokens": self.params.max_tokens,
            "repetition_penalty": self.params.repetition_penalty,
        });

        let mut attempt = 0u32;
        loop {
            let started = Instant::now();
            match self.send_once(&url, &body) {
                Ok(mut outcome) => {
                    outcome.latency_ms = started.elapsed().as_millis() as u64;
                    return Ok(outcome);
                }
                Err(e) => {
                    let transient = match &e {
                        Error::Timeout(_) | Error::Http(_) => true,
                        Error::Endpoint { status, .. } => *status >= 500,
                        _ => false,
                    };
                    if !transient || attempt >= self.params.retries {
                        return Err(e);
                    }
                    let delay = self.params.retry_base_ms.saturating_mul(1 << attempt);
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
            }
        }
    }

    fn send_once(&self, url: &str, body: &serde_json::Value) -> Result<ChatOutcome> {
        let mut req = self.http.post(url).json(body);
        if let Some(key) = &self.params.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                Error::Timeout(self.params.timeout_s)
            } else {
                Error::Http(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| Error::Http(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(Error::Endpoint { status, body: text });
        }
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            Error::Http(format!("endpoint returned invalid JSON: {e}"))
        })?;
        let content = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| Error::Http("response lacks choices[0].message.content".into()))?
            .to_string();
        let prompt_tokens = value["usage"]["prompt_tokens"].as_i64();
        let completion_tokens = value["usage"]["completion_tokens"].as_i64();
        Ok(ChatOutcome {
            content,
            prompt_tokens,
            completion_tokens,
            latency_ms: 0,
        })
    }

    /// Content address for a conversion: image bytes plus everything that
    /// changes the output. Fields are length-prefixed so adjacent values
    /// cannot collide.
    fn cache_key(&self, image: &[u8], prompt: &str) -> String {
        let mut h = Sha256::new();
        for part in [
            image,
            prompt.as_bytes(),
            self.params.model.as_bytes(),
            self.params.temperature.to_le_bytes().as_slice(),
            self.params.top_p.to_le_bytes().as_slice(),
            self.params.max_tokens.to_le_bytes().as_slice(),
            self.params.repetition_penalty.to_le_bytes().as_slice(),
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        hex::encode(h.finalize())
    }

    fn cache_get(&self, key: &str) -> Result<Option<CachedConversion>> {
        let Some(dir) = &self.cache_dir else {
            return Ok(None);
        };
        let path = dir.join(format!("{key}.json"));
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        let cached = serde_json::from_str(&text).map_err(|e| {
            Error::InvalidInput(format!("corrupt cache entry {}: {e}", path.display()))
        })?;
        Ok(Some(cached))
    }

    fn cache_put(&self, key: &str, result: &ChunkText) -> Result<()> {
        let Some(dir) = &self.cache_dir else {
            return Ok(());
        };
        let cached = CachedConversion {
            markdown: result.markdown.clone(),
            input_tokens: result.input_tokens,
            output_tokens: result.output_tokens,
            usage_missing: result.usage_missing,
        };
        let json = serde_json::to_string(&cached)
            .map_err(|e| Error::InvalidInput(format!("cache serialization failed: {e}")))?;
        // write-temp-then-rename keeps concurrent writers atomic
        let tmp = dir.join(format!(".{key}.tmp-{}", std::process::id()));
        fs::write(&tmp, json)?;
        fs::rename(&tmp, dir.join(format!("{key}.json")))?;
        Ok(())
    }
}

/// Retrieved context handed to the answer model.
pub enum AnswerContext {
    Texts(Vec<String>),
    Images(Vec<Vec<u8>>),
}

/// Join converted chunk texts (already in ascending `order_index`) into the
/// page-level sequence. Empty chunk texts are skipped; `chunk_order` still
/// records every chunk id.
pub fn assemble_page_text(
    page_id: &str,
    chunks: &[ChunkText],
    separator: &str,
) -> Result<PageText> {
    for c in chunks {
        // chunk ids are "{page_id}__{order_index}"
        let owner = c.chunk_id.rsplit_once("__").map(|(p, _)| p);
        if owner != Some(page_id) {
            return Err(Error::MixedPages(
                page_id.to_string(),
                c.chunk_id.clone(),
            ));
        }
    }
    let text = chunks
        .iter()
        .map(|c| c.markdown.as_str())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(separator);
    Ok(PageText {
        page_id: page_id.to_string(),
        text,
        chunk_order: chunks.iter().map(|c| c.chunk_id.clone()).collect(),
    })
}

/// Per-page means over conversion logs, plus the derived per-request input
/// token count.
pub fn cost_report(page_logs: &[PageLog]) -> Result<CostReport> {
    if page_logs.is_empty() {
        return Err(Error::EmptyCorpus("no page logs for cost report"));
    }
    let n = page_logs.len() as f64;
    let mean_input_tokens = page_logs.iter().map(|l| l.input_tokens as f64).sum::<f64>() / n;
    let mean_output_tokens = page_logs.iter().map(|l| l.output_tokens as f64).sum::<f64>() / n;
    let mean_chunks = page_logs.iter().map(|l| l.n_chunks as f64).sum::<f64>() / n;
    let mean_wall_time_s = page_logs.iter().map(|l| l.wall_time_s).sum::<f64>() / n;
    let per_request_input_tokens = if mean_chunks > 0.0 {
        mean_input_tokens / mean_chunks
    } else {
        0.0
    };
    Ok(CostReport {
        n_pages: page_logs.len(),
        mean_input_tokens,
        mean_output_tokens,
        mean_chunks,
        mean_wall_time_s,
        per_request_input_tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(id: &str, text: &str) -> ChunkText {
        ChunkText {
            chunk_id: id.to_string(),
            markdown: text.to_string(),
            input_tokens: 10,
            output_tokens: 5,
            latency_ms: 1,
            from_cache: false,
            usage_missing: false,
        }
    }

    #[test]
    fn assemble_joins_with_separator() {
        let page = assemble_page_text(
            "p1",
            &[chunk("p1__0", "A"), chunk("p1__1", "B")],
            "\n\n",
        )
        .unwrap();
        assert_eq!(page.text, "A\n\nB");
        assert_eq!(page.chunk_order, vec!["p1__0", "p1__1"]);
    }

    #[test]
    fn assemble_skips_empty_chunks() {
        let page = assemble_page_text(
            "p1",
            &[chunk("p1__0", "A"), chunk("p1__1", ""), chunk("p1__2", "B")],
            "\n\n",
        )
        .unwrap();
        assert_eq!(page.text, "A\n\nB");
        assert_eq!(page.chunk_order.len(), 3);
    }

    #[test]
    fn assemble_single_chunk_is_identity() {
        let page = assemble_page_text("p1", &[chunk("p1__0", "only")], "\n\n").unwrap();
        assert_eq!(page.text, "only");
    }

    #[test]
    fn assemble_is_associative_in_joining() {
        let parts = [chunk("p__0", "A"), chunk("p__1", "B"), chunk("p__2", "C")];
        let all = assemble_page_text("p", &parts, "\n\n").unwrap().text;
        let left = assemble_page_text("p", &parts[..2], "\n\n").unwrap().text;
        let pairwise = format!("{}\n\n{}", left, parts[2].markdown);
        assert_eq!(all, pairwise);
    }

    #[test]
    fn assemble_rejects_mixed_pages() {
        let err =
            assemble_page_text("p1", &[chunk("p1__0", "A"), chunk("p2__0", "B")], "\n\n")
                .unwrap_err();
        assert!(matches!(err, Error::MixedPages(..)));
    }

    #[test]
    fn cost_report_single_page() {
        let report = cost_report(&[PageLog {
            page_id: "p".into(),
            n_chunks: 1,
            input_tokens: 1320,
            output_tokens: 991,
            wall_time_s: 68.0,
        }])
        .unwrap();
        assert_eq!(report.per_request_input_tokens, 1320.0);
        assert_eq!(report.mean_chunks, 1.0);
    }

    #[test]
    fn cost_report_anchor_ratio() {
        // 10 pages averaging 9683.1 input tokens and 12.4 chunks
        let mut logs = Vec::new();
        for i in 0..10 {
            logs.push(PageLog {
                page_id: format!("p{i}"),
                n_chunks: if i < 4 { 13 } else { 12 },
                input_tokens: if i == 0 { 96831 - 9683 * 9 } else { 9683 },
                output_tokens: 2515,
                wall_time_s: 56.3,
            });
        }
        let report = cost_report(&logs).unwrap();
        assert!((report.mean_input_tokens - 9683.1).abs() < 1e-9);
        assert!((report.mean_chunks - 12.4).abs() < 1e-9);
        assert!((report.per_request_input_tokens - 780.9).abs() < 0.05);
    }

    #[test]
    fn cost_report_rejects_empty() {
        assert!(matches!(
            cost_report(&[]).unwrap_err(),
            Error::EmptyCorpus(_)
        ));
    }

    #[test]
    fn cache_key_varies_with_each_component() {
        let base = ConvertParams::new("http://localhost:1", "m");
        let client = VlmClient::new(base.clone(), None).unwrap();
        let k0 = client.cache_key(b"img", "prompt");
        assert_eq!(k0, client.cache_key(b"img", "prompt"));
        assert_ne!(k0, client.cache_key(b"img2", "prompt"));
        assert_ne!(k0, client.cache_key(b"img", "prompt2"));

        for mutate in [
            |p: &mut ConvertParams| p.model = "other".into(),
            |p: &mut ConvertParams| p.temperature = 0.7,
            |p: &mut ConvertParams| p.top_p = 0.5,
            |p: &mut ConvertParams| p.max_tokens = 16,
            |p: &mut ConvertParams| p.repetition_penalty = 1.3,
        ] {
            let mut params = base.clone();
            mutate(&mut params);
            let other = VlmClient::new(params, None).unwrap();
            assert_ne!(k0, other.cache_key(b"img", "prompt"));
        }
    }

    #[test]
    fn params_validation() {
        let mut p = ConvertParams::new("http://x", "m");
        p.max_in_flight = 0;
        assert!(p.validate().is_err());
        let mut p = ConvertParams::new("http://x", "m");
        p.temperature = -0.1;
        assert!(p.validate().is_err());
        let mut p = ConvertParams::new("http://x", "m");
        p.max_tokens = 0;
        assert!(p.validate().is_err());
    }
}
