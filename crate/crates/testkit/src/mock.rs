//! Minimal chat-completions mock server over std TCP.
//!
//! Handles three request shapes: image conversion (reads the crop color and
//! returns the fixture text for it), question answering over supplied
//! context (returns the gold answer when the matching evidence is present),
//! and judging (scores 5.0 when the generated answer contains the
//! reference, else 2.0). Each connection is served on its own thread, so
//! client-side concurrency limits are observable via the in-flight peak.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fixture::FixtureCorpus;

/// Artificial response delay.
#[derive(Debug, Clone, Default)]
pub enum Latency {
    #[default]
    None,
    Fixed(u64),
    /// Uniform in [0, max_ms), seeded.
    Seeded { seed: u64, max_ms: u64 },
}

/// Server behavior knobs.
#[derive(Debug, Clone, Default)]
pub struct Behavior {
    pub latency: Latency,
    /// Respond with this status/body unconditionally (error-path tests).
    pub force_status: Option<(u16, String)>,
    /// Fail the first N requests with 500 before behaving normally.
    pub fail_first_n: usize,
    /// Drop the usage object from responses.
    pub omit_usage: bool,
    /// Fixed reply content, overriding content-based behavior.
    pub canned_reply: Option<String>,
    /// Usage for canned replies.
    pub canned_usage: Option<(i64, i64)>,
    /// crop color -> markdown text.
    pub text_table: BTreeMap<(u8, u8, u8), String>,
    /// (question, gold answer, evidence) triples.
    pub qa_table: Vec<(String, String, String)>,
}

impl Behavior {
    pub fn for_fixture(corpus: &FixtureCorpus) -> Self {
        Behavior {
            text_table: corpus.text_table.clone(),
            qa_table: corpus.qa_table.clone(),
            ..Behavior::default()
        }
    }
}

#[derive(Default)]
pub struct ServerState {
    pub total_requests: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub peak_in_flight: AtomicUsize,
}

pub struct MockServer {
    addr: SocketAddr,
    state: Arc<ServerState>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(behavior: Behavior) -> std::io::Result<MockServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let state = Arc::new(ServerState::default());
        let shutdown = Arc::new(AtomicBool::new(false));
        let rng = Arc::new(Mutex::new(match behavior.latency {
            Latency::Seeded { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        }));
        let behavior = Arc::new(behavior);

        let accept_state = Arc::clone(&state);
        let accept_shutdown = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if accept_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let state = Arc::clone(&accept_state);
                let behavior = Arc::clone(&behavior);
                let rng = Arc::clone(&rng);
                std::thread::spawn(move || {
                    let _ = handle_connection(stream, &state, &behavior, &rng);
                });
            }
        });

        Ok(MockServer {
            addr,
            state,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn total_requests(&self) -> usize {
        self.state.total_requests.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.state.peak_in_flight.load(Ordering::SeqCst)
    }

    pub fn reset_counters(&self) {
        self.state.total_requests.store(0, Ordering::SeqCst);
        self.state.peak_in_flight.store(0, Ordering::SeqCst);
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // unblock the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn handle_connection(
    stream: TcpStream,
    state: &ServerState,
    behavior: &Behavior,
    rng: &Mutex<Option<ChaCha8Rng>>,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    // request fully received: it is now in flight
    let n = state.total_requests.fetch_add(1, Ordering::SeqCst) + 1;
    let current = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    state.peak_in_flight.fetch_max(current, Ordering::SeqCst);

    let delay_ms = match behavior.latency {
        Latency::None => 0,
        Latency::Fixed(ms) => ms,
        Latency::Seeded { max_ms, .. } => {
            let mut guard = rng.lock().unwrap();
            guard.as_mut().map_or(0, |r| r.gen_range(0..max_ms.max(1)))
        }
    };
    if delay_ms > 0 {
        std::thread::sleep(Duration::from_millis(delay_ms));
    }

    let response = respond(&request_line, &body, behavior, n);
    let result = write_response(stream, response);
    state.in_flight.fetch_sub(1, Ordering::SeqCst);
    result
}

struct Response {
    status: u16,
    reason: &'static str,
    body: String,
}

fn respond(request_line: &str, body: &[u8], behavior: &Behavior, request_no: usize) -> Response {
    if let Some((status, body)) = &behavior.force_status {
        return Response {
            status: *status,
            reason: "Error",
            body: body.clone(),
        };
    }
    if request_no <= behavior.fail_first_n {
        return Response {
            status: 500,
            reason: "Internal Server Error",
            body: r#"{"error":"transient failure"}"#.to_string(),
        };
    }
    if !request_line.starts_with("POST /v1/chat/completions") {
        return Response {
            status: 404,
            reason: "Not Found",
            body: r#"{"error":"unknown route"}"#.to_string(),
        };
    }
    let Ok(request) = serde_json::from_slice::<serde_json::Value>(body) else {
        return Response {
            status: 400,
            reason: "Bad Request",
            body: r#"{"error":"invalid JSON"}"#.to_string(),
        };
    };

    let content = answer_content(&request, behavior);
    let prompt_tokens = (body.len() / 7) as i64;
    let completion_tokens = (content.len() / 4 + 1) as i64;
    let (prompt_tokens, completion_tokens) = behavior
        .canned_usage
        .unwrap_or((prompt_tokens, completion_tokens));

    let mut reply = serde_json::json!({
        "id": "mock-1",
        "object": "chat.completion",
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop"
        }],
    });
    if !behavior.omit_usage {
        reply["usage"] = serde_json::json!({
            "prompt_tokens": prompt_tokens,
            "completion_tokens": completion_tokens,
        });
    }
    Response {
        status: 200,
        reason: "OK",
        body: reply.to_string(),
    }
}

fn answer_content(request: &serde_json::Value, behavior: &Behavior) -> String {
    if let Some(canned) = &behavior.canned_reply {
        return canned.clone();
    }
    let user = request["messages"]
        .as_array()
        .and_then(|ms| ms.iter().rev().find(|m| m["role"] == "user"))
        .map(|m| m["content"].clone())
        .unwrap_or(serde_json::Value::Null);

    match user {
        serde_json::Value::String(text) => {
            if text.contains("## User Query") {
                judge_reply(&text)
            } else if text.contains("Question:") {
                answer_reply(&text, &text, behavior)
            } else {
                "ok".to_string()
            }
        }
        serde_json::Value::Array(parts) => {
            let images: Vec<String> = parts
                .iter()
                .filter(|p| p["type"] == "image_url")
                .filter_map(|p| p["image_url"]["url"].as_str().map(str::to_string))
                .collect();
            let question_text: Option<String> = parts
                .iter()
                .filter(|p| p["type"] == "text")
                .filter_map(|p| p["text"].as_str())
                .find(|t| t.contains("Question:"))
                .map(str::to_string);

            let texts: Vec<String> = images
                .iter()
                .map(|uri| read_image_text(uri, &behavior.text_table))
                .collect();
            match question_text {
                // visual QA: evidence must appear in the decoded chunk texts
                Some(q) => answer_reply(&q, &texts.join("\n"), behavior),
                // plain conversion: one crop per request
                None => texts.join("\n"),
            }
        }
        _ => "ok".to_string(),
    }
}

/// Decode a data-URI PNG and look up its fill color in the text table.
fn read_image_text(data_uri: &str, table: &BTreeMap<(u8, u8, u8), String>) -> String {
    let Some(b64) = data_uri.strip_prefix("data:image/png;base64,") else {
        return "unrecognized region".to_string();
    };
    let Ok(bytes) = base64::engine::general_purpose::STANDARD.decode(b64) else {
        return "unrecognized region".to_string();
    };
    let Ok(img) = image::load_from_memory(&bytes) else {
        return "unrecognized region".to_string();
    };
    let rgb = img.to_rgb8();
    let x = 2.min(rgb.width().saturating_sub(1));
    let y = 2.min(rgb.height().saturating_sub(1));
    let p = rgb.get_pixel(x, y);
    table
        .get(&(p[0], p[1], p[2]))
        .cloned()
        .unwrap_or_else(|| "unrecognized region".to_string())
}

/// Reply with the gold answer when the question is known and its evidence
/// string appears in the provided context.
fn answer_reply(question_part: &str, context: &str, behavior: &Behavior) -> String {
    let question = question_part
        .rsplit_once("Question:")
        .map(|(_, q)| q.trim())
        .unwrap_or("");
    for (q, gold, evidence) in &behavior.qa_table {
        if q == question {
            if context.contains(evidence.as_str()) {
                return gold.clone();
            }
            return "I cannot find the answer in the context.".to_string();
        }
    }
    "I cannot find the answer in the context.".to_string()
}

/// Score 5.0 when the generated answer contains the reference answer.
fn judge_reply(text: &str) -> String {
    let reference = section(text, "## Reference Answer");
    let generated = section(text, "## Generated Answer");
    let correct = !reference.is_empty()
        && generated
            .to_lowercase()
            .contains(&reference.to_lowercase());
    let (score, reason) = if correct {
        ("5.0", "The generated answer matches the reference answer.")
    } else {
        ("2.0", "The generated answer does not match the reference answer.")
    };
    serde_json::json!({"reason": reason, "score": score}).to_string()
}

fn section<'a>(text: &'a str, header: &str) -> &'a str {
    let Some(start) = text.find(header) else {
        return "";
    };
    let rest = &text[start + header.len()..];
    let end = rest.find("\n##").unwrap_or(rest.len());
    rest[..end].trim()
}

fn write_response(mut stream: TcpStream, response: Response) -> std::io::Result<()> {
    let headers = format!(
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        response.status,
        response.reason,
        response.body.len()
    );
    stream.write_all(headers.as_bytes())?;
    stream.write_all(response.body.as_bytes())?;
    stream.flush()
}
