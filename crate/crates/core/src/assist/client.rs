use std::fmt::Write as _;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::{json, Value};

use super::{AssistError, ChatContext, ChatRole, ChatTranscript, ContextFrame, SYSTEM_PROMPT};

pub const KEY_ENV: &str = "OPENAI_API_KEY";
pub const BASE_URL_ENV: &str = "CHAT_BASE_URL";
pub const MODEL_ENV: &str = "CHAT_MODEL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
const DEFAULT_MODEL: &str = "gpt-4o";

/// Sends one chat-completions body and returns the assistant's text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, body: &Value) -> Result<String, AssistError>;
}

#[derive(Debug, Clone)]
pub struct HttpChatClient {
    pub base_url: String,
    pub api_key: String,
    pub model: String,
    pub attempts: u32,
    pub backoff: Duration,
}

impl HttpChatClient {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        HttpChatClient {
            base_url: base_url.into(),
            api_key: api_key.into(),
            model: DEFAULT_MODEL.into(),
            attempts: 3,
            backoff: Duration::from_millis(250),
        }
    }

    /// Reads `OPENAI_API_KEY`, `CHAT_BASE_URL` and `CHAT_MODEL`. A missing
    /// key fails here, before any request is made.
    pub fn from_env() -> Result<Self, AssistError> {
        let key = std::env::var(KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| AssistError::Auth(format!("{KEY_ENV} is not set")))?;
        let base = std::env::var(BASE_URL_ENV)
            .ok()
            .filter(|u| !u.is_empty())
            .unwrap_or_else(|| DEFAULT_BASE_URL.into());
        let mut client = HttpChatClient::new(base, key);
        if let Some(m) = std::env::var(MODEL_ENV).ok().filter(|m| !m.is_empty()) {
            client.model = m;
        }
        Ok(client)
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

fn assistant_text(body: &str) -> Result<String, AssistError> {
    let v: Value = serde_json::from_str(body).map_err(|e| AssistError::BadResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| AssistError::BadResponse("no choices[0].message.content".into()))
}

impl ChatBackend for HttpChatClient {
    fn complete(&self, body: &Value) -> Result<String, AssistError> {
        let mut body = body.clone();
        body["model"] = Value::String(self.model.clone());
        let payload = serde_json::to_vec(&body).map_err(|e| AssistError::BadResponse(e.to_string()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| AssistError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        let attempts = self.attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 2));
            }
            let resp = client
                .post(self.endpoint())
                .bearer_auth(&self.api_key)
                .header("Content-Type", "application/json")
                .body(payload.clone())
                .send();
            let resp = match resp {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status().as_u16();
            match status {
                401 | 403 => return Err(AssistError::Auth(format!("HTTP {}", resp.status()))),
                413 => return Err(AssistError::PayloadTooLarge),
                429 | 500..=599 => {
                    last = format!("HTTP {}", resp.status());
                    continue;
                }
                _ => {}
            }
            let text = resp.text().map_err(|e| AssistError::BadResponse(e.to_string()))?;
            if !(200..300).contains(&status) {
                return Err(AssistError::BadResponse(format!("HTTP {status}: {text}")));
            }
            return assistant_text(&text);
        }
        Err(AssistError::Transport { attempts, message: last })
    }
}

fn secs(ms: u64) -> String {
    format!("{}.{:03}", ms / 1000, ms % 1000)
}

fn user_text(ctx: &ChatContext, frames: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Instruction: {}", ctx.instruction);
    let _ = writeln!(s, "Recording length: {} s", secs(ctx.observation_ms));
    if ctx.transcript.is_empty() {
        let _ = writeln!(s, "Transcript: none");
    } else {
        let _ = writeln!(s, "Transcript:");
        for seg in &ctx.transcript {
            let _ = writeln!(s, "[{} - {}] {}: {}", secs(seg.start_ms), secs(seg.end_ms), seg.speaker, seg.text);
        }
    }
    if let Some(codes) = &ctx.codebook {
        let _ = writeln!(s, "Codebook:");
        for c in codes {
            let _ = writeln!(s, "- {}: {}", c.code, c.description);
        }
    }
    let _ = write!(s, "Frames attached: {frames}");
    s
}

/// Chat-completions body (without `model`) carrying the system prompt,
/// earlier turns as text, and this turn's text plus `frames` as base64
/// JPEG attachments.
pub fn build_request_body(ctx: &ChatContext, frames: &[ContextFrame], history: &ChatTranscript) -> Value {
    let mut messages = vec![json!({"role": "system", "content": SYSTEM_PROMPT})];
    for e in history.history() {
        let role = if e.role == ChatRole::User { "user" } else { "assistant" };
        messages.push(json!({"role": role, "content": e.content}));
    }
    let mut parts = vec![json!({"type": "text", "text": user_text(ctx, frames.len())})];
    for f in frames {
        parts.push(json!({"type": "text", "text": format!("Frame at {} s", secs(f.bag_time_ms))}));
        parts.push(json!({
            "type": "image_url",
            "image_url": {"url": format!("data:image/jpeg;base64,{}", B64.encode(&f.jpeg))}
        }));
    }
    messages.push(json!({"role": "user", "content": parts}));
    json!({"messages": messages, "temperature": 0})
}

/// Every other frame, so a halved request still spans the recording.
fn halve(frames: &[ContextFrame]) -> Vec<ContextFrame> {
    frames.iter().step_by(2).take(frames.len() / 2).cloned().collect()
}

/// Sends one turn and records it in `transcript` on success. A
/// payload-too-large answer is retried once with half the frames.
pub fn request_annotations(
    backend: &dyn ChatBackend,
    ctx: &ChatContext,
    transcript: &mut ChatTranscript,
) -> Result<String, AssistError> {
    let mut frames = ctx.frames.clone();
    let reply = match backend.complete(&build_request_body(ctx, &frames, transcript)) {
        Err(AssistError::PayloadTooLarge) => {
            frames = halve(&frames);
            backend.complete(&build_request_body(ctx, &frames, transcript))?
        }
        other => other?,
    };
    transcript.record_turn(&user_text(ctx, frames.len()), frames.len(), &reply);
    Ok(reply)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(t: u64) -> ContextFrame {
        ContextFrame {
            bag_time_ms: t,
            jpeg: vec![t as u8],
        }
    }

    #[test]
    fn halving_keeps_spread() {
        let f: Vec<ContextFrame> = (0..5).map(frame).collect();
        let h: Vec<u64> = halve(&f).iter().map(|f| f.bag_time_ms).collect();
        assert_eq!(h, [0, 2]);
        assert!(halve(&[frame(1)]).is_empty());
    }

    #[test]
    fn body_shape() {
        let ctx = ChatContext {
            instruction: "mark smiles".into(),
            transcript: Vec::new(),
            codebook: None,
            frames: vec![frame(2000)],
            observation_ms: 5000,
        };
        let body = build_request_body(&ctx, &ctx.frames, &ChatTranscript::new("s"));
        let msgs = body["messages"].as_array().unwrap();
        assert_eq!(msgs.len(), 2);
        let parts = msgs[1]["content"].as_array().unwrap();
        assert_eq!(parts.len(), 3);
        assert!(parts[0]["text"].as_str().unwrap().contains("mark smiles"));
        assert_eq!(parts[2]["image_url"]["url"], "data:image/jpeg;base64,0A==");
    }

    #[test]
    fn content_extraction() {
        assert_eq!(
            assistant_text(r#"{"choices":[{"message":{"content":"[]"}}]}"#).unwrap(),
            "[]"
        );
        assert!(matches!(assistant_text("{}"), Err(AssistError::BadResponse(_))));
    }
}
